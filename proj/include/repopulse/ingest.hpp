#pragma once

#include <bitset>
#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace repopulse {

using Timestamp = std::chrono::sys_seconds;

// The fourteen archive event kinds. Only Fork and Watch feed the forecasters;
// the rest are parsed so they can be filtered out explicitly.
enum class EventType : std::uint8_t {
  CommitComment,
  Create,
  Delete,
  Fork,
  Gollum,
  IssueComment,
  Issues,
  Member,
  Public,
  PullRequest,
  PullRequestReviewComment,
  Push,
  Release,
  Watch,
};

inline constexpr std::size_t kEventTypeCount = 14;

std::string_view to_string(EventType type);

/// Accepts the archive spelling ("ForkEvent") as well as the bare name ("Fork").
std::optional<EventType> parse_event_type(std::string_view name);

class EventTypeSet {
 public:
  EventTypeSet() = default;
  EventTypeSet(std::initializer_list<EventType> types);

  static EventTypeSet all();

  void insert(EventType t) { bits_.set(static_cast<std::size_t>(t)); }
  bool contains(EventType t) const { return bits_.test(static_cast<std::size_t>(t)); }
  bool empty() const { return bits_.none(); }

 private:
  std::bitset<kEventTypeCount> bits_;
};

struct EventRecord {
  EventType type;
  std::string user_id;
  std::string repo_id;
  Timestamp timestamp;

  bool operator==(const EventRecord&) const = default;
};

/// Strict "YYYY-MM-DDTHH:MM:SSZ".
std::optional<Timestamp> parse_utc(std::string_view text);
std::string format_utc(Timestamp t);

struct MalformedLine {
  std::size_t line_no;  // 1-based
  std::string reason;
};

struct ParseResult {
  std::vector<EventRecord> records;
  std::vector<MalformedLine> errors;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads line-delimited event objects. Bad lines are collected in
/// ParseResult::errors; a failing stream throws IoError.
ParseResult parse_events(std::istream& in);
ParseResult parse_events_file(const std::string& path);
/// One `{"type":"WatchEvent","actor":...,"repo":...,"created_at":...}` object per line.
void write_events_jsonl(std::ostream& out, std::span<const EventRecord> events);

std::vector<EventRecord> filter_events(std::span<const EventRecord> events, const EventTypeSet& keep);

struct TimeGrid {
  Timestamp start;
  int window_days = 10;
  int num_windows = 1;

  std::chrono::seconds window_length() const { return std::chrono::days{window_days}; }
  Timestamp window_start(int w) const { return start + window_length() * w; }
  Timestamp end() const { return window_start(num_windows); }

  /// Half-open windows: an instant exactly on a boundary belongs to the later window.
  std::optional<int> window_of(Timestamp t) const;

  bool operator==(const TimeGrid&) const = default;
};

/// Smallest grid starting at midnight UTC of the earliest event that covers all events.
TimeGrid grid_covering(std::span<const EventRecord> events, int window_days);

class CountPanel {
 public:
  CountPanel() = default;
  CountPanel(std::vector<std::string> repo_ids, TimeGrid grid);

  std::size_t rows() const { return repo_ids_.size(); }
  std::size_t cols() const { return static_cast<std::size_t>(grid_.num_windows); }

  const std::vector<std::string>& repo_ids() const { return repo_ids_; }
  const TimeGrid& grid() const { return grid_; }

  std::int64_t& at(std::size_t r, std::size_t t) { return counts_[r * cols() + t]; }
  std::int64_t at(std::size_t r, std::size_t t) const { return counts_[r * cols() + t]; }
  std::span<const std::int64_t> row(std::size_t r) const { return {counts_.data() + r * cols(), cols()}; }

  std::int64_t row_total(std::size_t r) const;
  std::int64_t total() const;

  /// Cell-wise addition; shapes and repo order must match.
  CountPanel& operator+=(const CountPanel& other);
  bool operator==(const CountPanel&) const = default;

 private:
  std::vector<std::string> repo_ids_;
  TimeGrid grid_{};
  std::vector<std::int64_t> counts_;
};

class EventOutOfRange : public std::out_of_range {
 public:
  explicit EventOutOfRange(Timestamp t);
  Timestamp timestamp;
};

struct BinResult {
  CountPanel panel;
  std::size_t discarded = 0;  // events whose repo is not tracked
};

BinResult bin_events(std::span<const EventRecord> events, const TimeGrid& grid,
                     const std::vector<std::string>& repos);

/// Sorted distinct repo ids appearing in `events`.
std::vector<std::string> distinct_repos(std::span<const EventRecord> events);

// CSV: header `repo_id,w0,w1,...`, one integer row per repository.
void write_panel_csv(std::ostream& out, const CountPanel& panel);
/// Window metadata is not part of the CSV; the caller supplies the grid start and width.
CountPanel read_panel_csv(std::istream& in, Timestamp start = {}, int window_days = 10);

}  // namespace repopulse
