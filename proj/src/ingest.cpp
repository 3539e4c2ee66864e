#include "repopulse/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "repopulse/kernels.hpp"

namespace repopulse {

namespace {

constexpr std::array<std::string_view, kEventTypeCount> kEventNames = {
    "CommitComment", "Create", "Delete",  "Fork",        "Gollum",
    "IssueComment",  "Issues", "Member",  "Public",      "PullRequest",
    "PullRequestReviewComment", "Push", "Release", "Watch",
};

bool parse_fixed_int(std::string_view s, int& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

std::string_view to_string(EventType type) { return kEventNames[static_cast<std::size_t>(type)]; }

std::optional<EventType> parse_event_type(std::string_view name) {
  if (name.size() > 5 && name.ends_with("Event")) name.remove_suffix(5);
  // The archive calls it IssuesEvent; the singular spelling is also seen.
  if (name == "Issue") name = "Issues";
  for (std::size_t i = 0; i < kEventNames.size(); ++i) {
    if (kEventNames[i] == name) return static_cast<EventType>(i);
  }
  return std::nullopt;
}

EventTypeSet::EventTypeSet(std::initializer_list<EventType> types) {
  for (auto t : types) insert(t);
}

EventTypeSet EventTypeSet::all() {
  EventTypeSet s;
  s.bits_.set();
  return s;
}

std::optional<Timestamp> parse_utc(std::string_view text) {
  // 2015-01-03T00:00:00Z
  if (text.size() != 20) return std::nullopt;
  if (text[4] != '-' || text[7] != '-' || text[10] != 'T' || text[13] != ':' || text[16] != ':' ||
      text[19] != 'Z') {
    return std::nullopt;
  }
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (!parse_fixed_int(text.substr(0, 4), y) || !parse_fixed_int(text.substr(5, 2), mo) ||
      !parse_fixed_int(text.substr(8, 2), d) || !parse_fixed_int(text.substr(11, 2), h) ||
      !parse_fixed_int(text.substr(14, 2), mi) || !parse_fixed_int(text.substr(17, 2), s)) {
    return std::nullopt;
  }
  using namespace std::chrono;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

std::string format_utc(Timestamp t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

namespace {

std::optional<std::string> string_field(const nlohmann::json& obj, const char* key, std::string& reason) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    reason = std::string("missing field '") + key + "'";
    return std::nullopt;
  }
  if (!it->is_string()) {
    reason = std::string("field '") + key + "' is not a string";
    return std::nullopt;
  }
  return it->get<std::string>();
}

std::optional<EventRecord> parse_line(std::string_view line, std::string& reason) {
  nlohmann::json obj = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (obj.is_discarded()) {
    reason = "not valid JSON";
    return std::nullopt;
  }
  if (!obj.is_object()) {
    reason = "record is not an object";
    return std::nullopt;
  }
  auto type = string_field(obj, "type", reason);
  if (!type) return std::nullopt;
  auto actor = string_field(obj, "actor", reason);
  if (!actor) return std::nullopt;
  auto repo = string_field(obj, "repo", reason);
  if (!repo) return std::nullopt;
  auto created = string_field(obj, "created_at", reason);
  if (!created) return std::nullopt;

  auto et = parse_event_type(*type);
  if (!et) {
    reason = "unknown event type '" + *type + "'";
    return std::nullopt;
  }
  auto ts = parse_utc(*created);
  if (!ts) {
    reason = "bad timestamp '" + *created + "'";
    return std::nullopt;
  }
  if (actor->empty() || repo->empty()) {
    reason = "empty actor or repo";
    return std::nullopt;
  }
  return EventRecord{*et, std::move(*actor), std::move(*repo), *ts};
}

}  // namespace

ParseResult parse_events(std::istream& in) {
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::string reason;
    if (auto rec = parse_line(line, reason)) {
      result.records.push_back(std::move(*rec));
    } else {
      result.errors.push_back({line_no, std::move(reason)});
    }
  }
  if (in.bad()) throw IoError("read failure after line " + std::to_string(line_no));
  return result;
}

ParseResult parse_events_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return parse_events(in);
}

void write_events_jsonl(std::ostream& out, std::span<const EventRecord> events) {
  for (const auto& e : events) {
    nlohmann::ordered_json j;
    j["type"] = std::string(to_string(e.type)) + "Event";
    j["actor"] = e.user_id;
    j["repo"] = e.repo_id;
    j["created_at"] = format_utc(e.timestamp);
    out << j.dump() << '\n';
  }
}

std::vector<EventRecord> filter_events(std::span<const EventRecord> events, const EventTypeSet& keep) {
  std::vector<EventRecord> out;
  std::copy_if(events.begin(), events.end(), std::back_inserter(out),
               [&](const EventRecord& e) { return keep.contains(e.type); });
  return out;
}

std::optional<int> TimeGrid::window_of(Timestamp t) const {
  if (t < start) return std::nullopt;
  const auto w = (t - start) / window_length();
  if (w >= num_windows) return std::nullopt;
  return static_cast<int>(w);
}

TimeGrid grid_covering(std::span<const EventRecord> events, int window_days) {
  if (window_days <= 0) throw std::invalid_argument("window_days must be positive");
  TimeGrid grid;
  grid.window_days = window_days;
  if (events.empty()) {
    grid.start = Timestamp{};
    grid.num_windows = 1;
    return grid;
  }
  auto [lo, hi] = std::minmax_element(events.begin(), events.end(), [](const auto& a, const auto& b) {
    return a.timestamp < b.timestamp;
  });
  grid.start = std::chrono::floor<std::chrono::days>(lo->timestamp);
  grid.num_windows = static_cast<int>((hi->timestamp - grid.start) / grid.window_length()) + 1;
  return grid;
}

CountPanel::CountPanel(std::vector<std::string> repo_ids, TimeGrid grid)
    : repo_ids_(std::move(repo_ids)), grid_(grid), counts_(repo_ids_.size() * cols(), 0) {
  std::set<std::string> seen(repo_ids_.begin(), repo_ids_.end());
  if (seen.size() != repo_ids_.size()) throw std::invalid_argument("duplicate repo id in panel");
}

std::int64_t CountPanel::row_total(std::size_t r) const {
  auto row_span = row(r);
  return std::accumulate(row_span.begin(), row_span.end(), std::int64_t{0});
}

std::int64_t CountPanel::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0}); }

CountPanel& CountPanel::operator+=(const CountPanel& other) {
  if (other.repo_ids_ != repo_ids_ || !(other.grid_ == grid_)) {
    throw std::invalid_argument("panel shapes differ");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

EventOutOfRange::EventOutOfRange(Timestamp t)
    : std::out_of_range("event at " + format_utc(t) + " lies outside the time grid"), timestamp(t) {}

BinResult bin_events(std::span<const EventRecord> events, const TimeGrid& grid,
                     const std::vector<std::string>& repos) {
  if (repos.empty()) throw std::invalid_argument("bin_events needs at least one repo");
  for (const auto& e : events) {
    if (!grid.window_of(e.timestamp)) throw EventOutOfRange(e.timestamp);
  }
  BinResult result{CountPanel(repos, grid), 0};
  result.discarded = kernels::bin_counts(events, result.panel, kernels::Exec::Parallel);
  return result;
}

std::vector<std::string> distinct_repos(std::span<const EventRecord> events) {
  std::set<std::string> ids;
  for (const auto& e : events) ids.insert(e.repo_id);
  return {ids.begin(), ids.end()};
}

void write_panel_csv(std::ostream& out, const CountPanel& panel) {
  out << "repo_id";
  for (std::size_t t = 0; t < panel.cols(); ++t) out << ",w" << t;
  out << '\n';
  for (std::size_t r = 0; r < panel.rows(); ++r) {
    out << panel.repo_ids()[r];
    for (auto v : panel.row(r)) out << ',' << v;
    out << '\n';
  }
}

CountPanel read_panel_csv(std::istream& in, Timestamp start, int window_days) {
  std::string line;
  if (!std::getline(in, line) || !line.starts_with("repo_id")) {
    throw std::runtime_error("panel CSV: missing 'repo_id,...' header");
  }
  const auto num_windows = static_cast<int>(std::count(line.begin(), line.end(), ','));
  std::vector<std::string> ids;
  std::vector<std::vector<std::int64_t>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    ids.push_back(cell);
    auto& row = rows.emplace_back();
    while (std::getline(ss, cell, ',')) {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size() || v < 0) {
        throw std::runtime_error("panel CSV: bad count '" + cell + "' for repo " + ids.back());
      }
      row.push_back(v);
    }
    if (static_cast<int>(row.size()) != num_windows) {
      throw std::runtime_error("panel CSV: row width mismatch for repo " + ids.back());
    }
  }
  CountPanel panel(std::move(ids), TimeGrid{start, window_days, std::max(num_windows, 1)});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t t = 0; t < rows[r].size(); ++t) panel.at(r, t) = rows[r][t];
  }
  return panel;
}

}  // namespace repopulse
