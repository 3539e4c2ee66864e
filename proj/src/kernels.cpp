#include "repopulse/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <string>
#include <unordered_map>

#include <omp.h>

namespace repopulse::kernels {

void apply_thread_cap_from_env() {
  if (const char* env = std::getenv("REPOPULSE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) set_thread_cap(n);
  }
}

void set_thread_cap(int threads) { omp_set_num_threads(threads < 1 ? 1 : threads); }

int thread_cap() { return omp_get_max_threads(); }

namespace {

using RepoIndex = std::unordered_map<std::string_view, std::size_t>;

RepoIndex index_repos(const CountPanel& panel) {
  RepoIndex index;
  for (std::size_t r = 0; r < panel.rows(); ++r) index.emplace(panel.repo_ids()[r], r);
  return index;
}

std::size_t bin_range(std::span<const EventRecord> events, const RepoIndex& index, CountPanel& panel) {
  std::size_t discarded = 0;
  for (const auto& e : events) {
    auto w = panel.grid().window_of(e.timestamp);
    if (!w) continue;
    auto it = index.find(e.repo_id);
    if (it == index.end()) {
      ++discarded;
      continue;
    }
    ++panel.at(it->second, static_cast<std::size_t>(*w));
  }
  return discarded;
}

}  // namespace

std::size_t bin_counts(std::span<const EventRecord> events, CountPanel& panel, Exec exec) {
  const auto index = index_repos(panel);
  if (exec == Exec::Serial) return bin_range(events, index, panel);

  const std::size_t shards = static_cast<std::size_t>(std::max(4, thread_cap()));
  const std::size_t chunk = (events.size() + shards - 1) / shards;
  std::vector<CountPanel> partial(shards, CountPanel(panel.repo_ids(), panel.grid()));
  std::vector<std::size_t> discarded(shards, 0);
  for_each_index(
      shards,
      [&](std::size_t s) {
        const std::size_t lo = std::min(events.size(), s * chunk);
        const std::size_t hi = std::min(events.size(), lo + chunk);
        discarded[s] = bin_range(events.subspan(lo, hi - lo), index, partial[s]);
      },
      Exec::Parallel);
  std::size_t total_discarded = 0;
  for (std::size_t s = 0; s < shards; ++s) {
    panel += partial[s];
    total_discarded += discarded[s];
  }
  return total_discarded;
}

std::vector<int> nearest_centers(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers, Exec exec,
                                 std::vector<double>* sq_dist) {
  const auto n = static_cast<std::size_t>(points.rows());
  std::vector<int> label(n, 0);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  for_each_index(
      n,
      [&](std::size_t i) {
        for (Eigen::Index c = 0; c < centers.rows(); ++c) {
          const double d = (points.row(static_cast<Eigen::Index>(i)) - centers.row(c)).squaredNorm();
          if (d < best[i]) {
            best[i] = d;
            label[i] = static_cast<int>(c);
          }
        }
      },
      exec);
  if (sq_dist) *sq_dist = std::move(best);
  return label;
}

}  // namespace repopulse::kernels
