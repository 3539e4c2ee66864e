#pragma once

// Data-parallel kernels. Each kernel has a serial reference path and an
// OpenMP path selected by Exec; both produce bit-identical results, which
// tests/test_kernels.cpp checks and bench/ times.

#include <cstddef>
#include <exception>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "repopulse/ingest.hpp"

namespace repopulse::kernels {

enum class Exec { Serial, Parallel };

/// Applies REPOPULSE_THREADS (if set) as the OpenMP thread cap.
void apply_thread_cap_from_env();
void set_thread_cap(int threads);
int thread_cap();

/// Runs f(i) for i in [0, n). The first exception thrown by any index is
/// rethrown after the loop finishes.
template <class F>
void for_each_index(std::size_t n, F&& f, Exec exec) {
  if (exec == Exec::Serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < count; ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Adds every in-grid event of a tracked repo to `panel` and returns the
/// number of events whose repo is not in the panel. The parallel path
/// splits events into shards with private panels merged by cell addition.
std::size_t bin_counts(std::span<const EventRecord> events, CountPanel& panel, Exec exec);

/// Index of the nearest center (squared Euclidean, ties to the lower index)
/// for every row of `points`. Optionally returns the squared distances.
std::vector<int> nearest_centers(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers, Exec exec,
                                 std::vector<double>* sq_dist = nullptr);

}  // namespace repopulse::kernels
