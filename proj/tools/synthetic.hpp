#pragma once

// Coupled count generator for the LSTM vs ARIMA benchmark.
//
// Each component c has a latent AR(1) driver z_c. Repo r belongs to
// component r % C, follows its driver with a lag in {0, 1, 2} windows and
// adds its own AR(1) noise u_r:
//   log rate_r(t) = log base_r + coupling * z_c(t - lag_r) + (1 - coupling) * u_r(t)
// Counts are Poisson draws, emitted as Watch events by users drawn from a
// per-component pool so the interaction graph mirrors the latent grouping.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "repopulse/ingest.hpp"

namespace repopulse::cli {

struct SyntheticSpec {
  int repos = 10;
  int windows = 120;
  int components = 3;
  double coupling = 0.8;
  double base_rate = 30.0;
  int window_days = 10;
  double driver_phi = 0.5;
  double driver_sigma = 0.8;
  double noise_phi = 0.5;
  double noise_sigma = 0.5;
  int max_lag = 2;
  int users_per_component = 40;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  std::vector<EventRecord> events;  // sorted by timestamp
  std::vector<std::string> repo_ids;
  TimeGrid grid;
  Eigen::MatrixXd rates;  // repos x windows, Poisson means
  std::vector<int> lags;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace repopulse::cli
