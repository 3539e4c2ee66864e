#pragma once

// End-to-end forecasting runs on a count matrix: the LSTM with
// cross-repository inputs and the per-series ARIMA baseline, both scored on
// the same evaluation windows with one-step-ahead forecasts from actual
// history.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "repopulse/arima.hpp"
#include "repopulse/dataset.hpp"
#include "repopulse/lstm.hpp"

namespace repopulse {

struct ForecastSetup {
  int loopback = 8;
  double split_ratio = 0.8;
  // Trailing share of windows held out for evaluation. Zero means the
  // validation targets are the evaluation windows.
  double holdout_fraction = 0.2;
  std::vector<int> hidden_sizes{16, 16};
  lstm::TrainConfig train;
  std::uint64_t seed = 1;
  arima::OrderBounds arima_bounds;
};

/// Number of trailing windows held out (at least one when fraction > 0).
int holdout_windows(int total_windows, double fraction);

struct LstmRun {
  lstm::Model model;
  lstm::TrainingHistory history;
  Split split;
  std::vector<int> eval_windows;
  Eigen::MatrixXd predicted;               // repos x eval windows, counts
  Eigen::MatrixXd predicted_standardized;  // same, before de-standardization and clamping
  Eigen::MatrixXd actual_standardized;
  std::vector<std::string> warnings;
};

/// counts and comp_features are repos x windows.
LstmRun run_lstm(const Eigen::MatrixXd& counts, const Eigen::MatrixXd& comp_features, const ForecastSetup& setup);

struct ArimaRun {
  std::vector<arima::SeriesFit> fits;
  std::vector<int> eval_windows;
  Eigen::MatrixXd predicted;  // repos x eval windows, counts
};

/// Fits each repo on the windows before the holdout, then rolls forward.
/// A repo whose fit failed falls back to its last observed value.
ArimaRun run_arima(const Eigen::MatrixXd& counts, const ForecastSetup& setup,
                   kernels::Exec exec = kernels::Exec::Parallel);

Eigen::MatrixXd columns(const Eigen::MatrixXd& m, const std::vector<int>& cols);

struct SweepRow {
  int loopback = 0;
  std::optional<double> rmse_total;  // count units, over the validation span
  std::string error;
};

/// Trains one model per loop-back with identical seeds and configuration.
/// A failing loop-back records its error and the sweep continues.
std::vector<SweepRow> sweep_loopback(const Eigen::MatrixXd& counts, const Eigen::MatrixXd& comp_features,
                                     const std::vector<int>& loopbacks, ForecastSetup setup,
                                     kernels::Exec exec = kernels::Exec::Parallel);

/// Loop-back with the lowest finite RMSE (ties to the smaller loop-back).
std::optional<int> best_loopback(const std::vector<SweepRow>& rows);

struct LoopbackChoice {
  int loopback = 0;
  std::vector<SweepRow> sweep;
};

/// Sweeps `loopbacks` on the windows before the holdout only (scored on their
/// validation targets) and returns the argmin. Throws when no loop-back works.
LoopbackChoice select_loopback(const Eigen::MatrixXd& counts, const Eigen::MatrixXd& comp_features,
                               const std::vector<int>& loopbacks, const ForecastSetup& setup,
                               kernels::Exec exec = kernels::Exec::Parallel);

// `loopback,rmse_total,status`
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace repopulse
