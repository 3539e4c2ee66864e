#pragma once

// Subcommands of the repopulse tool. Each returns a process exit code:
// 0 success, 1 missing or unreadable input, 2 invalid data or configuration
// (and, for ingest, any malformed input line).

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "config.hpp"
#include "repopulse/eval.hpp"
#include "repopulse/forecast.hpp"

namespace repopulse::cli {

class MissingInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

int cmd_ingest(const RunConfig& config, std::ostream& log);
int cmd_train(const RunConfig& config, std::ostream& log);
int cmd_fit_arima(const RunConfig& config, std::ostream& log);
int cmd_evaluate(const RunConfig& config, std::ostream& log);
int cmd_segment(const RunConfig& config, std::ostream& log);
int cmd_sweep(const RunConfig& config, std::ostream& log);
int cmd_bench_synthetic(const RunConfig& config, std::ostream& log);
/// Writes the synthetic corpus as `events.jsonl`.
int cmd_generate(const RunConfig& config, std::ostream& log);

ForecastSetup forecast_setup(const RunConfig& config);
struct SyntheticSpec;
SyntheticSpec synthetic_spec(const RunConfig& config);

struct BenchResult {
  ComparisonReport report;               // count units
  ComparisonReport report_standardized;  // both models on the LSTM's scale
  double lstm_total = 0.0;
  double arima_total = 0.0;
  std::vector<std::string> repo_ids;
  std::vector<arima::SeriesFit> fits;
  LoopbackChoice loopback;  // chosen on the fitting span, before the holdout
};

/// Generates the coupled synthetic corpus for `config.seed`, picks the LSTM
/// loop-back from `config.loopbacks` on the fitting span and scores both
/// models on the same holdout windows.
BenchResult run_bench(const RunConfig& config);

/// Repos x windows matrix of reals: header `repo_id,w<index>,...`.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m, const std::vector<std::string>& repo_ids,
                      const std::vector<int>& windows);
struct LabeledMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> repo_ids;
  std::vector<std::string> column_labels;
};
LabeledMatrix read_matrix_csv(std::istream& in);

}  // namespace repopulse::cli
