#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace repopulse {

/// Actual and predicted counts, repos x windows.
struct EvaluationPanel {
  Eigen::MatrixXd actual;
  Eigen::MatrixXd predicted;
  std::vector<std::string> repo_ids;
  std::vector<std::string> window_labels;

  /// Throws std::invalid_argument on shape mismatch or non-finite cells.
  void validate() const;
};

/// Error over time for one repository.
double rmse_r(const EvaluationPanel& panel, Eigen::Index r);
/// Error across repositories at one window.
double rmse_t(const EvaluationPanel& panel, Eigen::Index t);
/// Pooled error over every cell.
double rmse_total(const EvaluationPanel& panel);

struct ModelScores {
  std::string model;
  double total = 0.0;
  std::vector<double> per_window;  // rmse_t
  std::vector<double> per_repo;    // rmse_r
};

struct ComparisonReport {
  std::vector<ModelScores> models;
  // metric -> winning model; empty when fewer than two models are compared.
  // Metrics: rmse_total, rmse_t_mean, rmse_r_mean.
  std::map<std::string, std::string> winners;
  std::vector<std::string> repo_ids;
  std::vector<std::string> window_labels;
};

struct NamedPrediction {
  std::string model;
  Eigen::MatrixXd predicted;
};

ComparisonReport compare(const std::vector<NamedPrediction>& models, const Eigen::MatrixXd& actual,
                         const std::vector<std::string>& repo_ids, const std::vector<std::string>& window_labels);

// `metric,model,index,value` where index is a repo id for rmse_r, a window
// label for rmse_t and empty for rmse_total.
void write_report_csv(std::ostream& out, const ComparisonReport& report, const std::string& metric_prefix = "");
// `metric,winner`
void write_winners_csv(std::ostream& out, const ComparisonReport& report);

}  // namespace repopulse
