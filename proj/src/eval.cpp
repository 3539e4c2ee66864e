#include "repopulse/eval.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace repopulse {

void EvaluationPanel::validate() const {
  if (actual.rows() != predicted.rows() || actual.cols() != predicted.cols()) {
    throw std::invalid_argument("actual and predicted panels differ in shape");
  }
  if (!actual.allFinite() || !predicted.allFinite()) throw std::invalid_argument("evaluation panel has non-finite cells");
}

double rmse_r(const EvaluationPanel& panel, Eigen::Index r) {
  panel.validate();
  if (r < 0 || r >= panel.actual.rows()) throw std::out_of_range("repo row out of range");
  return std::sqrt((panel.actual.row(r) - panel.predicted.row(r)).squaredNorm() /
                   static_cast<double>(panel.actual.cols()));
}

double rmse_t(const EvaluationPanel& panel, Eigen::Index t) {
  panel.validate();
  if (t < 0 || t >= panel.actual.cols()) throw std::out_of_range("window column out of range");
  return std::sqrt((panel.actual.col(t) - panel.predicted.col(t)).squaredNorm() /
                   static_cast<double>(panel.actual.rows()));
}

double rmse_total(const EvaluationPanel& panel) {
  panel.validate();
  return std::sqrt((panel.actual - panel.predicted).squaredNorm() / static_cast<double>(panel.actual.size()));
}

ComparisonReport compare(const std::vector<NamedPrediction>& models, const Eigen::MatrixXd& actual,
                         const std::vector<std::string>& repo_ids, const std::vector<std::string>& window_labels) {
  ComparisonReport report;
  report.repo_ids = repo_ids;
  report.window_labels = window_labels;
  for (const auto& m : models) {
    EvaluationPanel panel{actual, m.predicted, repo_ids, window_labels};
    try {
      panel.validate();
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("model '" + m.model + "': " + e.what());
    }
    ModelScores s;
    s.model = m.model;
    s.total = rmse_total(panel);
    for (Eigen::Index t = 0; t < actual.cols(); ++t) s.per_window.push_back(rmse_t(panel, t));
    for (Eigen::Index r = 0; r < actual.rows(); ++r) s.per_repo.push_back(rmse_r(panel, r));
    report.models.push_back(std::move(s));
  }
  if (report.models.size() < 2) return report;

  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  auto pick = [&](const std::string& metric, auto score) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < report.models.size(); ++i) {
      if (score(report.models[i]) < score(report.models[best])) best = i;
    }
    report.winners[metric] = report.models[best].model;
  };
  pick("rmse_total", [](const ModelScores& s) { return s.total; });
  pick("rmse_t_mean", [&](const ModelScores& s) { return mean(s.per_window); });
  pick("rmse_r_mean", [&](const ModelScores& s) { return mean(s.per_repo); });
  return report;
}

void write_report_csv(std::ostream& out, const ComparisonReport& report, const std::string& metric_prefix) {
  const auto precision = out.precision(17);
  out << "metric,model,index,value\n";
  for (const auto& s : report.models) {
    out << metric_prefix << "rmse_total," << s.model << ",," << s.total << '\n';
    for (std::size_t t = 0; t < s.per_window.size(); ++t) {
      const std::string label = t < report.window_labels.size() ? report.window_labels[t] : std::to_string(t);
      out << metric_prefix << "rmse_t," << s.model << ',' << label << ',' << s.per_window[t] << '\n';
    }
    for (std::size_t r = 0; r < s.per_repo.size(); ++r) {
      const std::string id = r < report.repo_ids.size() ? report.repo_ids[r] : std::to_string(r);
      out << metric_prefix << "rmse_r," << s.model << ',' << id << ',' << s.per_repo[r] << '\n';
    }
  }
  out.precision(precision);
}

void write_winners_csv(std::ostream& out, const ComparisonReport& report) {
  out << "metric,winner\n";
  for (const auto& [metric, model] : report.winners) out << metric << ',' << model << '\n';
}

}  // namespace repopulse
