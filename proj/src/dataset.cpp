#include "repopulse/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace repopulse {

CountPanel select_top_k(const CountPanel& panel, std::size_t k) {
  if (k > panel.rows()) throw std::invalid_argument("select_top_k: k exceeds repo count");
  std::vector<std::size_t> order(panel.rows());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::int64_t> totals(panel.rows());
  for (std::size_t r = 0; r < panel.rows(); ++r) totals[r] = panel.row_total(r);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (totals[a] != totals[b]) return totals[a] > totals[b];
    return panel.repo_ids()[a] < panel.repo_ids()[b];
  });
  order.resize(k);

  std::vector<std::string> ids;
  for (auto r : order) ids.push_back(panel.repo_ids()[r]);
  CountPanel out(std::move(ids), panel.grid());
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t t = 0; t < panel.cols(); ++t) out.at(i, t) = panel.at(order[i], t);
  }
  return out;
}

Eigen::MatrixXd Scaler::transform(const Eigen::MatrixXd& raw) const {
  return (raw.colwise() - mean).array().colwise() / stddev.array();
}

Eigen::MatrixXd Scaler::inverse(const Eigen::MatrixXd& standardized) const {
  return (standardized.array().colwise() * stddev.array()).matrix().colwise() + mean;
}

Eigen::MatrixXd to_matrix(const CountPanel& panel) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(panel.rows()), static_cast<Eigen::Index>(panel.cols()));
  for (std::size_t r = 0; r < panel.rows(); ++r) {
    for (std::size_t t = 0; t < panel.cols(); ++t) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) = static_cast<double>(panel.at(r, t));
    }
  }
  return m;
}

namespace {

Standardized standardize_rows(const Eigen::MatrixXd& raw, int train_window_count,
                              const std::vector<std::string>* names) {
  if (train_window_count < 2 || train_window_count > raw.cols()) {
    throw std::invalid_argument("standardize: train_window_count must be in [2, T]");
  }
  Standardized out;
  const auto train = raw.leftCols(train_window_count);
  out.scaler.mean = train.rowwise().mean();
  out.scaler.stddev.resize(raw.rows());
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    const double var = (train.row(r).array() - out.scaler.mean(r)).square().mean();
    double sd = std::sqrt(var);
    if (sd < Scaler::kStdFloor) {
      const std::string who = names ? "repo " + (*names)[static_cast<std::size_t>(r)] : "row " + std::to_string(r);
      out.warnings.push_back(who + " is constant over the training span; std floored");
      sd = Scaler::kStdFloor;
    }
    out.scaler.stddev(r) = sd;
  }
  out.values = out.scaler.transform(raw);
  return out;
}

}  // namespace

Standardized standardize(const Eigen::MatrixXd& raw, int train_window_count) {
  return standardize_rows(raw, train_window_count, nullptr);
}

Standardized standardize(const CountPanel& panel, int train_window_count) {
  return standardize_rows(to_matrix(panel), train_window_count, &panel.repo_ids());
}

Eigen::MatrixXd input_window(const Eigen::MatrixXd& standardized, const Eigen::MatrixXd& comp_features,
                             int first_window, int loopback) {
  const Eigen::Index repos = standardized.rows();
  Eigen::MatrixXd in(loopback, 2 * repos);
  in.leftCols(repos) = standardized.middleCols(first_window, loopback).transpose();
  in.rightCols(repos) = comp_features.middleCols(first_window, loopback).transpose();
  return in;
}

std::vector<SequenceSample> build_sequences(const Eigen::MatrixXd& standardized, const Eigen::MatrixXd& comp_features,
                                            int loopback) {
  if (loopback < 1) throw std::invalid_argument("loop-back must be at least 1");
  if (standardized.rows() != comp_features.rows() || standardized.cols() != comp_features.cols()) {
    throw std::invalid_argument("count and component matrices differ in shape");
  }
  const auto windows = static_cast<int>(standardized.cols());
  if (windows < loopback + 1) {
    throw SeriesTooShort("need at least " + std::to_string(loopback + 1) + " windows, have " +
                         std::to_string(windows));
  }
  std::vector<SequenceSample> samples;
  samples.reserve(static_cast<std::size_t>(windows - loopback));
  for (int j = 0; j + loopback < windows; ++j) {
    SequenceSample s;
    s.inputs = input_window(standardized, comp_features, j, loopback);
    s.target = standardized.col(j + loopback);
    s.first_window = j;
    s.target_window = j + loopback;
    if (!s.inputs.allFinite() || !s.target.allFinite()) {
      throw std::invalid_argument("non-finite value in sample " + std::to_string(j));
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

std::size_t train_count(std::size_t n, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split ratio must lie in (0, 1)");
  // Guard against 0.8 * 10 landing a hair above 8.
  const auto k = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
  return std::min(n, k);
}

Split split_train_val(std::vector<SequenceSample> samples, double ratio) {
  const std::size_t k = train_count(samples.size(), ratio);
  Split split;
  split.validation.assign(std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(k)),
                          std::make_move_iterator(samples.end()));
  samples.resize(k);
  split.train = std::move(samples);
  if (split.validation.empty()) split.warnings.emplace_back("validation split is empty");
  return split;
}

void write_manifest_csv(std::ostream& out, const Split& split) {
  out << "sample_index,first_window,target_window,split\n";
  std::size_t i = 0;
  for (const auto& s : split.train) out << i++ << ',' << s.first_window << ',' << s.target_window << ",train\n";
  for (const auto& s : split.validation) {
    out << i++ << ',' << s.first_window << ',' << s.target_window << ",validation\n";
  }
}

}  // namespace repopulse
