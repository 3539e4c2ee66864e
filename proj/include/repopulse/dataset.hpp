#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "repopulse/ingest.hpp"

namespace repopulse {

/// Keeps the k repos with the largest totals, ordered by descending total then id.
CountPanel select_top_k(const CountPanel& panel, std::size_t k);

/// Per-repo affine standardization fitted on a training span.
struct Scaler {
  static constexpr double kStdFloor = 1e-8;

  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;

  double transform(Eigen::Index r, double x) const { return (x - mean(r)) / stddev(r); }
  double inverse(Eigen::Index r, double z) const { return z * stddev(r) + mean(r); }
  Eigen::MatrixXd transform(const Eigen::MatrixXd& raw) const;
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& standardized) const;
  Eigen::Index size() const { return mean.size(); }
};

struct Standardized {
  Eigen::MatrixXd values;  // R x T
  Scaler scaler;
  std::vector<std::string> warnings;  // one per constant training row
};

Eigen::MatrixXd to_matrix(const CountPanel& panel);

/// Mean and population std over windows [0, train_window_count); the whole
/// panel is transformed. Constant rows get the floored std and a warning.
Standardized standardize(const CountPanel& panel, int train_window_count);
Standardized standardize(const Eigen::MatrixXd& raw, int train_window_count);

/// inputs is L x 2R: columns [0, R) standardized counts, [R, 2R) component
/// size-shares, both in panel row order. target is the standardized column
/// that follows the input windows.
struct SequenceSample {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd target;
  int first_window = 0;
  int target_window = 0;
};

class SeriesTooShort : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::vector<SequenceSample> build_sequences(const Eigen::MatrixXd& standardized, const Eigen::MatrixXd& comp_features,
                                            int loopback);

/// Input window ending just before `target_window`, laid out like SequenceSample::inputs.
Eigen::MatrixXd input_window(const Eigen::MatrixXd& standardized, const Eigen::MatrixXd& comp_features,
                             int first_window, int loopback);

struct Split {
  std::vector<SequenceSample> train;
  std::vector<SequenceSample> validation;
  std::vector<std::string> warnings;
};

/// Chronological: the first ceil(ratio * N) samples train, the rest validate.
Split split_train_val(std::vector<SequenceSample> samples, double ratio);
std::size_t train_count(std::size_t n, double ratio);

// `sample_index,first_window,target_window,split`
void write_manifest_csv(std::ostream& out, const Split& split);

}  // namespace repopulse
