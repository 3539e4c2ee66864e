#pragma once

// Stacked LSTM regressor trained from scratch with backpropagation through
// time. All repos are predicted jointly from one shared hidden state, which
// is how information from one repository reaches the forecast of another.

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "repopulse/dataset.hpp"
#include "repopulse/kernels.hpp"

namespace repopulse::lstm {

enum Gate : int { kInput = 0, kForget = 1, kCell = 2, kOutput = 3 };
inline constexpr int kGates = 4;

struct LayerParams {
  std::array<Eigen::MatrixXd, kGates> W;  // hidden x layer input
  std::array<Eigen::MatrixXd, kGates> U;  // hidden x hidden
  std::array<Eigen::VectorXd, kGates> b;

  Eigen::Index hidden() const { return U[0].rows(); }
  Eigen::Index inputs() const { return W[0].cols(); }
};

struct Readout {
  Eigen::MatrixXd W;  // repos x last hidden
  Eigen::VectorXd b;
};

/// Every trainable array. Also used for gradients and optimizer moments.
struct Parameters {
  std::vector<LayerParams> layers;
  Readout readout;

  /// Visits arrays in a fixed order: per layer W,U,b for gates i,f,g,o; then readout W,b.
  template <class F>
  void visit(F&& f) {
    for (auto& l : layers) {
      for (int g = 0; g < kGates; ++g) {
        f(l.W[g]);
        f(l.U[g]);
        f(l.b[g]);
      }
    }
    f(readout.W);
    f(readout.b);
  }
  template <class F>
  void visit(F&& f) const {
    const_cast<Parameters*>(this)->visit([&](auto& a) { f(std::as_const(a)); });
  }

  Parameters zeros_like() const;
  std::size_t count() const;
  /// Concatenation in visit order.
  Eigen::VectorXd flatten() const;
  void assign(const Eigen::VectorXd& flat);
};

struct Model {
  Parameters params;
  int loopback = 8;
  Scaler scaler;
  std::uint64_t seed = 0;

  Eigen::Index input_size() const { return params.layers.front().inputs(); }
  Eigen::Index outputs() const { return params.readout.W.rows(); }
  std::vector<int> hidden_sizes() const;
};

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)] where fan_in is the
/// matrix column count; biases zero except the forget gate at 1.0. The
/// scaler is identity until one is attached.
Model init_model(int repos, int features, const std::vector<int>& hidden_sizes, int loopback, std::uint64_t seed);

struct StepCache {
  Eigen::VectorXd x;  // layer input at this step
  Eigen::VectorXd i, f, g, o;
  Eigen::VectorXd c, tanh_c, h;
};

struct Cache {
  std::vector<std::vector<StepCache>> layers;  // [layer][step]
};

struct ForwardResult {
  Eigen::VectorXd prediction;
  Cache cache;
};

/// inputs: loopback x input_size, one row per step.
ForwardResult forward(const Model& model, const Eigen::MatrixXd& inputs);

double loss(const Eigen::VectorXd& prediction, const Eigen::VectorXd& target);
/// Weighted MSE: mean over repos of weight * squared error.
double loss(const Eigen::VectorXd& prediction, const Eigen::VectorXd& target, const Eigen::VectorXd& weights);

/// Exact gradient of the (optionally weighted) loss for one sample.
Parameters backward(const Model& model, const Cache& cache, const Eigen::VectorXd& prediction,
                    const Eigen::VectorXd& target, const Eigen::VectorXd* weights = nullptr);

struct TrainConfig {
  double learning_rate = 1e-2;
  int max_epochs = 1000;
  int patience = 100;
  double improvement_epsilon = 1e-6;
  int batch_size = 0;  // 0 = full batch
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  // Decoupled (AdamW-style) shrinkage per step: theta *= 1 - lr * weight_decay.
  double weight_decay = 0.0;
  std::uint64_t shuffle_seed = 0;
  kernels::Exec exec = kernels::Exec::Parallel;
};

struct TrainingHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = 0;
  int stopped_epoch = 0;
  bool early_stopped = false;
};

/// Tracks the best monitored loss. A loss counts as progress when it beats
/// the best by more than epsilon * |best|; `patience` epochs in a row
/// without progress trigger a stop. The best epoch is always the minimum.
class EarlyStopping {
 public:
  EarlyStopping(int patience, double epsilon);

  /// Returns true when `loss` is a new minimum.
  bool update(int epoch, double loss);
  bool should_stop() const { return stale_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_; }

 private:
  int patience_;
  double epsilon_;
  double best_;
  int best_epoch_ = -1;
  int stale_ = 0;
};

class NonFiniteLoss : public std::runtime_error {
 public:
  explicit NonFiniteLoss(int epoch);
  int epoch;
};

struct TrainResult {
  Model model;  // parameters from the best validation epoch
  TrainingHistory history;
};

/// Adam on MSE over standardized targets. Validation loss is monitored
/// after every epoch (training loss when the validation set is empty).
TrainResult train(Model model, const std::vector<SequenceSample>& train_set,
                  const std::vector<SequenceSample>& validation_set, const TrainConfig& config);

/// Mean loss of the model over a sample set.
double mean_loss(const Model& model, const std::vector<SequenceSample>& samples,
                 kernels::Exec exec = kernels::Exec::Parallel);

/// Forecast for the window after `window`, in count units, clamped at zero.
Eigen::VectorXd predict_next(const Model& model, const Eigen::MatrixXd& window);

using GradientFn = std::function<Parameters(const Model&, const Cache&, const Eigen::VectorXd& prediction,
                                            const Eigen::VectorXd& target)>;

/// Max over parameters of |analytic - numeric| / max(|analytic| + |numeric|, 1e-8)
/// with fourth-order central differences of step h.
double grad_check(const Model& model, const SequenceSample& sample, double h = 1e-3, const GradientFn& gradient = {});

}  // namespace repopulse::lstm
