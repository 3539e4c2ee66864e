#include "repopulse/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace repopulse::lstm {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void fill_uniform(Eigen::MatrixXd& m, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = (2.0 * uniform01(rng) - 1.0) * s;
  }
}

Eigen::VectorXd sigmoid(const Eigen::VectorXd& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

}  // namespace

Parameters Parameters::zeros_like() const {
  Parameters z = *this;
  z.visit([](auto& a) { a.setZero(); });
  return z;
}

std::size_t Parameters::count() const {
  std::size_t n = 0;
  visit([&](const auto& a) { n += static_cast<std::size_t>(a.size()); });
  return n;
}

Eigen::VectorXd Parameters::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(count()));
  Eigen::Index at = 0;
  visit([&](const auto& a) {
    flat.segment(at, a.size()) = Eigen::Map<const Eigen::VectorXd>(a.data(), a.size());
    at += a.size();
  });
  return flat;
}

void Parameters::assign(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(count())) throw ShapeMismatch("flat parameter size mismatch");
  Eigen::Index at = 0;
  visit([&](auto& a) {
    Eigen::Map<Eigen::VectorXd>(a.data(), a.size()) = flat.segment(at, a.size());
    at += a.size();
  });
}

std::vector<int> Model::hidden_sizes() const {
  std::vector<int> sizes;
  for (const auto& l : params.layers) sizes.push_back(static_cast<int>(l.hidden()));
  return sizes;
}

Model init_model(int repos, int features, const std::vector<int>& hidden_sizes, int loopback, std::uint64_t seed) {
  if (hidden_sizes.empty()) throw std::invalid_argument("need at least one hidden layer");
  if (repos < 1 || features < 1 || loopback < 1) throw std::invalid_argument("model dimensions must be positive");
  for (int h : hidden_sizes) {
    if (h < 1) throw std::invalid_argument("hidden sizes must be positive");
  }
  std::mt19937_64 rng(seed);
  Model model;
  model.loopback = loopback;
  model.seed = seed;
  int fan_in = features;
  for (int h : hidden_sizes) {
    LayerParams layer;
    for (int g = 0; g < kGates; ++g) {
      layer.W[g].resize(h, fan_in);
      layer.U[g].resize(h, h);
      fill_uniform(layer.W[g], rng);
      fill_uniform(layer.U[g], rng);
      layer.b[g] = Eigen::VectorXd::Constant(h, g == kForget ? 1.0 : 0.0);
    }
    model.params.layers.push_back(std::move(layer));
    fan_in = h;
  }
  model.params.readout.W.resize(repos, fan_in);
  fill_uniform(model.params.readout.W, rng);
  model.params.readout.b = Eigen::VectorXd::Zero(repos);
  model.scaler.mean = Eigen::VectorXd::Zero(repos);
  model.scaler.stddev = Eigen::VectorXd::Ones(repos);
  return model;
}

ForwardResult forward(const Model& model, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != model.loopback || inputs.cols() != model.input_size()) {
    throw ShapeMismatch("input window is " + std::to_string(inputs.rows()) + "x" + std::to_string(inputs.cols()) +
                        ", model expects " + std::to_string(model.loopback) + "x" +
                        std::to_string(model.input_size()));
  }
  const auto steps = static_cast<std::size_t>(model.loopback);
  ForwardResult out;
  out.cache.layers.resize(model.params.layers.size());

  for (std::size_t l = 0; l < model.params.layers.size(); ++l) {
    const auto& p = model.params.layers[l];
    auto& cache = out.cache.layers[l];
    cache.resize(steps);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(p.hidden());
    Eigen::VectorXd c = Eigen::VectorXd::Zero(p.hidden());
    for (std::size_t t = 0; t < steps; ++t) {
      auto& s = cache[t];
      s.x = l == 0 ? Eigen::VectorXd(inputs.row(static_cast<Eigen::Index>(t)).transpose())
                   : out.cache.layers[l - 1][t].h;
      s.i = sigmoid(p.W[kInput] * s.x + p.U[kInput] * h + p.b[kInput]);
      s.f = sigmoid(p.W[kForget] * s.x + p.U[kForget] * h + p.b[kForget]);
      s.g = (p.W[kCell] * s.x + p.U[kCell] * h + p.b[kCell]).array().tanh().matrix();
      s.o = sigmoid(p.W[kOutput] * s.x + p.U[kOutput] * h + p.b[kOutput]);
      s.c = s.f.cwiseProduct(c) + s.i.cwiseProduct(s.g);
      s.tanh_c = s.c.array().tanh().matrix();
      s.h = s.o.cwiseProduct(s.tanh_c);
      h = s.h;
      c = s.c;
    }
  }
  out.prediction = model.params.readout.W * out.cache.layers.back().back().h + model.params.readout.b;
  return out;
}

double loss(const Eigen::VectorXd& prediction, const Eigen::VectorXd& target) {
  if (prediction.size() != target.size()) throw ShapeMismatch("prediction and target lengths differ");
  return (prediction - target).squaredNorm() / static_cast<double>(prediction.size());
}

double loss(const Eigen::VectorXd& prediction, const Eigen::VectorXd& target, const Eigen::VectorXd& weights) {
  if (prediction.size() != target.size() || weights.size() != target.size()) {
    throw ShapeMismatch("prediction, target and weight lengths differ");
  }
  return weights.dot((prediction - target).cwiseAbs2()) / static_cast<double>(prediction.size());
}

Parameters backward(const Model& model, const Cache& cache, const Eigen::VectorXd& prediction,
                    const Eigen::VectorXd& target, const Eigen::VectorXd* weights) {
  if (target.size() != model.outputs() || prediction.size() != model.outputs()) {
    throw ShapeMismatch("target length does not match model outputs");
  }
  if (cache.layers.size() != model.params.layers.size()) throw ShapeMismatch("cache does not belong to this model");
  Parameters grad = model.params.zeros_like();
  const auto steps = static_cast<std::size_t>(model.loopback);

  Eigen::VectorXd dy = (2.0 / static_cast<double>(target.size())) * (prediction - target);
  if (weights) dy = dy.cwiseProduct(*weights);
  const auto& top_h = cache.layers.back().back().h;
  grad.readout.W = dy * top_h.transpose();
  grad.readout.b = dy;

  // Gradient w.r.t. each step's output of the layer above; only the last
  // step of the top layer feeds the readout.
  std::vector<Eigen::VectorXd> dh_from_above(steps, Eigen::VectorXd::Zero(top_h.size()));
  dh_from_above.back() = model.params.readout.W.transpose() * dy;

  for (std::size_t l = model.params.layers.size(); l-- > 0;) {
    const auto& p = model.params.layers[l];
    auto& gp = grad.layers[l];
    const auto& lc = cache.layers[l];
    const Eigen::Index hidden = p.hidden();
    Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(hidden);
    Eigen::VectorXd dc_next = Eigen::VectorXd::Zero(hidden);
    std::vector<Eigen::VectorXd> dx(steps);

    for (std::size_t t = steps; t-- > 0;) {
      const auto& s = lc[t];
      const Eigen::VectorXd h_prev = t > 0 ? lc[t - 1].h : Eigen::VectorXd::Zero(hidden);
      const Eigen::VectorXd c_prev = t > 0 ? lc[t - 1].c : Eigen::VectorXd::Zero(hidden);

      const Eigen::VectorXd dh = dh_from_above[t] + dh_next;
      const Eigen::ArrayXd o = s.o.array(), i = s.i.array(), f = s.f.array(), g = s.g.array();
      const Eigen::ArrayXd tc = s.tanh_c.array();
      const Eigen::ArrayXd dc = dh.array() * o * (1.0 - tc.square()) + dc_next.array();

      std::array<Eigen::VectorXd, kGates> da;
      da[kOutput] = (dh.array() * tc * o * (1.0 - o)).matrix();
      da[kForget] = (dc * c_prev.array() * f * (1.0 - f)).matrix();
      da[kInput] = (dc * g * i * (1.0 - i)).matrix();
      da[kCell] = (dc * i * (1.0 - g.square())).matrix();

      dx[t] = Eigen::VectorXd::Zero(p.inputs());
      dh_next = Eigen::VectorXd::Zero(hidden);
      for (int k = 0; k < kGates; ++k) {
        gp.W[k].noalias() += da[k] * s.x.transpose();
        gp.U[k].noalias() += da[k] * h_prev.transpose();
        gp.b[k] += da[k];
        dx[t].noalias() += p.W[k].transpose() * da[k];
        dh_next.noalias() += p.U[k].transpose() * da[k];
      }
      dc_next = (dc * f).matrix();
    }
    dh_from_above = std::move(dx);
  }
  return grad;
}

EarlyStopping::EarlyStopping(int patience, double epsilon)
    : patience_(patience), epsilon_(epsilon), best_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw std::invalid_argument("patience must be at least 1");
  if (epsilon < 0) throw std::invalid_argument("improvement epsilon must be non-negative");
}

bool EarlyStopping::update(int epoch, double loss_value) {
  const bool progress = best_epoch_ < 0 || best_ - loss_value > epsilon_ * std::abs(best_);
  const bool new_min = best_epoch_ < 0 || loss_value < best_;
  stale_ = progress ? 0 : stale_ + 1;
  if (new_min) {
    best_ = loss_value;
    best_epoch_ = epoch;
  }
  return new_min;
}

NonFiniteLoss::NonFiniteLoss(int e) : std::runtime_error("non-finite loss at epoch " + std::to_string(e)), epoch(e) {}

namespace {

struct BatchGradient {
  Eigen::VectorXd flat;
  double loss = 0.0;
};

// Per-sample gradients run through the kernel; the reduction is serial and
// in sample order so every Exec path gives identical bits.
BatchGradient batch_gradient(const Model& model, const std::vector<SequenceSample>& samples,
                             std::span<const std::size_t> batch, kernels::Exec exec) {
  std::vector<Eigen::VectorXd> grads(batch.size());
  std::vector<double> losses(batch.size());
  kernels::for_each_index(
      batch.size(),
      [&](std::size_t k) {
        const auto& s = samples[batch[k]];
        auto fr = forward(model, s.inputs);
        losses[k] = loss(fr.prediction, s.target);
        grads[k] = backward(model, fr.cache, fr.prediction, s.target).flatten();
      },
      exec);
  BatchGradient out{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.params.count())), 0.0};
  for (std::size_t k = 0; k < batch.size(); ++k) {
    out.flat += grads[k];
    out.loss += losses[k];
  }
  const auto n = static_cast<double>(batch.size());
  out.flat /= n;
  out.loss /= n;
  return out;
}

}  // namespace

double mean_loss(const Model& model, const std::vector<SequenceSample>& samples, kernels::Exec exec) {
  if (samples.empty()) return 0.0;
  std::vector<double> losses(samples.size());
  kernels::for_each_index(
      samples.size(),
      [&](std::size_t k) { losses[k] = loss(forward(model, samples[k].inputs).prediction, samples[k].target); },
      exec);
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(samples.size());
}

TrainResult train(Model model, const std::vector<SequenceSample>& train_set,
                  const std::vector<SequenceSample>& validation_set, const TrainConfig& config) {
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  if (!(config.learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
  if (config.max_epochs < 1) throw std::invalid_argument("max_epochs must be at least 1");

  const std::size_t n = train_set.size();
  const std::size_t batch =
      config.batch_size <= 0 ? n : std::min(n, static_cast<std::size_t>(config.batch_size));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(config.shuffle_seed);

  Eigen::VectorXd theta = model.params.flatten();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  long step = 0;

  EarlyStopping stopper(config.patience, config.improvement_epsilon);
  TrainResult result{model, {}};
  auto& history = result.history;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    if (batch < n) {
      // Fisher-Yates with the raw engine; std::shuffle's draw sequence is library-specific.
      for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle_rng() % (i + 1)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t lo = 0; lo < n; lo += batch) {
      const std::size_t len = std::min(batch, n - lo);
      const auto g = batch_gradient(model, train_set, std::span(order).subspan(lo, len), config.exec);
      epoch_loss += g.loss * static_cast<double>(len);

      ++step;
      m = config.beta1 * m + (1.0 - config.beta1) * g.flat;
      v = config.beta2 * v + (1.0 - config.beta2) * g.flat.cwiseAbs2();
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      if (config.weight_decay > 0.0) theta *= 1.0 - config.learning_rate * config.weight_decay;
      theta.array() -= config.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + config.adam_epsilon);
      model.params.assign(theta);
    }
    epoch_loss /= static_cast<double>(n);
    const double val = validation_set.empty() ? mean_loss(model, train_set, config.exec)
                                              : mean_loss(model, validation_set, config.exec);
    if (!std::isfinite(epoch_loss) || !std::isfinite(val)) throw NonFiniteLoss(epoch);

    history.train_loss.push_back(epoch_loss);
    history.val_loss.push_back(val);
    history.stopped_epoch = epoch;
    if (stopper.update(epoch, val)) result.model = model;
    if (stopper.should_stop()) {
      history.early_stopped = true;
      break;
    }
  }
  history.best_epoch = stopper.best_epoch();
  return result;
}

Eigen::VectorXd predict_next(const Model& model, const Eigen::MatrixXd& window) {
  Eigen::VectorXd z = forward(model, window).prediction;
  if (model.scaler.size() != z.size()) throw ShapeMismatch("scaler does not match model outputs");
  for (Eigen::Index r = 0; r < z.size(); ++r) z(r) = std::max(0.0, model.scaler.inverse(r, z(r)));
  return z;
}

double grad_check(const Model& model, const SequenceSample& sample, double h, const GradientFn& gradient) {
  auto fr = forward(model, sample.inputs);
  const Parameters analytic_params =
      gradient ? gradient(model, fr.cache, fr.prediction, sample.target)
               : backward(model, fr.cache, fr.prediction, sample.target);
  const Eigen::VectorXd analytic = analytic_params.flatten();

  Model probe = model;
  Eigen::VectorXd theta = model.params.flatten();
  double worst = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    const double saved = theta(k);
    auto at = [&](double offset) {
      theta(k) = saved + offset;
      probe.params.assign(theta);
      return loss(forward(probe, sample.inputs).prediction, sample.target);
    };
    // five-point stencil
    const double numeric = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
    theta(k) = saved;
    const double err = std::abs(analytic(k) - numeric) / std::max(std::abs(analytic(k)) + std::abs(numeric), 1e-8);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace repopulse::lstm
