#include "repopulse/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "repopulse/eval.hpp"

namespace repopulse {

int holdout_windows(int total_windows, double fraction) {
  if (fraction < 0.0 || fraction >= 1.0) throw std::invalid_argument("holdout fraction must lie in [0, 1)");
  if (fraction == 0.0) return 0;
  return std::max(1, static_cast<int>(std::lround(fraction * total_windows)));
}

Eigen::MatrixXd columns(const Eigen::MatrixXd& m, const std::vector<int>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
  return out;
}

LstmRun run_lstm(const Eigen::MatrixXd& counts, const Eigen::MatrixXd& comp_features, const ForecastSetup& setup) {
  const auto total = static_cast<int>(counts.cols());
  const int holdout = holdout_windows(total, setup.holdout_fraction);
  const int fit_windows = total - holdout;
  const int L = setup.loopback;
  if (fit_windows < L + 2) {
    throw SeriesTooShort("loop-back " + std::to_string(L) + " needs at least " + std::to_string(L + 2) +
                         " fitting windows, have " + std::to_string(fit_windows));
  }
  const auto n_samples = static_cast<std::size_t>(fit_windows - L);
  const int train_windows = L + static_cast<int>(train_count(n_samples, setup.split_ratio));

  LstmRun run;
  auto std_panel = standardize(counts, std::max(2, train_windows));
  run.warnings = std_panel.warnings;

  auto samples = build_sequences(std_panel.values.leftCols(fit_windows), comp_features.leftCols(fit_windows), L);
  run.split = split_train_val(std::move(samples), setup.split_ratio);
  run.warnings.insert(run.warnings.end(), run.split.warnings.begin(), run.split.warnings.end());

  auto model = lstm::init_model(static_cast<int>(counts.rows()), static_cast<int>(2 * counts.rows()),
                                setup.hidden_sizes, L, setup.seed);
  model.scaler = std_panel.scaler;
  auto config = setup.train;
  config.shuffle_seed = setup.seed;
  auto trained = lstm::train(std::move(model), run.split.train, run.split.validation, config);
  run.model = std::move(trained.model);
  run.history = std::move(trained.history);

  if (holdout > 0) {
    for (int w = fit_windows; w < total; ++w) run.eval_windows.push_back(w);
  } else {
    for (const auto& s : run.split.validation) run.eval_windows.push_back(s.target_window);
  }
  const auto R = counts.rows();
  const auto E = static_cast<Eigen::Index>(run.eval_windows.size());
  run.predicted.resize(R, E);
  run.predicted_standardized.resize(R, E);
  run.actual_standardized.resize(R, E);
  for (Eigen::Index j = 0; j < E; ++j) {
    const int w = run.eval_windows[static_cast<std::size_t>(j)];
    const auto window = input_window(std_panel.values, comp_features, w - L, L);
    run.predicted_standardized.col(j) = lstm::forward(run.model, window).prediction;
    run.predicted.col(j) = lstm::predict_next(run.model, window);
    run.actual_standardized.col(j) = std_panel.values.col(w);
  }
  return run;
}

ArimaRun run_arima(const Eigen::MatrixXd& counts, const ForecastSetup& setup, kernels::Exec exec) {
  const auto total = static_cast<int>(counts.cols());
  const int holdout = holdout_windows(total, setup.holdout_fraction);
  if (holdout == 0) throw std::invalid_argument("ARIMA evaluation needs a holdout span");
  const int fit_windows = total - holdout;

  std::vector<std::vector<double>> history(static_cast<std::size_t>(counts.rows()));
  for (Eigen::Index r = 0; r < counts.rows(); ++r) {
    auto& h = history[static_cast<std::size_t>(r)];
    for (int t = 0; t < fit_windows; ++t) h.push_back(counts(r, t));
  }
  ArimaRun run;
  run.fits = arima::select_orders(history, setup.arima_bounds, exec);
  for (int w = fit_windows; w < total; ++w) run.eval_windows.push_back(w);
  run.predicted.resize(counts.rows(), holdout);
  for (Eigen::Index r = 0; r < counts.rows(); ++r) {
    const auto& fit = run.fits[static_cast<std::size_t>(r)];
    std::vector<double> actual(static_cast<std::size_t>(holdout));
    for (int j = 0; j < holdout; ++j) actual[static_cast<std::size_t>(j)] = counts(r, fit_windows + j);
    arima::ArimaModel model = fit.model;
    if (!fit.error.empty()) {
      model = arima::ArimaModel{};
      model.d = 1;
    }
    const auto pred = arima::rolling_forecast(model, history[static_cast<std::size_t>(r)],
                                              static_cast<std::size_t>(holdout), actual);
    for (int j = 0; j < holdout; ++j) run.predicted(r, j) = pred[static_cast<std::size_t>(j)];
  }
  return run;
}

std::vector<SweepRow> sweep_loopback(const Eigen::MatrixXd& counts, const Eigen::MatrixXd& comp_features,
                                     const std::vector<int>& loopbacks, ForecastSetup setup, kernels::Exec exec) {
  setup.holdout_fraction = 0.0;
  // Parallelism goes across loop-backs; each training stays serial inside.
  setup.train.exec = exec == kernels::Exec::Parallel ? kernels::Exec::Serial : setup.train.exec;
  std::vector<SweepRow> rows(loopbacks.size());
  kernels::for_each_index(
      loopbacks.size(),
      [&](std::size_t i) {
        auto& row = rows[i];
        row.loopback = loopbacks[i];
        try {
          auto local = setup;
          local.loopback = loopbacks[i];
          auto run = run_lstm(counts, comp_features, local);
          if (run.eval_windows.empty()) throw std::invalid_argument("validation span is empty");
          EvaluationPanel panel{columns(counts, run.eval_windows), run.predicted, {}, {}};
          row.rmse_total = rmse_total(panel);
        } catch (const std::exception& e) {
          row.error = e.what();
        }
      },
      exec);
  return rows;
}

std::optional<int> best_loopback(const std::vector<SweepRow>& rows) {
  std::optional<int> best;
  double best_rmse = 0.0;
  for (const auto& r : rows) {
    if (!r.rmse_total || !std::isfinite(*r.rmse_total)) continue;
    if (!best || *r.rmse_total < best_rmse || (*r.rmse_total == best_rmse && r.loopback < *best)) {
      best = r.loopback;
      best_rmse = *r.rmse_total;
    }
  }
  return best;
}

LoopbackChoice select_loopback(const Eigen::MatrixXd& counts, const Eigen::MatrixXd& comp_features,
                               const std::vector<int>& loopbacks, const ForecastSetup& setup, kernels::Exec exec) {
  const auto total = static_cast<int>(counts.cols());
  const int fit_windows = total - holdout_windows(total, setup.holdout_fraction);
  LoopbackChoice choice;
  choice.sweep = sweep_loopback(counts.leftCols(fit_windows), comp_features.leftCols(fit_windows), loopbacks, setup, exec);
  const auto best = best_loopback(choice.sweep);
  if (!best) throw std::invalid_argument("no loop-back produced a finite validation RMSE");
  choice.loopback = *best;
  return choice;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  const auto precision = out.precision(17);
  out << "loopback,rmse_total,status\n";
  for (const auto& r : rows) {
    out << r.loopback << ',';
    if (r.rmse_total) {
      out << *r.rmse_total << ",ok\n";
    } else {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      out << ",error: " << msg << '\n';
    }
  }
  out.precision(precision);
}

}  // namespace repopulse
