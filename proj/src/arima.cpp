#include "repopulse/arima.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>

#include <Eigen/Dense>

namespace repopulse::arima {

std::vector<double> difference(std::span<const double> series, int d) {
  if (d < 0) throw std::invalid_argument("difference order must be non-negative");
  if (series.size() <= static_cast<std::size_t>(d)) {
    throw SeriesTooShort("series of length " + std::to_string(series.size()) + " cannot be differenced " +
                         std::to_string(d) + " times");
  }
  std::vector<double> out(series.begin(), series.end());
  for (int k = 0; k < d; ++k) {
    for (std::size_t i = 0; i + 1 < out.size(); ++i) out[i] = out[i + 1] - out[i];
    out.pop_back();
  }
  return out;
}

std::vector<double> difference_heads(std::span<const double> series, int d) {
  std::vector<double> heads;
  std::vector<double> level(series.begin(), series.end());
  for (int k = 0; k < d; ++k) {
    heads.push_back(level.at(0));
    level = difference(level, 1);
  }
  return heads;
}

std::vector<double> integrate(std::span<const double> differenced, std::span<const double> heads) {
  std::vector<double> level(differenced.begin(), differenced.end());
  for (std::size_t k = heads.size(); k-- > 0;) {
    std::vector<double> up(level.size() + 1);
    up[0] = heads[k];
    for (std::size_t i = 0; i < level.size(); ++i) up[i + 1] = up[i] + level[i];
    level = std::move(up);
  }
  return level;
}

std::vector<double> css_residuals(std::span<const double> ar, std::span<const double> ma, double intercept,
                                  std::span<const double> series, std::size_t start) {
  const std::size_t p = ar.size();
  const std::size_t q = ma.size();
  if (start == kDefaultStart) start = p;
  if (start < p) throw std::invalid_argument("CSS start index must be at least p");
  if (series.size() <= std::max(start, q)) {
    throw SeriesTooShort("series too short for ARMA(" + std::to_string(p) + "," + std::to_string(q) + ")");
  }
  std::vector<double> e(series.size(), 0.0);
  for (std::size_t t = start; t < series.size(); ++t) {
    double pred = intercept;
    for (std::size_t i = 1; i <= p; ++i) pred += ar[i - 1] * (series[t - i] - intercept);
    for (std::size_t j = 1; j <= q && j <= t; ++j) pred += ma[j - 1] * e[t - j];
    e[t] = series[t] - pred;
  }
  return {e.begin() + static_cast<std::ptrdiff_t>(start), e.end()};
}

double css_loss(std::span<const double> ar, std::span<const double> ma, double intercept,
                std::span<const double> series, std::size_t start) {
  const auto e = css_residuals(ar, ma, intercept, series, start);
  return std::inner_product(e.begin(), e.end(), e.begin(), 0.0);
}

double aic(double sigma2, std::size_t n_effective, int n_params) {
  return static_cast<double>(n_effective) * std::log(sigma2) + 2.0 * n_params;
}

double bic(double sigma2, std::size_t n_effective, int n_params) {
  const auto n = static_cast<double>(n_effective);
  return n * std::log(sigma2) + std::log(n) * n_params;
}

std::vector<std::complex<double>> polynomial_roots(std::span<const double> coeffs) {
  // Polynomial 1 + c0 z + ... ; trailing zero coefficients lower the degree.
  std::size_t degree = coeffs.size();
  while (degree > 0 && coeffs[degree - 1] == 0.0) --degree;
  if (degree == 0) return {};
  const double lead = coeffs[degree - 1];
  const auto n = static_cast<Eigen::Index>(degree);
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  // Monic form: z^n + a_{n-1} z^{n-1} + ... + a_0 with a_k = coef(z^k) / lead.
  for (Eigen::Index k = 0; k < n; ++k) {
    const double coef = k == 0 ? 1.0 : coeffs[static_cast<std::size_t>(k) - 1];
    companion(k, n - 1) = -coef / lead;
    if (k > 0) companion(k, k - 1) = 1.0;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, /*computeEigenvectors=*/false);
  std::vector<std::complex<double>> roots;
  for (Eigen::Index k = 0; k < n; ++k) roots.push_back(solver.eigenvalues()(k));
  return roots;
}

namespace {

constexpr double kRootMargin = 1e-4;
// MA roots near the unit circle keep zero-started residuals alive for
// hundreds of steps, so invertibility gets a wider band.
constexpr double kMaRootMargin = 0.05;

bool roots_outside(std::span<const double> coeffs) {
  for (auto r : polynomial_roots(coeffs)) {
    if (std::abs(r) <= 1.0) return false;
  }
  return true;
}

// Coefficients c (polynomial 1 + c0 z + ...) with every root moved outside
// the circle of radius 1 + margin.
std::vector<double> reflect_roots(std::span<const double> coeffs, double margin) {
  auto roots = polynomial_roots(coeffs);
  bool changed = false;
  for (auto& r : roots) {
    const double mag = std::abs(r);
    if (mag >= 1.0 + margin) continue;
    changed = true;
    if (mag == 0.0) {
      r = {1.0 / margin, 0.0};
      continue;
    }
    const double target = std::max(1.0 / mag, 1.0 + margin);
    r = r / mag * target;
  }
  if (!changed) return {coeffs.begin(), coeffs.end()};
  // prod (1 - z / r)
  std::vector<std::complex<double>> poly{1.0};
  for (auto r : roots) {
    poly.push_back(0.0);
    for (std::size_t j = poly.size() - 1; j > 0; --j) poly[j] -= poly[j - 1] / r;
  }
  std::vector<double> out(coeffs.size(), 0.0);
  for (std::size_t j = 1; j < poly.size(); ++j) out[j - 1] = poly[j].real();
  return out;
}

std::vector<double> negated(std::span<const double> v) {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), std::negate<>{});
  return out;
}

}  // namespace

bool is_stationary(std::span<const double> ar) { return roots_outside(negated(ar)); }
bool is_invertible(std::span<const double> ma) { return roots_outside(ma); }

std::vector<double> project_stationary(std::span<const double> ar) { return negated(reflect_roots(negated(ar), kRootMargin)); }
std::vector<double> project_invertible(std::span<const double> ma) { return reflect_roots(ma, kMaRootMargin); }

namespace {

struct SimplexResult {
  Eigen::VectorXd x;
  double value;
  bool converged;
};

// Nelder-Mead with standard coefficients (reflect 1, expand 2, contract 0.5, shrink 0.5).
template <class F>
SimplexResult nelder_mead(F&& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& step, int max_evals, double tol) {
  const Eigen::Index n = x0.size();
  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> vals(static_cast<std::size_t>(n + 1));
  for (Eigen::Index i = 0; i < n; ++i) pts[static_cast<std::size_t>(i + 1)](i) += step(i);
  int evals = 0;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  for (std::size_t i = 0; i < pts.size(); ++i) vals[i] = eval(pts[i]);

  std::vector<std::size_t> order(pts.size());
  bool converged = false;
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[order.size() - 2];

    const double spread = vals[worst] - vals[best];
    double size = 0.0;
    for (const auto& p : pts) size = std::max(size, (p - pts[best]).cwiseAbs().maxCoeff());
    if (std::isfinite(spread) && spread <= tol * (std::abs(vals[best]) + tol) && size <= 1e-8) {
      converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i != worst) centroid += pts[i];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - pts[worst]);
    const double fr = eval(reflected);
    if (fr < vals[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(expanded);
      if (fe < fr) {
        pts[worst] = expanded;
        vals[worst] = fe;
      } else {
        pts[worst] = reflected;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = reflected;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Eigen::VectorXd contracted =
        outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(contracted);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = contracted;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      vals[i] = eval(pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  return {pts[best], vals[best], converged};
}

// Levinson-Durbin solution of the Yule-Walker equations. Always stationary.
std::vector<double> yule_walker(std::span<const double> y, int p) {
  std::vector<double> phi(static_cast<std::size_t>(p), 0.0);
  if (p == 0) return phi;
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  std::vector<double> acov(static_cast<std::size_t>(p + 1), 0.0);
  for (int k = 0; k <= p; ++k) {
    for (std::size_t t = static_cast<std::size_t>(k); t < y.size(); ++t) {
      acov[static_cast<std::size_t>(k)] += (y[t] - mean) * (y[t - static_cast<std::size_t>(k)] - mean);
    }
    acov[static_cast<std::size_t>(k)] /= static_cast<double>(y.size());
  }
  if (acov[0] <= 0.0) return phi;
  std::vector<double> prev;
  double err = acov[0];
  for (int k = 1; k <= p; ++k) {
    double acc = acov[static_cast<std::size_t>(k)];
    for (int j = 1; j < k; ++j) acc -= prev[static_cast<std::size_t>(j - 1)] * acov[static_cast<std::size_t>(k - j)];
    const double kappa = acc / err;
    std::vector<double> next(static_cast<std::size_t>(k));
    for (int j = 1; j < k; ++j) {
      next[static_cast<std::size_t>(j - 1)] =
          prev[static_cast<std::size_t>(j - 1)] - kappa * prev[static_cast<std::size_t>(k - j - 1)];
    }
    next[static_cast<std::size_t>(k - 1)] = kappa;
    err *= (1.0 - kappa * kappa);
    prev = std::move(next);
    if (err <= 0.0) break;
  }
  std::copy(prev.begin(), prev.end(), phi.begin());
  return phi;
}

}  // namespace

ArimaModel fit_arma(std::span<const double> series, int p, int q, const FitOptions& options) {
  if (p < 0 || q < 0) throw std::invalid_argument("ARMA orders must be non-negative");
  const std::size_t start = options.start == kDefaultStart ? static_cast<std::size_t>(p) : options.start;
  if (series.size() <= std::max(start, static_cast<std::size_t>(q)) + 1) {
    throw SeriesTooShort("series too short for ARMA(" + std::to_string(p) + "," + std::to_string(q) + ")");
  }
  const auto conditioned = series.subspan(start);
  const double mean = std::accumulate(conditioned.begin(), conditioned.end(), 0.0) / static_cast<double>(conditioned.size());

  ArimaModel model;
  model.p = p;
  model.q = q;
  model.n_effective = series.size() - start;

  if (p == 0 && q == 0) {
    // The CSS minimizer of a pure-intercept model is the mean.
    model.intercept = mean;
  } else {
    const auto pu = static_cast<std::size_t>(p);
    auto unpack = [&](const Eigen::VectorXd& x, std::vector<double>& ar, std::vector<double>& ma) {
      std::vector<double> raw_ar(x.data() + 1, x.data() + 1 + p);
      std::vector<double> raw_ma(x.data() + 1 + p, x.data() + 1 + p + q);
      ar = project_stationary(raw_ar);
      ma = project_invertible(raw_ma);
    };
    auto objective = [&](const Eigen::VectorXd& x) {
      std::vector<double> ar, ma;
      unpack(x, ar, ma);
      return css_loss(ar, ma, x(0), series, start);
    };

    Eigen::VectorXd x = Eigen::VectorXd::Zero(1 + p + q);
    x(0) = mean;
    const auto phi0 = yule_walker(series, p);
    for (std::size_t i = 0; i < pu; ++i) x(static_cast<Eigen::Index>(1 + i)) = phi0[i];

    double sd = 0.0;
    for (double v : conditioned) sd += (v - mean) * (v - mean);
    sd = std::sqrt(sd / static_cast<double>(conditioned.size()));
    Eigen::VectorXd step = Eigen::VectorXd::Constant(x.size(), 0.1);
    step(0) = 0.1 * std::max(sd, 1e-3);

    SimplexResult best{x, objective(x), false};
    for (int run = 0; run < std::max(1, options.restarts); ++run) {
      auto r = nelder_mead(objective, best.x, step, options.max_evaluations, options.tolerance);
      if (r.value <= best.value) best = r;
      best.converged = r.converged;
    }
    if (!std::isfinite(best.value)) throw FitDiverged("CSS optimizer produced a non-finite loss");
    model.intercept = best.x(0);
    unpack(best.x, model.ar, model.ma);
    model.converged = best.converged;
  }

  const double loss = css_loss(model.ar, model.ma, model.intercept, series, start);
  if (!std::isfinite(loss)) throw FitDiverged("non-finite CSS loss at the fitted parameters");
  model.sigma2 = std::max(loss / static_cast<double>(model.n_effective), 1e-12);
  model.aic = aic(model.sigma2, model.n_effective, p + q + 1);
  return model;
}

namespace {

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

ArimaModel select_order(std::span<const double> series, const OrderBounds& bounds) {
  if (series.size() < 20) throw SeriesTooShort("order selection needs at least 20 observations");
  int best_d = 0;
  double best_var = std::numeric_limits<double>::infinity();
  for (int d = 0; d <= bounds.d_max; ++d) {
    const double var = sample_variance(difference(series, d));
    if (var < best_var) {
      best_var = var;
      best_d = d;
    }
  }
  const auto w = difference(series, best_d);
  FitOptions options;
  options.start = static_cast<std::size_t>(bounds.p_max);

  const auto score = [&](const ArimaModel& m) {
    return bounds.criterion == Criterion::Aic ? m.aic : bic(m.sigma2, m.n_effective, m.p + m.q + 1);
  };
  std::optional<ArimaModel> best;
  double best_score = 0.0;
  std::string last_error;
  for (int p = 0; p <= bounds.p_max; ++p) {
    for (int q = 0; q <= bounds.q_max; ++q) {
      ArimaModel m;
      try {
        m = fit_arma(w, p, q, options);
      } catch (const FitDiverged& e) {
        last_error = e.what();
        continue;
      } catch (const SeriesTooShort& e) {
        last_error = e.what();
        continue;
      }
      // Grid order visits smaller p first, so only a strictly lower score or a
      // tie with fewer parameters replaces the incumbent.
      const double s = score(m);
      if (!best || s < best_score || (s == best_score && m.p + m.q < best->p + best->q)) {
        best = m;
        best_score = s;
      }
    }
  }
  if (!best) throw AllFitsFailed("no (p, q) cell could be fitted: " + last_error);
  best->d = best_d;
  return *best;
}

std::vector<double> rolling_forecast(const ArimaModel& model, std::span<const double> history, std::size_t horizon,
                                     std::span<const double> actuals) {
  if (actuals.size() != horizon) throw std::invalid_argument("need exactly one actual per forecast step");
  if (history.size() <= static_cast<std::size_t>(model.d)) throw SeriesTooShort("history shorter than d + 1");
  const auto p = static_cast<std::size_t>(model.p);
  const auto q = static_cast<std::size_t>(model.q);

  std::vector<double> levels(history.begin(), history.end());
  // binom[k] = (-1)^(k+1) C(d, k): level = forecast of the d-th difference + sum binom[k] y_{n-k}
  std::vector<double> binom(static_cast<std::size_t>(model.d) + 1, 0.0);
  {
    double c = 1.0;
    for (int k = 1; k <= model.d; ++k) {
      c = c * (model.d - k + 1) / k;
      binom[static_cast<std::size_t>(k)] = (k % 2 == 1 ? 1.0 : -1.0) * c;
    }
  }

  std::vector<double> out;
  out.reserve(horizon);
  for (std::size_t step = 0; step < horizon; ++step) {
    const auto w = difference(levels, model.d);
    const std::size_t n = w.size();
    // In-sample residuals, zero before p.
    std::vector<double> e(n, 0.0);
    for (std::size_t t = p; t < n; ++t) {
      double pred = model.intercept;
      for (std::size_t i = 1; i <= p; ++i) pred += model.ar[i - 1] * (w[t - i] - model.intercept);
      for (std::size_t j = 1; j <= q && j <= t; ++j) pred += model.ma[j - 1] * e[t - j];
      e[t] = w[t] - pred;
    }
    double next = model.intercept;
    for (std::size_t i = 1; i <= p && i <= n; ++i) next += model.ar[i - 1] * (w[n - i] - model.intercept);
    for (std::size_t j = 1; j <= q && j <= n; ++j) next += model.ma[j - 1] * e[n - j];

    double level = next;
    for (std::size_t k = 1; k < binom.size(); ++k) level += binom[k] * levels[levels.size() - k];
    out.push_back(std::max(0.0, level));
    levels.push_back(actuals[step]);
  }
  return out;
}

std::vector<SeriesFit> select_orders(const std::vector<std::vector<double>>& series, const OrderBounds& bounds,
                                     kernels::Exec exec) {
  std::vector<SeriesFit> fits(series.size());
  kernels::for_each_index(
      series.size(),
      [&](std::size_t i) {
        try {
          fits[i].model = select_order(series[i], bounds);
        } catch (const std::exception& e) {
          fits[i].error = e.what();
        }
      },
      exec);
  return fits;
}

void write_fit_report_csv(std::ostream& out, const std::vector<std::string>& repo_ids,
                          const std::vector<SeriesFit>& fits) {
  out << "repo_id,p,d,q,aic,sigma2,converged\n";
  const auto precision = out.precision(17);
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& m = fits[i].model;
    out << repo_ids.at(i) << ',';
    if (!fits[i].error.empty()) {
      out << ",,,,,false\n";
      continue;
    }
    out << m.p << ',' << m.d << ',' << m.q << ',' << m.aic << ',' << m.sigma2 << ','
        << (m.converged ? "true" : "false") << '\n';
  }
  out.precision(precision);
}

}  // namespace repopulse::arima
