#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "repopulse/kernels.hpp"

namespace repopulse::arima {

struct ArimaModel {
  int p = 0;
  int d = 0;
  int q = 0;
  std::vector<double> ar;  // phi_1..phi_p
  std::vector<double> ma;  // theta_1..theta_q
  double intercept = 0.0;  // mean of the differenced series
  double sigma2 = 1.0;
  double aic = 0.0;
  std::size_t n_effective = 0;
  bool converged = true;
};

class SeriesTooShort : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};
class FitDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class AllFitsFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// d-fold first difference; output length is n - d.
std::vector<double> difference(std::span<const double> series, int d);

/// Undoes difference(): `heads[k]` is the first value of the k-times
/// differenced original series, for k in [0, d).
std::vector<double> integrate(std::span<const double> differenced, std::span<const double> heads);
/// The heads integrate() needs to rebuild `series` from its d-th difference.
std::vector<double> difference_heads(std::span<const double> series, int d);

inline constexpr std::size_t kDefaultStart = std::numeric_limits<std::size_t>::max();

/// Conditional-sum-of-squares residuals, summed from index `start`
/// (default p). Residuals before `start` are taken as zero.
std::vector<double> css_residuals(std::span<const double> ar, std::span<const double> ma, double intercept,
                                  std::span<const double> series, std::size_t start = kDefaultStart);
double css_loss(std::span<const double> ar, std::span<const double> ma, double intercept,
                std::span<const double> series, std::size_t start = kDefaultStart);

/// n_effective * ln(sigma2) + 2 * n_params
double aic(double sigma2, std::size_t n_effective, int n_params);

/// Roots of 1 + c[0] z + c[1] z^2 + ...
std::vector<std::complex<double>> polynomial_roots(std::span<const double> coeffs);
/// Every root of 1 - sum phi_i z^i lies strictly outside the unit circle.
bool is_stationary(std::span<const double> ar);
/// Every root of 1 + sum theta_j z^j lies strictly outside the unit circle.
bool is_invertible(std::span<const double> ma);

/// Reflects roots inside the circle of radius 1 + margin outward (z -> 1/conj(z), at least
/// to the margin). The margin is 1e-4 for AR roots and 0.05 for MA roots.
std::vector<double> project_stationary(std::span<const double> ar);
std::vector<double> project_invertible(std::span<const double> ma);

struct FitOptions {
  int restarts = 3;
  int max_evaluations = 4000;  // per simplex run
  double tolerance = 1e-10;
  std::size_t start = kDefaultStart;  // CSS conditioning index; default p
};

/// ARMA(p, q) by CSS minimization with a restarted Nelder-Mead simplex from a
/// Yule-Walker start. The returned model has d = 0.
ArimaModel fit_arma(std::span<const double> series, int p, int q, const FitOptions& options = {});

enum class Criterion { Aic, Bic };

struct OrderBounds {
  int p_max = 5;
  int d_max = 2;
  int q_max = 5;
  Criterion criterion = Criterion::Aic;
};

/// n_effective * ln(sigma2) + ln(n_effective) * n_params
double bic(double sigma2, std::size_t n_effective, int n_params);

/// d minimizes the sample variance of the differenced series (ties to the
/// smaller d); (p, q) minimizes the chosen criterion (AIC by default) over
/// the grid with every cell conditioned on the same p_max leading values.
ArimaModel select_order(std::span<const double> series, const OrderBounds& bounds = {});

/// One-step-ahead forecasts with frozen parameters; each actual is appended
/// to the history after its step is forecast. Forecasts are clamped at 0.
std::vector<double> rolling_forecast(const ArimaModel& model, std::span<const double> history, std::size_t horizon,
                                     std::span<const double> actuals);

struct SeriesFit {
  ArimaModel model;
  std::string error;  // empty on success
};

/// select_order for each series independently.
std::vector<SeriesFit> select_orders(const std::vector<std::vector<double>>& series, const OrderBounds& bounds,
                                     kernels::Exec exec = kernels::Exec::Parallel);

// `repo_id,p,d,q,aic,sigma2,converged`
void write_fit_report_csv(std::ostream& out, const std::vector<std::string>& repo_ids,
                          const std::vector<SeriesFit>& fits);

}  // namespace repopulse::arima
