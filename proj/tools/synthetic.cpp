#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace repopulse::cli {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::string padded(const std::string& prefix, int i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 2) digits.insert(0, 2 - digits.size(), '0');
  return prefix + digits;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.repos < 1 || spec.components < 1 || spec.components > spec.repos || spec.windows < 1) {
    throw std::invalid_argument("synthetic generator: bad shape");
  }
  if (spec.coupling < 0.0 || spec.coupling > 1.0) throw std::invalid_argument("coupling must lie in [0, 1]");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int burn = spec.max_lag + 50;
  const int span = spec.windows + burn;

  // latent drivers, started from their stationary law
  Eigen::MatrixXd z(spec.components, span);
  const double z_sd = spec.driver_sigma / std::sqrt(1.0 - spec.driver_phi * spec.driver_phi);
  for (int c = 0; c < spec.components; ++c) {
    z(c, 0) = z_sd * normal(rng);
    for (int t = 1; t < span; ++t) z(c, t) = spec.driver_phi * z(c, t - 1) + spec.driver_sigma * normal(rng);
  }

  SyntheticData data;
  data.grid.start = *parse_utc("2015-01-01T00:00:00Z");
  data.grid.window_days = spec.window_days;
  data.grid.num_windows = spec.windows;
  data.rates.resize(spec.repos, spec.windows);

  std::vector<double> base(static_cast<std::size_t>(spec.repos));
  for (int r = 0; r < spec.repos; ++r) {
    data.repo_ids.push_back(padded("synth/repo", r));
    data.lags.push_back(r / spec.components % (spec.max_lag + 1));
    base[static_cast<std::size_t>(r)] = spec.base_rate * (0.5 + uniform01(rng));
  }

  const double u_sd = spec.noise_sigma / std::sqrt(1.0 - spec.noise_phi * spec.noise_phi);
  for (int r = 0; r < spec.repos; ++r) {
    const int c = r % spec.components;
    const int lag = data.lags[static_cast<std::size_t>(r)];
    double u = u_sd * normal(rng);
    for (int t = 0; t < span; ++t) {
      if (t > 0) u = spec.noise_phi * u + spec.noise_sigma * normal(rng);
      if (t < burn) continue;
      const double log_rate = std::log(base[static_cast<std::size_t>(r)]) + spec.coupling * z(c, t - lag) +
                              (1.0 - spec.coupling) * u;
      data.rates(r, t - burn) = std::exp(log_rate);
    }
  }

  const auto window_seconds = static_cast<std::int64_t>(spec.window_days) * 86400;
  for (int t = 0; t < spec.windows; ++t) {
    for (int r = 0; r < spec.repos; ++r) {
      const int c = r % spec.components;
      std::poisson_distribution<long> draw(data.rates(r, t));
      const long n = draw(rng);
      for (long e = 0; e < n; ++e) {
        const auto user = static_cast<int>(uniform01(rng) * spec.users_per_component);
        const auto offset = static_cast<std::int64_t>(uniform01(rng) * static_cast<double>(window_seconds));
        EventRecord rec;
        rec.type = EventType::Watch;
        rec.user_id = "c" + std::to_string(c) + "-" + padded("u", user);
        rec.repo_id = data.repo_ids[static_cast<std::size_t>(r)];
        rec.timestamp = data.grid.window_start(t) + std::chrono::seconds(offset);
        data.events.push_back(std::move(rec));
      }
    }
  }
  std::stable_sort(data.events.begin(), data.events.end(),
                   [](const EventRecord& a, const EventRecord& b) { return a.timestamp < b.timestamp; });
  return data;
}

}  // namespace repopulse::cli
