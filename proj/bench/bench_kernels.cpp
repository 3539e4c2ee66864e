// Serial reference vs OpenMP path for each parallel kernel.
// Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include <random>

#include "repopulse/arima.hpp"
#include "repopulse/kernels.hpp"
#include "repopulse/lstm.hpp"

using namespace repopulse;

namespace {

kernels::Exec exec_of(const benchmark::State& state) {
  return state.range(0) ? kernels::Exec::Parallel : kernels::Exec::Serial;
}

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void BM_BinCounts(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const TimeGrid grid{*parse_utc("2015-01-01T00:00:00Z"), 10, 90};
  std::vector<std::string> repos;
  for (int r = 0; r < 100; ++r) repos.push_back("r" + std::to_string(r));
  std::vector<EventRecord> events;
  for (int i = 0; i < 200000; ++i) {
    const auto secs = static_cast<long>(uniform(rng) * 900.0 * 86400.0);
    events.push_back({EventType::Watch, "u" + std::to_string(rng() % 5000), repos[rng() % repos.size()],
                      grid.start + std::chrono::seconds(secs)});
  }
  for (auto _ : state) {
    CountPanel panel(repos, grid);
    benchmark::DoNotOptimize(kernels::bin_counts(events, panel, exec_of(state)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(events.size()));
}
BENCHMARK(BM_BinCounts)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_NearestCenters(benchmark::State& state) {
  const Eigen::MatrixXd points = Eigen::MatrixXd::Random(20000, 24);
  const Eigen::MatrixXd centers = Eigen::MatrixXd::Random(16, 24);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::nearest_centers(points, centers, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * points.rows());
}
BENCHMARK(BM_NearestCenters)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_MeanLoss(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const int R = 20, L = 8;
  const auto model = lstm::init_model(R, 2 * R, {16, 16}, L, 3);
  std::vector<SequenceSample> samples(200);
  for (auto& s : samples) {
    s.inputs = Eigen::MatrixXd::Random(L, 2 * R);
    s.target = Eigen::VectorXd::Random(R);
  }
  for (auto _ : state) benchmark::DoNotOptimize(lstm::mean_loss(model, samples, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(samples.size()));
}
BENCHMARK(BM_MeanLoss)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_SelectOrders(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::vector<double>> series(8, std::vector<double>(100));
  for (auto& s : series) {
    double y = 0.0;
    for (auto& v : s) v = y = 0.6 * y + z(rng);
  }
  const arima::OrderBounds bounds{2, 1, 2};
  for (auto _ : state) benchmark::DoNotOptimize(arima::select_orders(series, bounds, exec_of(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(series.size()));
}
BENCHMARK(BM_SelectOrders)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

int main(int argc, char** argv) {
  kernels::apply_thread_cap_from_env();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
