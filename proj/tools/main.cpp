#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "config.hpp"
#include "repopulse/kernels.hpp"

using repopulse::cli::RunConfig;

namespace {

// Flags shared by every subcommand. Values given on the command line are
// applied on top of --config.
struct Overrides {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> values;
};

void add_flag(CLI::App* app, Overrides& ov, const std::string& flag, const std::string& key, const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&ov, key](const std::string& v) { ov.values.emplace_back(key, v); }, help);
}

void add_common(CLI::App* app, Overrides& ov) {
  app->add_option("--config", ov.config_path, "key = value config file");
  add_flag(app, ov, "--out-dir", "out_dir", "output directory");
  add_flag(app, ov, "--seed", "seed", "random seed");
}

void add_data(CLI::App* app, Overrides& ov) {
  add_flag(app, ov, "--events", "events", "line-delimited event file");
  add_flag(app, ov, "--event-type", "event_type", "fork or watch");
  add_flag(app, ov, "--window-days", "window_days", "window length in days");
  add_flag(app, ov, "--start", "start", "grid start, e.g. 2015-01-01T00:00:00Z");
  add_flag(app, ov, "--top-k", "top_k", "repositories kept by total count");
}

void add_model(CLI::App* app, Overrides& ov) {
  add_flag(app, ov, "--loopback", "loopback", "windows fed to the LSTM per prediction");
  add_flag(app, ov, "--split", "split_ratio", "train share of the sequence samples");
  add_flag(app, ov, "--holdout", "holdout_fraction", "trailing share of windows held out");
  add_flag(app, ov, "--hidden", "hidden_sizes", "comma-separated hidden layer sizes");
  add_flag(app, ov, "--learning-rate", "learning_rate", "Adam step size");
  add_flag(app, ov, "--max-epochs", "max_epochs", "epoch limit");
  add_flag(app, ov, "--patience", "patience", "early-stopping patience");
  add_flag(app, ov, "--batch-size", "batch_size", "0 for full batch");
  add_flag(app, ov, "--p-max", "p_max", "largest AR order");
  add_flag(app, ov, "--d-max", "d_max", "largest differencing order");
  add_flag(app, ov, "--q-max", "q_max", "largest MA order");
  add_flag(app, ov, "--arima-criterion", "arima_criterion", "aic (default) or bic");
}

void add_synthetic(CLI::App* app, Overrides& ov) {
  add_flag(app, ov, "--repos", "synth_repos", "synthetic repositories");
  add_flag(app, ov, "--windows", "synth_windows", "synthetic windows");
  add_flag(app, ov, "--components", "synth_components", "latent drivers");
  add_flag(app, ov, "--coupling", "coupling", "weight of the shared driver in [0, 1]");
  add_flag(app, ov, "--base-rate", "base_rate", "typical events per window");
}

}  // namespace

int main(int argc, char** argv) {
  repopulse::kernels::apply_thread_cap_from_env();

  CLI::App app{"repopulse: repository popularity forecasting and user segmentation"};
  app.require_subcommand(1);
  Overrides ov;
  std::vector<std::string> predicted;

  auto* ingest = app.add_subcommand("ingest", "bin events into a repo x window count panel");
  add_common(ingest, ov);
  add_data(ingest, ov);

  auto* train = app.add_subcommand("train", "train the LSTM and forecast the holdout windows");
  add_common(train, ov);
  add_data(train, ov);
  add_model(train, ov);

  auto* fit = app.add_subcommand("fit-arima", "fit per-repo ARIMA and forecast the holdout windows");
  add_common(fit, ov);
  add_data(fit, ov);
  add_model(fit, ov);

  auto* evaluate = app.add_subcommand("evaluate", "score predictions against actual counts");
  add_common(evaluate, ov);
  add_flag(evaluate, ov, "--actual", "actual", "actual matrix CSV");
  evaluate->add_option("--predicted", predicted, "name=path, repeatable");

  auto* seg = app.add_subcommand("segment", "segment users by topics and network features");
  add_common(seg, ov);
  add_data(seg, ov);
  add_flag(seg, ov, "--topics", "topics", "repo_id,topic CSV");
  add_flag(seg, ov, "--communities", "communities", "user_id,community_id CSV");
  add_flag(seg, ov, "--clusters", "clusters", "k-means clusters");
  add_flag(seg, ov, "--segments", "segments", "ensemble segments");

  auto* sweep = app.add_subcommand("sweep", "RMSE of the LSTM across loop-back lengths");
  add_common(sweep, ov);
  add_data(sweep, ov);
  add_model(sweep, ov);
  add_synthetic(sweep, ov);
  add_flag(sweep, ov, "--loopbacks", "loopbacks", "comma-separated loop-backs");
  sweep->add_flag_callback("--synthetic", [&ov] { ov.values.emplace_back("synthetic", "true"); },
                           "use the synthetic generator instead of --events");

  auto* bench = app.add_subcommand("bench-synthetic", "LSTM vs ARIMA on coupled synthetic series");
  add_common(bench, ov);
  add_model(bench, ov);
  add_synthetic(bench, ov);

  auto* gen = app.add_subcommand("generate", "write the synthetic coupled corpus as events.jsonl");
  add_common(gen, ov);
  add_synthetic(gen, ov);

  CLI11_PARSE(app, argc, argv);

  RunConfig config;
  try {
    if (!ov.config_path.empty()) repopulse::cli::load_config_file(config, ov.config_path);
    for (const auto& [k, v] : ov.values) repopulse::cli::set_field(config, k, v);
    if (!predicted.empty()) config.predicted = predicted;
    config.validate();
  } catch (const repopulse::cli::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  if (*ingest) return repopulse::cli::cmd_ingest(config, std::cerr);
  if (*train) return repopulse::cli::cmd_train(config, std::cerr);
  if (*fit) return repopulse::cli::cmd_fit_arima(config, std::cerr);
  if (*evaluate) return repopulse::cli::cmd_evaluate(config, std::cerr);
  if (*seg) return repopulse::cli::cmd_segment(config, std::cerr);
  if (*sweep) return repopulse::cli::cmd_sweep(config, std::cerr);
  if (*gen) return repopulse::cli::cmd_generate(config, std::cerr);
  return repopulse::cli::cmd_bench_synthetic(config, std::cerr);
}
