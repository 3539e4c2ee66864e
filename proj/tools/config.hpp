#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace repopulse::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // inputs and outputs
  std::string events;
  std::string topics;
  std::string communities;
  std::string actual;
  std::vector<std::string> predicted;  // name=path
  std::string out_dir = ".";
  std::string start;  // optional grid start, ISO-8601 UTC

  // data
  std::string event_type = "watch";
  int window_days = 10;
  int top_k = 100;
  int loopback = 8;
  double split_ratio = 0.8;
  double holdout_fraction = 0.2;
  std::uint64_t seed = 1;

  // lstm
  std::vector<int> hidden_sizes{16, 16};
  double learning_rate = 0.01;
  int max_epochs = 1000;
  int patience = 100;
  double improvement_epsilon = 1e-6;
  int batch_size = 0;
  double weight_decay = 0.0;

  // arima
  int p_max = 5;
  int d_max = 2;
  int q_max = 5;
  std::string arima_criterion = "aic";  // aic or bic

  // sweep
  std::vector<int> loopbacks{2, 4, 6, 8, 10, 12};
  bool synthetic = false;

  // segmentation
  int clusters = 8;
  int segments = 4;
  int kmeans_batch = 32;
  int kmeans_iterations = 200;

  // synthetic generator
  int synth_repos = 10;
  int synth_windows = 120;
  int synth_components = 3;
  double coupling = 0.8;
  double base_rate = 30.0;
  double driver_phi = 0.5;
  double driver_sigma = 0.8;

  bool operator==(const RunConfig&) const = default;

  /// Throws ConfigError naming the first out-of-range field.
  void validate() const;
};

/// Flat `key = value` lines; `#` starts a comment. Unknown keys are errors.
void apply_config_text(RunConfig& config, std::istream& in);
void load_config_file(RunConfig& config, const std::string& path);
/// Sets one field from its textual form.
void set_field(RunConfig& config, const std::string& key, const std::string& value);

/// Every field as `key = value`, reloadable with apply_config_text.
void write_config(std::ostream& out, const RunConfig& config);
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config);

}  // namespace repopulse::cli
