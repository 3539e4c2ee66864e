#include "config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

namespace repopulse::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError("'" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  for (const auto& item : split_list(text)) out.push_back(parse_number<int>(key, item));
  return out;
}

template <class T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, std::string>) {
      out += items[i];
    } else {
      out += std::to_string(items[i]);
    }
  }
  return out;
}

struct Field {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define STRING_FIELD(f) \
  Field{#f, [](RunConfig& c, const std::string& v) { c.f = v; }, [](const RunConfig& c) { return c.f; }}
#define INT_FIELD(f)                                                                           \
  Field{#f, [](RunConfig& c, const std::string& v) { c.f = parse_number<int>(#f, v); }, \
        [](const RunConfig& c) { return std::to_string(c.f); }}
#define DOUBLE_FIELD(f)                                                                           \
  Field{#f, [](RunConfig& c, const std::string& v) { c.f = parse_number<double>(#f, v); }, \
        [](const RunConfig& c) { return format_double(c.f); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      STRING_FIELD(events),
      STRING_FIELD(topics),
      STRING_FIELD(communities),
      STRING_FIELD(actual),
      Field{"predicted", [](RunConfig& c, const std::string& v) { c.predicted = split_list(v); },
            [](const RunConfig& c) { return join(c.predicted); }},
      STRING_FIELD(out_dir),
      STRING_FIELD(start),
      STRING_FIELD(event_type),
      INT_FIELD(window_days),
      INT_FIELD(top_k),
      INT_FIELD(loopback),
      DOUBLE_FIELD(split_ratio),
      DOUBLE_FIELD(holdout_fraction),
      Field{"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      Field{"hidden_sizes", [](RunConfig& c, const std::string& v) { c.hidden_sizes = parse_int_list("hidden_sizes", v); },
            [](const RunConfig& c) { return join(c.hidden_sizes); }},
      DOUBLE_FIELD(learning_rate),
      INT_FIELD(max_epochs),
      INT_FIELD(patience),
      DOUBLE_FIELD(improvement_epsilon),
      INT_FIELD(batch_size),
      DOUBLE_FIELD(weight_decay),
      INT_FIELD(p_max),
      INT_FIELD(d_max),
      INT_FIELD(q_max),
      STRING_FIELD(arima_criterion),
      Field{"loopbacks", [](RunConfig& c, const std::string& v) { c.loopbacks = parse_int_list("loopbacks", v); },
            [](const RunConfig& c) { return join(c.loopbacks); }},
      Field{"synthetic", [](RunConfig& c, const std::string& v) { c.synthetic = parse_bool("synthetic", v); },
            [](const RunConfig& c) { return std::string(c.synthetic ? "true" : "false"); }},
      INT_FIELD(clusters),
      INT_FIELD(segments),
      INT_FIELD(kmeans_batch),
      INT_FIELD(kmeans_iterations),
      INT_FIELD(synth_repos),
      INT_FIELD(synth_windows),
      INT_FIELD(synth_components),
      DOUBLE_FIELD(coupling),
      DOUBLE_FIELD(base_rate),
      DOUBLE_FIELD(driver_phi),
      DOUBLE_FIELD(driver_sigma),
  };
  return table;
}

#undef STRING_FIELD
#undef INT_FIELD
#undef DOUBLE_FIELD

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void RunConfig::validate() const {
  require(event_type == "fork" || event_type == "watch", "event_type must be fork or watch");
  require(window_days >= 1, "window_days must be >= 1");
  require(top_k >= 1, "top_k must be >= 1");
  require(loopback >= 1, "loopback must be >= 1");
  require(split_ratio > 0.0 && split_ratio < 1.0, "split_ratio must lie in (0, 1)");
  require(holdout_fraction >= 0.0 && holdout_fraction < 1.0, "holdout_fraction must lie in [0, 1)");
  require(!hidden_sizes.empty(), "hidden_sizes must list at least one layer");
  for (int h : hidden_sizes) require(h >= 1, "hidden_sizes entries must be >= 1");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(max_epochs >= 1, "max_epochs must be >= 1");
  require(patience >= 1, "patience must be >= 1");
  require(improvement_epsilon >= 0.0, "improvement_epsilon must be >= 0");
  require(weight_decay >= 0.0 && learning_rate * weight_decay < 1.0, "weight_decay must be >= 0 with learning_rate * weight_decay < 1");
  require(batch_size >= 0, "batch_size must be >= 0 (0 = full batch)");
  require(p_max >= 0 && d_max >= 0 && q_max >= 0, "ARIMA bounds must be >= 0");
  require(arima_criterion == "aic" || arima_criterion == "bic", "arima_criterion must be aic or bic");
  require(!loopbacks.empty(), "loopbacks must list at least one value");
  for (int l : loopbacks) require(l >= 1, "loopbacks entries must be >= 1");
  require(clusters >= 1 && segments >= 1, "clusters and segments must be >= 1");
  require(kmeans_batch >= 1 && kmeans_iterations >= 0, "k-means batch must be >= 1, iterations >= 0");
  require(synth_repos >= 1 && synth_components >= 1 && synth_components <= synth_repos,
          "synthetic repos/components out of range");
  require(synth_windows >= 20, "synth_windows must be >= 20");
  require(coupling >= 0.0 && coupling <= 1.0, "coupling must lie in [0, 1]");
  require(base_rate > 0.0, "base_rate must be > 0");
  require(driver_phi > -1.0 && driver_phi < 1.0, "driver_phi must lie in (-1, 1)");
  require(driver_sigma > 0.0, "driver_sigma must be > 0");
}

void set_field(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.name) {
      f.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& config, std::istream& in) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    set_field(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void load_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  apply_config_text(config, in);
}

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.name, f.get(config));
  return out;
}

void write_config(std::ostream& out, const RunConfig& config) {
  for (const auto& [k, v] : config_entries(config)) out << k << " = " << v << '\n';
}

}  // namespace repopulse::cli
