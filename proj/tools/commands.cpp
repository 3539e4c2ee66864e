#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "repopulse/checkpoint.hpp"
#include "repopulse/dataset.hpp"
#include "repopulse/graph.hpp"
#include "repopulse/ingest.hpp"
#include "repopulse/segment.hpp"
#include "synthetic.hpp"

namespace repopulse::cli {

namespace fs = std::filesystem;

namespace {

template <class F>
int guarded(std::ostream& log, F&& body) {
  try {
    return body();
  } catch (const MissingInput& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  } catch (const IoError& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  }
}

fs::path output_path(const RunConfig& config, const std::string& name) {
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + config.out_dir + "': " + ec.message());
  return fs::path(config.out_dir) / name;
}

std::ofstream open_output(const RunConfig& config, const std::string& name) {
  const auto path = output_path(config, name);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

std::ifstream open_input(const std::string& path, const std::string& what) {
  if (path.empty()) throw MissingInput(what + " is required");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("cannot read " + what + " '" + path + "'");
  return in;
}

void finish(std::ofstream& out, const std::string& name) {
  out.flush();
  if (!out) throw IoError("write failed for '" + name + "'");
}

EventType event_type_of(const RunConfig& config) {
  if (config.event_type == "fork") return EventType::Fork;
  if (config.event_type == "watch") return EventType::Watch;
  throw ConfigError("event_type must be fork or watch, got '" + config.event_type + "'");
}

std::vector<EventRecord> read_events(const RunConfig& config, std::ostream& log) {
  if (config.events.empty()) throw MissingInput("an events file is required (--events)");
  if (!fs::exists(config.events)) throw MissingInput("events file '" + config.events + "' does not exist");
  auto parsed = parse_events_file(config.events);
  if (!parsed.errors.empty()) {
    log << "warning: " << parsed.errors.size() << " malformed line(s) skipped in '" << config.events << "'\n";
  }
  return std::move(parsed.records);
}

TimeGrid grid_for(std::span<const EventRecord> events, const RunConfig& config) {
  if (config.start.empty()) return grid_covering(events, config.window_days);
  const auto start = parse_utc(config.start);
  if (!start) throw ConfigError("start must look like 2015-01-01T00:00:00Z, got '" + config.start + "'");
  TimeGrid grid{*start, config.window_days, 1};
  for (const auto& e : events) {
    if (e.timestamp < grid.start) throw EventOutOfRange(e.timestamp);
    const auto offset = (e.timestamp - grid.start) / grid.window_length();
    grid.num_windows = std::max(grid.num_windows, static_cast<int>(offset) + 1);
  }
  return grid;
}

std::vector<std::string> window_labels(const std::vector<int>& windows) {
  std::vector<std::string> labels;
  for (int w : windows) labels.push_back("w" + std::to_string(w));
  return labels;
}

struct Prepared {
  std::vector<EventRecord> events;  // filtered to the configured type
  TimeGrid grid;
  CountPanel panel;  // top-k repos
  std::vector<ComponentAssignment> components;
  Eigen::MatrixXd counts;
  Eigen::MatrixXd comp;
};

Prepared prepare(const RunConfig& config, std::ostream& log) {
  config.validate();
  Prepared p;
  const auto all = read_events(config, log);
  EventTypeSet keep;
  keep.insert(event_type_of(config));
  p.events = filter_events(all, keep);
  if (p.events.empty()) throw std::invalid_argument("no " + config.event_type + " events in '" + config.events + "'");
  p.grid = grid_for(p.events, config);
  const auto binned = bin_events(p.events, p.grid, distinct_repos(p.events));
  const auto k = std::min(static_cast<std::size_t>(config.top_k), binned.panel.rows());
  p.panel = select_top_k(binned.panel, k);
  p.components = component_series(p.events, p.grid, p.panel.repo_ids());
  p.counts = to_matrix(p.panel);
  p.comp = component_feature_matrix(p.components, p.panel.repo_ids());
  log << "dataset: " << p.panel.rows() << " repos x " << p.panel.cols() << " windows\n";
  return p;
}

void write_history_csv(std::ostream& out, const lstm::TrainingHistory& h) {
  out << std::setprecision(17) << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < h.train_loss.size(); ++e) {
    out << e << ',' << h.train_loss[e] << ',';
    if (e < h.val_loss.size()) out << h.val_loss[e];
    out << '\n';
  }
}

std::map<std::string, std::string> parse_predicted(const std::vector<std::string>& specs) {
  std::map<std::string, std::string> out;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw ConfigError("--predicted expects name=path, got '" + spec + "'");
    }
    if (!out.emplace(spec.substr(0, eq), spec.substr(eq + 1)).second) {
      throw ConfigError("model name '" + spec.substr(0, eq) + "' given twice");
    }
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

void write_summary_row(std::ostream& out, const std::string& method, const segment::SegmentSet& set) {
  double mean_h = 0.0;
  for (const auto& s : set.segments) mean_h += s.shannon;
  if (!set.segments.empty()) mean_h /= static_cast<double>(set.segments.size());
  out << method << ',' << set.segments.size() << ',' << set.topic_coverage << ',' << mean_h << '\n';
}

}  // namespace

SyntheticSpec synthetic_spec(const RunConfig& config) {
  SyntheticSpec spec;
  spec.repos = config.synth_repos;
  spec.windows = config.synth_windows;
  spec.components = config.synth_components;
  spec.coupling = config.coupling;
  spec.base_rate = config.base_rate;
  spec.driver_phi = config.driver_phi;
  spec.driver_sigma = config.driver_sigma;
  spec.window_days = config.window_days;
  spec.seed = config.seed;
  return spec;
}

ForecastSetup forecast_setup(const RunConfig& config) {
  ForecastSetup s;
  s.loopback = config.loopback;
  s.split_ratio = config.split_ratio;
  s.holdout_fraction = config.holdout_fraction;
  s.hidden_sizes = config.hidden_sizes;
  s.seed = config.seed;
  s.train.learning_rate = config.learning_rate;
  s.train.max_epochs = config.max_epochs;
  s.train.patience = config.patience;
  s.train.improvement_epsilon = config.improvement_epsilon;
  s.train.batch_size = config.batch_size;
  s.train.weight_decay = config.weight_decay;
  s.arima_bounds = {config.p_max, config.d_max, config.q_max,
                    config.arima_criterion == "bic" ? arima::Criterion::Bic : arima::Criterion::Aic};
  return s;
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m, const std::vector<std::string>& repo_ids,
                      const std::vector<int>& windows) {
  if (static_cast<std::size_t>(m.rows()) != repo_ids.size() || static_cast<std::size_t>(m.cols()) != windows.size()) {
    throw std::invalid_argument("matrix shape does not match its labels");
  }
  const auto precision = out.precision(17);
  out << "repo_id";
  for (int w : windows) out << ",w" << w;
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << repo_ids[static_cast<std::size_t>(r)];
    for (Eigen::Index t = 0; t < m.cols(); ++t) out << ',' << m(r, t);
    out << '\n';
  }
  out.precision(precision);
}

LabeledMatrix read_matrix_csv(std::istream& in) {
  LabeledMatrix out;
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("matrix CSV is empty");
  auto header = split_csv_line(line);
  if (header.empty() || header[0] != "repo_id") throw std::invalid_argument("matrix CSV must start with repo_id");
  out.column_labels.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::invalid_argument("matrix CSV line " + std::to_string(line_no) + ": expected " +
                                  std::to_string(header.size()) + " cells");
    }
    out.repo_ids.push_back(cells[0]);
    std::vector<double> row;
    for (std::size_t j = 1; j < cells.size(); ++j) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[j], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cells[j].size()) {
        throw std::invalid_argument("matrix CSV line " + std::to_string(line_no) + ": bad number '" + cells[j] + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(out.column_labels.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t t = 0; t < rows[r].size(); ++t) {
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) = rows[r][t];
    }
  }
  return out;
}

int cmd_ingest(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    config.validate();
    if (config.events.empty()) throw MissingInput("an events file is required (--events)");
    const auto parsed = parse_events_file(config.events);
    EventTypeSet keep;
    keep.insert(event_type_of(config));
    const auto events = filter_events(parsed.records, keep);

    CountPanel panel;
    std::size_t discarded = 0;
    if (!events.empty()) {
      auto binned = bin_events(events, grid_for(events, config), distinct_repos(events));
      panel = std::move(binned.panel);
      discarded = binned.discarded;
    }

    auto out = open_output(config, "panel.csv");
    if (events.empty()) {
      out << "repo_id\n";  // no repos, no windows
    } else {
      write_panel_csv(out, panel);
    }
    finish(out, "panel.csv");

    auto report = open_output(config, "parse_report.txt");
    report << "source: " << config.events << '\n'
           << "records: " << parsed.records.size() << '\n'
           << "malformed: " << parsed.errors.size() << '\n'
           << "kept_" << config.event_type << ": " << events.size() << '\n'
           << "discarded: " << discarded << '\n'
           << "repos: " << panel.rows() << '\n'
           << "windows: " << (panel.rows() ? panel.cols() : 0) << '\n';
    if (panel.rows()) report << "grid_start: " << format_utc(panel.grid().start) << '\n';
    for (const auto& e : parsed.errors) report << "line " << e.line_no << ": " << e.reason << '\n';
    finish(report, "parse_report.txt");

    log << "ingest: " << events.size() << " events into " << panel.rows() << " repos\n";
    if (!parsed.errors.empty()) {
      log << "error: " << parsed.errors.size() << " malformed line(s); see parse_report.txt\n";
      return 2;
    }
    return 0;
  });
}

int cmd_train(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    const auto data = prepare(config, log);
    const auto setup = forecast_setup(config);
    const auto run = run_lstm(data.counts, data.comp, setup);
    for (const auto& w : run.warnings) log << "warning: " << w << '\n';

    auto entries = config_entries(config);
    // where the run was written is not part of the model
    std::erase_if(entries, [](const auto& kv) { return kv.first == "out_dir"; });
    lstm::CheckpointMeta meta{std::move(entries), data.panel.repo_ids()};
    auto model_out = open_output(config, "model.json");
    lstm::save_checkpoint(model_out, run.model, meta);
    finish(model_out, "model.json");

    auto hist = open_output(config, "history.csv");
    write_history_csv(hist, run.history);
    finish(hist, "history.csv");

    auto manifest = open_output(config, "manifest.csv");
    write_manifest_csv(manifest, run.split);
    finish(manifest, "manifest.csv");

    auto pred = open_output(config, "lstm_predictions.csv");
    write_matrix_csv(pred, run.predicted, data.panel.repo_ids(), run.eval_windows);
    finish(pred, "lstm_predictions.csv");

    auto actual = open_output(config, "actual.csv");
    write_matrix_csv(actual, columns(data.counts, run.eval_windows), data.panel.repo_ids(), run.eval_windows);
    finish(actual, "actual.csv");

    auto comps = open_output(config, "components.csv");
    write_components_csv(comps, data.components);
    finish(comps, "components.csv");

    auto eff = open_output(config, "effective_config.txt");
    write_config(eff, config);
    finish(eff, "effective_config.txt");

    log << "train: best epoch " << run.history.best_epoch << ", stopped at " << run.history.stopped_epoch
        << (run.history.early_stopped ? " (early stop)" : "") << '\n';
    return 0;
  });
}

int cmd_fit_arima(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    const auto data = prepare(config, log);
    const auto run = run_arima(data.counts, forecast_setup(config));
    for (std::size_t r = 0; r < run.fits.size(); ++r) {
      if (!run.fits[r].error.empty()) {
        log << "warning: " << data.panel.repo_ids()[r] << ": " << run.fits[r].error << "; using a random walk\n";
      }
    }
    auto fits = open_output(config, "arima_fits.csv");
    write_fit_report_csv(fits, data.panel.repo_ids(), run.fits);
    finish(fits, "arima_fits.csv");

    auto pred = open_output(config, "arima_predictions.csv");
    write_matrix_csv(pred, run.predicted, data.panel.repo_ids(), run.eval_windows);
    finish(pred, "arima_predictions.csv");

    auto actual = open_output(config, "actual.csv");
    write_matrix_csv(actual, columns(data.counts, run.eval_windows), data.panel.repo_ids(), run.eval_windows);
    finish(actual, "actual.csv");
    log << "fit-arima: " << run.fits.size() << " series, " << run.eval_windows.size() << " forecast windows\n";
    return 0;
  });
}

int cmd_evaluate(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    config.validate();
    auto actual_in = open_input(config.actual, "actual matrix (--actual)");
    const auto actual = read_matrix_csv(actual_in);
    const auto specs = parse_predicted(config.predicted);
    if (specs.empty()) throw MissingInput("at least one --predicted name=path is required");

    std::vector<NamedPrediction> models;
    for (const auto& [name, path] : specs) {
      auto in = open_input(path, "predictions for '" + name + "'");
      auto m = read_matrix_csv(in);
      if (m.repo_ids != actual.repo_ids || m.column_labels != actual.column_labels) {
        throw std::invalid_argument("predictions for '" + name + "' do not match the actual matrix labels");
      }
      models.push_back({name, std::move(m.values)});
    }
    const auto report = compare(models, actual.values, actual.repo_ids, actual.column_labels);

    auto out = open_output(config, "report.csv");
    write_report_csv(out, report);
    finish(out, "report.csv");
    auto win = open_output(config, "winners.csv");
    write_winners_csv(win, report);
    finish(win, "winners.csv");
    for (const auto& s : report.models) log << "evaluate: " << s.model << " rmse_total " << s.total << '\n';
    return 0;
  });
}

int cmd_segment(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    config.validate();
    const auto events = read_events(config, log);
    if (events.empty()) throw std::invalid_argument("no events to segment");
    auto topics_in = open_input(config.topics, "topic map (--topics)");
    const auto topics = segment::read_topic_map_csv(topics_in);

    const auto grid = grid_for(events, config);
    const auto repos = distinct_repos(events);
    const auto assignment = components_at(events, grid, grid.num_windows - 1, repos);
    const auto features = segment::build_user_features(events, topics, assignment);
    const auto& profiles = features.profiles;
    const auto topic_count = features.vocabulary.size();

    std::vector<segment::Community> communities;
    if (config.communities.empty()) {
      communities = segment::communities_from_graph(events);
    } else {
      auto in = open_input(config.communities, "community file (--communities)");
      communities = segment::communities_from_index(segment::read_communities_csv(in), profiles);
    }
    const auto community_of = segment::community_index(communities);
    for (const auto& p : profiles) {
      if (!community_of.count(p.user_id)) {
        throw std::invalid_argument("user '" + p.user_id + "' has no community");
      }
    }
    for (auto& c : communities) c.label = segment::community_topic_label(c, profiles, topic_count);

    const int k = std::min<int>(config.clusters, static_cast<int>(profiles.size()));
    const auto clustered = [&](bool with_network) {
      const auto points = segment::feature_matrix(profiles, with_network);
      const auto km = segment::minibatch_kmeans(points, k, config.kmeans_batch, config.kmeans_iterations, config.seed);
      return segment::segments_from_clusters(profiles, km.assignment, community_of, topic_count);
    };
    const auto full = clustered(true);
    const auto topics_only = clustered(false);
    const auto target = std::min<std::size_t>(static_cast<std::size_t>(config.segments), communities.size());
    auto ensemble = segment::ensemble_agglomerate(communities, target);
    for (auto& s : ensemble.segments) s.shannon = segment::shannon_index(s.users, community_of);

    auto write = [&](const std::string& name, const segment::SegmentSet& set) {
      auto out = open_output(config, name);
      segment::write_segment_report_csv(out, set, features.vocabulary);
      finish(out, name);
    };
    write("segments_kmeans.csv", full);
    write("segments_kmeans_topics.csv", topics_only);
    write("segments_ensemble.csv", ensemble);

    auto summary = open_output(config, "segment_summary.csv");
    summary << std::setprecision(17) << "method,segments,topic_coverage,mean_shannon_H\n";
    write_summary_row(summary, "kmeans", full);
    write_summary_row(summary, "kmeans_topics", topics_only);
    write_summary_row(summary, "ensemble", ensemble);
    finish(summary, "segment_summary.csv");
    log << "segment: " << profiles.size() << " users, " << communities.size() << " communities\n";
    return 0;
  });
}

int cmd_sweep(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    config.validate();
    Eigen::MatrixXd counts, comp;
    if (config.synthetic) {
      const auto data = generate_synthetic(synthetic_spec(config));
      counts = to_matrix(bin_events(data.events, data.grid, data.repo_ids).panel);
      comp = component_feature_matrix(component_series(data.events, data.grid, data.repo_ids), data.repo_ids);
    } else {
      auto data = prepare(config, log);
      counts = std::move(data.counts);
      comp = std::move(data.comp);
    }
    const auto rows = sweep_loopback(counts, comp, config.loopbacks, forecast_setup(config));
    auto out = open_output(config, "sweep.csv");
    write_sweep_csv(out, rows);
    finish(out, "sweep.csv");
    const auto best = best_loopback(rows);
    if (!best) {
      log << "error: no loop-back produced a finite RMSE\n";
      return 2;
    }
    log << "sweep: best loop-back " << *best << '\n';
    return 0;
  });
}

int cmd_generate(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    config.validate();
    const auto data = generate_synthetic(synthetic_spec(config));
    auto out = open_output(config, "events.jsonl");
    write_events_jsonl(out, data.events);
    finish(out, "events.jsonl");
    log << "generate: " << data.events.size() << " events over " << data.repo_ids.size() << " repos\n";
    return 0;
  });
}

BenchResult run_bench(const RunConfig& config) {
  config.validate();
  const auto data = generate_synthetic(synthetic_spec(config));
  const auto counts = to_matrix(bin_events(data.events, data.grid, data.repo_ids).panel);
  const auto comp = component_feature_matrix(component_series(data.events, data.grid, data.repo_ids), data.repo_ids);

  auto setup = forecast_setup(config);
  auto choice = select_loopback(counts, comp, config.loopbacks, setup);
  setup.loopback = choice.loopback;
  const auto lstm_run = run_lstm(counts, comp, setup);
  const auto arima_run = run_arima(counts, setup);
  if (lstm_run.eval_windows != arima_run.eval_windows) throw std::logic_error("models scored on different windows");

  const auto actual = columns(counts, lstm_run.eval_windows);
  const auto labels = window_labels(lstm_run.eval_windows);
  BenchResult out;
  out.repo_ids = data.repo_ids;
  out.fits = arima_run.fits;
  out.loopback = std::move(choice);
  out.report = compare({{"lstm", lstm_run.predicted}, {"arima", arima_run.predicted}}, actual, data.repo_ids, labels);
  const auto& scaler = lstm_run.model.scaler;
  out.report_standardized = compare(
      {{"lstm", scaler.transform(lstm_run.predicted)}, {"arima", scaler.transform(arima_run.predicted)}},
      scaler.transform(actual), data.repo_ids, labels);
  out.lstm_total = out.report.models[0].total;
  out.arima_total = out.report.models[1].total;
  return out;
}

int cmd_bench_synthetic(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    const auto result = run_bench(config);
    auto report = open_output(config, "report.csv");
    write_report_csv(report, result.report);
    finish(report, "report.csv");
    auto report_std = open_output(config, "report_standardized.csv");
    write_report_csv(report_std, result.report_standardized, "standardized_");
    finish(report_std, "report_standardized.csv");
    auto win = open_output(config, "winners.csv");
    write_winners_csv(win, result.report);
    finish(win, "winners.csv");
    auto fits = open_output(config, "arima_fits.csv");
    write_fit_report_csv(fits, result.repo_ids, result.fits);
    finish(fits, "arima_fits.csv");
    auto sweep = open_output(config, "loopback_selection.csv");
    write_sweep_csv(sweep, result.loopback.sweep);
    finish(sweep, "loopback_selection.csv");
    log << std::setprecision(6) << "bench-synthetic: seed " << config.seed << " loop-back " << result.loopback.loopback
        << " lstm " << result.lstm_total
        << " arima " << result.arima_total << '\n';
    if (!std::isfinite(result.lstm_total) || !std::isfinite(result.arima_total)) return 2;
    return 0;
  });
}

}  // namespace repopulse::cli
