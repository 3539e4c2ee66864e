#include "repopulse/checkpoint.hpp"

#include <istream>
#include <ostream>

#include <json.hpp>

namespace repopulse::lstm {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kGateSuffix[kGates] = {"i", "f", "g", "o"};

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw std::runtime_error("checkpoint: '" + what + "' must be a non-empty list");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw std::runtime_error("checkpoint: ragged matrix '" + what + "'");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw std::runtime_error("checkpoint: '" + what + "' must be a list");
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

void save_checkpoint(std::ostream& out, const Model& model, const CheckpointMeta& meta) {
  json doc;
  json config = json::object();
  for (const auto& [k, v] : meta.config) config[k] = v;
  doc["config"] = std::move(config);
  doc["seed"] = model.seed;
  doc["loopback"] = model.loopback;
  doc["repo_ids"] = meta.repo_ids;
  doc["scaler"] = {{"mean", vector_to_json(model.scaler.mean)}, {"std", vector_to_json(model.scaler.stddev)}};
  json layers = json::array();
  for (const auto& l : model.params.layers) {
    json jl;
    for (int g = 0; g < kGates; ++g) {
      jl[std::string("W") + kGateSuffix[g]] = matrix_to_json(l.W[g]);
      jl[std::string("U") + kGateSuffix[g]] = matrix_to_json(l.U[g]);
      jl[std::string("b") + kGateSuffix[g]] = vector_to_json(l.b[g]);
    }
    layers.push_back(std::move(jl));
  }
  doc["layers"] = std::move(layers);
  doc["readout"] = {{"W", matrix_to_json(model.params.readout.W)}, {"b", vector_to_json(model.params.readout.b)}};
  out << doc.dump(1) << '\n';
}

Checkpoint load_checkpoint(std::istream& in) {
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
  Checkpoint ck;
  auto& model = ck.model;
  try {
    model.seed = doc.at("seed").get<std::uint64_t>();
    model.loopback = doc.at("loopback").get<int>();
    for (const auto& [k, v] : doc.at("config").items()) ck.meta.config.emplace_back(k, v.get<std::string>());
    ck.meta.repo_ids = doc.at("repo_ids").get<std::vector<std::string>>();
    model.scaler.mean = vector_from_json(doc.at("scaler").at("mean"), "scaler.mean");
    model.scaler.stddev = vector_from_json(doc.at("scaler").at("std"), "scaler.std");
    for (const auto& jl : doc.at("layers")) {
      LayerParams l;
      for (int g = 0; g < kGates; ++g) {
        const std::string s = kGateSuffix[g];
        l.W[g] = matrix_from_json(jl.at("W" + s), "W" + s);
        l.U[g] = matrix_from_json(jl.at("U" + s), "U" + s);
        l.b[g] = vector_from_json(jl.at("b" + s), "b" + s);
      }
      model.params.layers.push_back(std::move(l));
    }
    model.params.readout.W = matrix_from_json(doc.at("readout").at("W"), "readout.W");
    model.params.readout.b = vector_from_json(doc.at("readout").at("b"), "readout.b");
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
  if (model.params.layers.empty()) throw std::runtime_error("checkpoint: no layers");
  Eigen::Index fan_in = model.params.layers.front().inputs();
  for (const auto& l : model.params.layers) {
    for (int g = 0; g < kGates; ++g) {
      if (l.W[g].cols() != fan_in || l.W[g].rows() != l.hidden() || l.U[g].cols() != l.hidden() ||
          l.b[g].size() != l.hidden()) {
        throw std::runtime_error("checkpoint: inconsistent layer shapes");
      }
    }
    fan_in = l.hidden();
  }
  if (model.params.readout.W.cols() != fan_in || model.params.readout.b.size() != model.outputs() ||
      model.scaler.size() != model.outputs()) {
    throw std::runtime_error("checkpoint: inconsistent readout or scaler shape");
  }
  return ck;
}

}  // namespace repopulse::lstm
