#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "repopulse/lstm.hpp"

namespace repopulse::lstm {

struct CheckpointMeta {
  std::vector<std::pair<std::string, std::string>> config;  // effective run configuration
  std::vector<std::string> repo_ids;
};

struct Checkpoint {
  Model model;
  CheckpointMeta meta;
};

// JSON document. Weights live under layers[k].{Wi,Ui,bi,Wf,Uf,bf,Wg,Ug,bg,Wo,Uo,bo}
// and readout.{W,b}; matrices are lists of rows. Doubles are written in
// shortest round-trip form, so loading restores every bit.
void save_checkpoint(std::ostream& out, const Model& model, const CheckpointMeta& meta = {});
Checkpoint load_checkpoint(std::istream& in);

}  // namespace repopulse::lstm
