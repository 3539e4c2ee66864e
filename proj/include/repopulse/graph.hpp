#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "repopulse/ingest.hpp"

namespace repopulse {

/// User-repository interaction graph. Edges only ever join a user to a repo.
class BipartiteGraph {
 public:
  /// Idempotent for repeated pairs.
  void add_interaction(const std::string& user, const std::string& repo);

  const std::set<std::string>& users() const { return users_; }
  const std::set<std::string>& repos() const { return repos_; }
  const std::set<std::pair<std::string, std::string>>& edges() const { return edges_; }

 private:
  std::set<std::string> users_;
  std::set<std::string> repos_;
  std::set<std::pair<std::string, std::string>> edges_;
};

/// Disjoint-set forest with path compression and union by size.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n = 0);

  std::size_t add();
  std::size_t find(std::size_t x);
  /// Returns false if already joined.
  bool unite(std::size_t a, std::size_t b);
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

class UnknownRepo : public std::out_of_range {
 public:
  explicit UnknownRepo(const std::string& repo) : std::out_of_range("unknown repo '" + repo + "'") {}
};

/// Connected components of the cumulative graph, restricted to a tracked
/// repo list. A component's label is the smallest tracked-repo index it
/// contains, so labels do not depend on traversal order.
struct ComponentAssignment {
  int window_index = 0;
  std::vector<std::string> repos;
  std::vector<int> label;            // aligned with repos
  std::map<int, int> component_sizes;  // label -> tracked repos in component

  int label_of(const std::string& repo) const;
  int size_of(const std::string& repo) const { return component_sizes.at(label_of(repo)); }
  bool contains(const std::string& repo) const;
};

/// Builds an assignment from raw per-repo group ids (any labelling);
/// canonicalizes labels and computes component sizes.
ComponentAssignment make_assignment(int window_index, std::vector<std::string> repos, std::vector<int> raw_group);

/// Components over every event falling in windows [0, window].
ComponentAssignment components_at(std::span<const EventRecord> events, const TimeGrid& grid, int window,
                                  const std::vector<std::string>& repos);

/// Components for every window of the grid in one incremental sweep.
std::vector<ComponentAssignment> component_series(std::span<const EventRecord> events, const TimeGrid& grid,
                                                  const std::vector<std::string>& repos);

/// Size-share of the repo's component: size / total_repos, in (0, 1].
double component_feature(const ComponentAssignment& assignment, const std::string& repo, int total_repos);

/// R x T matrix of component size-shares, rows in `repos` order.
Eigen::MatrixXd component_feature_matrix(const std::vector<ComponentAssignment>& series,
                                         const std::vector<std::string>& repos);

// `window,repo_id,component_label,component_size`
void write_components_csv(std::ostream& out, const std::vector<ComponentAssignment>& series);

}  // namespace repopulse
