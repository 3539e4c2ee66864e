#include "repopulse/graph.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <unordered_map>

namespace repopulse {

void BipartiteGraph::add_interaction(const std::string& user, const std::string& repo) {
  users_.insert(user);
  repos_.insert(repo);
  edges_.emplace(user, repo);
}

UnionFind::UnionFind(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }

std::size_t UnionFind::add() {
  parent_.push_back(parent_.size());
  size_.push_back(1);
  return parent_.size() - 1;
}

std::size_t UnionFind::find(std::size_t x) {
  std::size_t root = x;
  while (parent_[root] != root) root = parent_[root];
  while (parent_[x] != root) {
    const std::size_t next = parent_[x];
    parent_[x] = root;
    x = next;
  }
  return root;
}

bool UnionFind::unite(std::size_t a, std::size_t b) {
  a = find(a);
  b = find(b);
  if (a == b) return false;
  if (size_[a] < size_[b]) std::swap(a, b);
  parent_[b] = a;
  size_[a] += size_[b];
  return true;
}

int ComponentAssignment::label_of(const std::string& repo) const {
  auto it = std::find(repos.begin(), repos.end(), repo);
  if (it == repos.end()) throw UnknownRepo(repo);
  return label[static_cast<std::size_t>(it - repos.begin())];
}

bool ComponentAssignment::contains(const std::string& repo) const {
  return std::find(repos.begin(), repos.end(), repo) != repos.end();
}

ComponentAssignment make_assignment(int window_index, std::vector<std::string> repos, std::vector<int> raw_group) {
  ComponentAssignment a;
  a.window_index = window_index;
  a.label.resize(repos.size());
  std::unordered_map<int, int> canonical;  // raw group -> smallest repo index
  for (std::size_t r = 0; r < repos.size(); ++r) {
    auto [it, inserted] = canonical.emplace(raw_group[r], static_cast<int>(r));
    a.label[r] = it->second;
    ++a.component_sizes[it->second];
  }
  a.repos = std::move(repos);
  return a;
}

namespace {

// Incremental connectivity over users and tracked repos. Repos occupy
// nodes [0, R); users are appended as they appear.
class ComponentTracker {
 public:
  explicit ComponentTracker(const std::vector<std::string>& repos) : repos_(repos), uf_(repos.size()) {
    for (std::size_t r = 0; r < repos.size(); ++r) repo_node_.emplace(repos[r], r);
  }

  void add(const EventRecord& e) {
    auto repo_it = repo_node_.find(e.repo_id);
    if (repo_it == repo_node_.end()) {
      // Untracked repos still connect users, which can join tracked repos.
      repo_it = repo_node_.emplace(e.repo_id, uf_.add()).first;
    }
    auto user_it = user_node_.find(e.user_id);
    if (user_it == user_node_.end()) user_it = user_node_.emplace(e.user_id, uf_.add()).first;
    uf_.unite(user_it->second, repo_it->second);
  }

  ComponentAssignment snapshot(int window) {
    std::vector<int> raw(repos_.size());
    for (std::size_t r = 0; r < repos_.size(); ++r) raw[r] = static_cast<int>(uf_.find(r));
    return make_assignment(window, repos_, std::move(raw));
  }

 private:
  std::vector<std::string> repos_;
  UnionFind uf_;
  std::unordered_map<std::string, std::size_t> repo_node_;
  std::unordered_map<std::string, std::size_t> user_node_;
};

}  // namespace

ComponentAssignment components_at(std::span<const EventRecord> events, const TimeGrid& grid, int window,
                                  const std::vector<std::string>& repos) {
  ComponentTracker tracker(repos);
  const Timestamp cutoff = grid.window_start(window + 1);
  for (const auto& e : events) {
    if (e.timestamp < cutoff) tracker.add(e);
  }
  return tracker.snapshot(window);
}

std::vector<ComponentAssignment> component_series(std::span<const EventRecord> events, const TimeGrid& grid,
                                                  const std::vector<std::string>& repos) {
  std::vector<const EventRecord*> sorted;
  sorted.reserve(events.size());
  for (const auto& e : events) sorted.push_back(&e);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const EventRecord* a, const EventRecord* b) { return a->timestamp < b->timestamp; });

  ComponentTracker tracker(repos);
  std::vector<ComponentAssignment> series;
  series.reserve(static_cast<std::size_t>(grid.num_windows));
  std::size_t next = 0;
  for (int w = 0; w < grid.num_windows; ++w) {
    const Timestamp cutoff = grid.window_start(w + 1);
    while (next < sorted.size() && sorted[next]->timestamp < cutoff) tracker.add(*sorted[next++]);
    series.push_back(tracker.snapshot(w));
  }
  return series;
}

double component_feature(const ComponentAssignment& assignment, const std::string& repo, int total_repos) {
  if (total_repos <= 0) throw std::invalid_argument("total_repos must be positive");
  return static_cast<double>(assignment.size_of(repo)) / total_repos;
}

Eigen::MatrixXd component_feature_matrix(const std::vector<ComponentAssignment>& series,
                                         const std::vector<std::string>& repos) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(repos.size()), static_cast<Eigen::Index>(series.size()));
  const int total = static_cast<int>(repos.size());
  for (std::size_t t = 0; t < series.size(); ++t) {
    for (std::size_t r = 0; r < repos.size(); ++r) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) = component_feature(series[t], repos[r], total);
    }
  }
  return m;
}

void write_components_csv(std::ostream& out, const std::vector<ComponentAssignment>& series) {
  out << "window,repo_id,component_label,component_size\n";
  for (const auto& a : series) {
    for (std::size_t r = 0; r < a.repos.size(); ++r) {
      out << a.window_index << ',' << a.repos[r] << ',' << a.label[r] << ','
          << a.component_sizes.at(a.label[r]) << '\n';
    }
  }
}

}  // namespace repopulse
