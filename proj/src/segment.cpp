#include "repopulse/segment.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_map>

namespace repopulse::segment {

UserFeatures build_user_features(std::span<const EventRecord> events, const TopicMap& topics,
                                 const ComponentAssignment& assignment) {
  UserFeatures out;
  std::set<std::string> vocab;
  for (const auto& [repo, ts] : topics) vocab.insert(ts.begin(), ts.end());
  out.vocabulary.assign(vocab.begin(), vocab.end());
  std::unordered_map<std::string, std::size_t> topic_index;
  for (std::size_t k = 0; k < out.vocabulary.size(); ++k) topic_index.emplace(out.vocabulary[k], k);

  struct Tally {
    std::size_t events = 0;
    std::set<std::string> repos;
  };
  std::map<std::string, Tally> per_user;
  for (const auto& e : events) {
    auto& t = per_user[e.user_id];
    ++t.events;
    t.repos.insert(e.repo_id);
  }

  const int total_repos = static_cast<int>(assignment.repos.size());
  std::vector<std::array<double, 3>> raw;
  for (const auto& [user, tally] : per_user) {
    UserProfile p;
    p.user_id = user;
    p.topics.assign(out.vocabulary.size(), 0);
    double share = 0.0;
    for (const auto& repo : tally.repos) {
      if (auto it = topics.find(repo); it != topics.end()) {
        for (const auto& topic : it->second) p.topics[topic_index.at(topic)] = 1;
      }
      if (total_repos > 0 && assignment.contains(repo)) {
        share = std::max(share, component_feature(assignment, repo, total_repos));
      }
    }
    raw.push_back({static_cast<double>(tally.events), static_cast<double>(tally.repos.size()), share});
    out.profiles.push_back(std::move(p));
  }

  for (std::size_t f = 0; f < 3; ++f) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& r : raw) {
      lo = std::min(lo, r[f]);
      hi = std::max(hi, r[f]);
    }
    for (std::size_t u = 0; u < raw.size(); ++u) {
      out.profiles[u].network[f] = hi > lo ? (raw[u][f] - lo) / (hi - lo) : 0.0;
    }
  }
  return out;
}

Eigen::MatrixXd feature_matrix(const std::vector<UserProfile>& profiles, bool with_network) {
  if (profiles.empty()) return {};
  const auto topics = static_cast<Eigen::Index>(profiles.front().topics.size());
  const Eigen::Index cols = topics + (with_network ? 3 : 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(profiles.size()), cols);
  for (std::size_t u = 0; u < profiles.size(); ++u) {
    const auto row = static_cast<Eigen::Index>(u);
    for (Eigen::Index k = 0; k < topics; ++k) m(row, k) = profiles[u].topics[static_cast<std::size_t>(k)];
    if (with_network) {
      for (Eigen::Index f = 0; f < 3; ++f) m(row, topics + f) = profiles[u].network[static_cast<std::size_t>(f)];
    }
  }
  return m;
}

namespace {

double inertia_of(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centers, kernels::Exec exec) {
  std::vector<double> d2;
  kernels::nearest_centers(points, centers, exec, &d2);
  return std::accumulate(d2.begin(), d2.end(), 0.0);
}

std::size_t draw_index(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

}  // namespace

KMeansResult minibatch_kmeans(const Eigen::MatrixXd& points, int k, int batch_size, int iterations,
                              std::uint64_t seed, kernels::Exec exec) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (n == 0) throw EmptyInput("k-means needs at least one point");
  if (k < 1 || static_cast<std::size_t>(k) > n) throw std::invalid_argument("k must lie in [1, number of points]");
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (iterations < 0) throw std::invalid_argument("iterations must be non-negative");

  std::mt19937_64 rng(seed);
  Eigen::MatrixXd centers(k, points.cols());

  // k-means++ seeding.
  std::vector<bool> chosen(n, false);
  std::size_t first = draw_index(rng, n);
  centers.row(0) = points.row(static_cast<Eigen::Index>(first));
  chosen[first] = true;
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = (points.row(static_cast<Eigen::Index>(i)) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      const double target = static_cast<double>(rng() >> 11) * 0x1.0p-53 * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      if (pick == n) {
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // All remaining points coincide with a center; take the first unused one.
      pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
    }
    chosen[pick] = true;
    centers.row(c) = points.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(static_cast<Eigen::Index>(i)) - centers.row(c)).squaredNorm());
    }
  }

  KMeansResult result;
  result.initial_inertia = inertia_of(points, centers, exec);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t cursor = n;  // forces a shuffle before the first batch
  std::vector<long> updates(static_cast<std::size_t>(k), 0);
  const auto b = static_cast<std::size_t>(batch_size);
  Eigen::MatrixXd batch(static_cast<Eigen::Index>(b), points.cols());
  std::vector<std::size_t> batch_index(b);

  for (int it = 0; it < iterations; ++it) {
    for (std::size_t j = 0; j < b; ++j) {
      if (cursor == n) {
        for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[draw_index(rng, i + 1)]);
        cursor = 0;
      }
      batch_index[j] = perm[cursor++];
      batch.row(static_cast<Eigen::Index>(j)) = points.row(static_cast<Eigen::Index>(batch_index[j]));
    }
    const auto nearest = kernels::nearest_centers(batch, centers, exec);
    for (std::size_t j = 0; j < b; ++j) {
      const auto c = static_cast<std::size_t>(nearest[j]);
      const double eta = 1.0 / static_cast<double>(++updates[c]);
      auto center = centers.row(static_cast<Eigen::Index>(c));
      center += eta * (batch.row(static_cast<Eigen::Index>(j)) - center);
    }
  }

  std::vector<double> final_d2;
  result.assignment = kernels::nearest_centers(points, centers, exec, &final_d2);
  result.inertia = std::accumulate(final_d2.begin(), final_d2.end(), 0.0);
  result.centers = std::move(centers);
  return result;
}

TopicLabel majority_label(const std::vector<TopicLabel>& votes, std::size_t topic_count) {
  TopicLabel label(topic_count, 0);
  for (std::size_t k = 0; k < topic_count; ++k) {
    std::size_t yes = 0;
    for (const auto& v : votes) yes += v.at(k) ? 1 : 0;
    label[k] = 2 * yes > votes.size() ? 1 : 0;
  }
  return label;
}

TopicLabel community_topic_label(const Community& community, const std::vector<UserProfile>& profiles,
                                 std::size_t topic_count) {
  if (community.members.empty()) throw std::invalid_argument("community '" + community.id + "' has no members");
  std::vector<TopicLabel> votes;
  for (const auto& user : community.members) {
    auto it = std::lower_bound(profiles.begin(), profiles.end(), user,
                               [](const UserProfile& p, const std::string& u) { return p.user_id < u; });
    if (it == profiles.end() || it->user_id != user) {
      votes.emplace_back(topic_count, 0);  // no recorded interests
    } else {
      votes.push_back(it->topics);
    }
  }
  return majority_label(votes, topic_count);
}

double jaccard_distance(const TopicLabel& a, const TopicLabel& b) {
  if (a.size() != b.size()) throw std::invalid_argument("topic labels differ in length");
  std::size_t inter = 0, uni = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    inter += (a[k] && b[k]) ? 1 : 0;
    uni += (a[k] || b[k]) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

double shannon_from_counts(std::span<const std::size_t> counts) {
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (total == 0.0) throw std::invalid_argument("segment is empty");
  double h = 0.0;
  for (auto c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return h;
}

double shannon_index(std::span<const std::string> users, const CommunityOf& community_of) {
  if (users.empty()) throw std::invalid_argument("segment is empty");
  std::map<std::string, std::size_t> per_community;
  for (const auto& u : users) {
    auto it = community_of.find(u);
    if (it == community_of.end()) throw std::invalid_argument("user '" + u + "' has no community");
    ++per_community[it->second];
  }
  std::vector<std::size_t> counts;
  for (const auto& [c, n] : per_community) counts.push_back(n);
  return shannon_from_counts(counts);
}

int topic_coverage(const std::vector<Segment>& segments) {
  std::set<std::size_t> covered;
  for (const auto& s : segments) {
    for (std::size_t k = 0; k < s.label.size(); ++k) {
      if (s.label[k]) covered.insert(k);
    }
  }
  return static_cast<int>(covered.size());
}

SegmentSet ensemble_agglomerate(const std::vector<Community>& communities, std::size_t target_segments) {
  if (target_segments < 1 || target_segments > communities.size()) {
    throw std::invalid_argument("target segment count must lie in [1, number of communities]");
  }
  const std::size_t topic_count = communities.empty() ? 0 : communities.front().label.size();
  std::vector<Segment> groups;
  for (std::size_t c = 0; c < communities.size(); ++c) {
    groups.push_back({communities[c].label, {c}, communities[c].members, 0.0});
  }

  SegmentSet set;
  while (groups.size() > target_segments) {
    Merge best{0, 1, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < groups.size(); ++i) {
      for (std::size_t j = i + 1; j < groups.size(); ++j) {
        const double d = jaccard_distance(groups[i].label, groups[j].label);
        if (d < best.distance) best = {i, j, d};
      }
    }
    auto& left = groups[best.left];
    auto& right = groups[best.right];
    left.communities.insert(left.communities.end(), right.communities.begin(), right.communities.end());
    left.users.insert(left.users.end(), right.users.begin(), right.users.end());
    std::vector<TopicLabel> votes;
    for (auto c : left.communities) votes.push_back(communities[c].label);
    left.label = majority_label(votes, topic_count);
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(best.right));
    set.trace.push_back(best);
  }

  const auto community_of = community_index(communities);
  for (auto& g : groups) g.shannon = shannon_index(g.users, community_of);
  set.segments = std::move(groups);
  set.topic_coverage = topic_coverage(set.segments);
  return set;
}

SegmentSet segments_from_clusters(const std::vector<UserProfile>& profiles, const std::vector<int>& cluster,
                                  const CommunityOf& community_of, std::size_t topic_count) {
  if (cluster.size() != profiles.size()) throw std::invalid_argument("one cluster id per profile required");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t u = 0; u < profiles.size(); ++u) members[cluster[u]].push_back(u);
  SegmentSet set;
  for (const auto& [id, users] : members) {
    Segment s;
    std::vector<TopicLabel> votes;
    for (auto u : users) {
      s.users.push_back(profiles[u].user_id);
      votes.push_back(profiles[u].topics);
    }
    s.label = majority_label(votes, topic_count);
    s.shannon = shannon_index(s.users, community_of);
    set.segments.push_back(std::move(s));
  }
  set.topic_coverage = topic_coverage(set.segments);
  return set;
}

std::vector<Community> communities_from_graph(std::span<const EventRecord> events) {
  std::map<std::string, std::size_t> user_node, repo_node;
  for (const auto& e : events) user_node.emplace(e.user_id, 0);
  std::size_t next = 0;
  for (auto& [u, idx] : user_node) idx = next++;
  UnionFind uf(next);
  for (const auto& e : events) {
    auto it = repo_node.find(e.repo_id);
    if (it == repo_node.end()) it = repo_node.emplace(e.repo_id, uf.add()).first;
    uf.unite(user_node.at(e.user_id), it->second);
  }
  // Users are visited in sorted order, so the first user seen in a component is its smallest.
  std::map<std::size_t, std::size_t> root_to_community;
  std::vector<Community> out;
  for (const auto& [user, idx] : user_node) {
    const auto root = uf.find(idx);
    auto [it, inserted] = root_to_community.emplace(root, out.size());
    if (inserted) out.push_back({"c" + std::to_string(out.size()), {}, {}});
    out[it->second].members.push_back(user);
  }
  return out;
}

CommunityOf community_index(const std::vector<Community>& communities) {
  CommunityOf index;
  for (const auto& c : communities) {
    for (const auto& u : c.members) {
      if (!index.emplace(u, c.id).second) throw std::invalid_argument("user '" + u + "' is in two communities");
    }
  }
  return index;
}

std::vector<Community> communities_from_index(const CommunityOf& community_of,
                                              const std::vector<UserProfile>& profiles) {
  std::map<std::string, Community> by_id;
  for (const auto& p : profiles) {
    auto it = community_of.find(p.user_id);
    if (it == community_of.end()) throw std::invalid_argument("user '" + p.user_id + "' has no community");
    auto& c = by_id[it->second];
    c.id = it->second;
    c.members.push_back(p.user_id);
  }
  std::vector<Community> out;
  for (auto& [id, c] : by_id) out.push_back(std::move(c));
  return out;
}

namespace {

std::vector<std::pair<std::string, std::string>> read_pairs(std::istream& in, const std::string& header) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV, expected header '" + header + "'");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header) throw std::runtime_error("expected CSV header '" + header + "', got '" + line + "'");
  std::vector<std::pair<std::string, std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || comma == 0 || comma + 1 == line.size() ||
        line.find(',', comma + 1) != std::string::npos) {
      throw std::runtime_error("malformed CSV line " + std::to_string(line_no) + ": '" + line + "'");
    }
    rows.emplace_back(line.substr(0, comma), line.substr(comma + 1));
  }
  return rows;
}

}  // namespace

TopicMap read_topic_map_csv(std::istream& in) {
  TopicMap map;
  for (auto& [repo, topic] : read_pairs(in, "repo_id,topic")) map[repo].insert(topic);
  return map;
}

CommunityOf read_communities_csv(std::istream& in) {
  CommunityOf index;
  for (auto& [user, community] : read_pairs(in, "user_id,community_id")) {
    if (!index.emplace(user, community).second) throw std::runtime_error("user '" + user + "' listed twice");
  }
  return index;
}

void write_segment_report_csv(std::ostream& out, const SegmentSet& set, const std::vector<std::string>& vocabulary) {
  const auto precision = out.precision(17);
  out << "segment_id,size,shannon_H,label_topics\n";
  for (std::size_t s = 0; s < set.segments.size(); ++s) {
    const auto& seg = set.segments[s];
    out << s << ',' << seg.users.size() << ',' << seg.shannon << ',';
    bool first = true;
    for (std::size_t k = 0; k < seg.label.size(); ++k) {
      if (!seg.label[k]) continue;
      if (!first) out << ';';
      out << vocabulary.at(k);
      first = false;
    }
    out << '\n';
  }
  out.precision(precision);
}

}  // namespace repopulse::segment
