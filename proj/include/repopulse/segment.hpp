#pragma once

// Semantic segmentation of users: topic and network features, mini-batch
// k-means, the community ensemble (agglomeration over majority-vote topic
// labels) and Shannon diversity of the resulting segments.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "repopulse/graph.hpp"
#include "repopulse/ingest.hpp"
#include "repopulse/kernels.hpp"

namespace repopulse::segment {

using TopicLabel = std::vector<std::uint8_t>;  // 0/1 per vocabulary topic
using TopicMap = std::map<std::string, std::set<std::string>>;  // repo -> topics
using CommunityOf = std::map<std::string, std::string>;        // user -> community

struct UserProfile {
  std::string user_id;
  TopicLabel topics;
  // event count, distinct repos, size-share of the user's largest component;
  // each min-max scaled to [0, 1] over the population.
  std::array<double, 3> network{};
};

struct UserFeatures {
  std::vector<std::string> vocabulary;  // sorted topic names
  std::vector<UserProfile> profiles;    // sorted by user id; users with events only
};

UserFeatures build_user_features(std::span<const EventRecord> events, const TopicMap& topics,
                                 const ComponentAssignment& assignment);

/// One row per profile: topic indicators, then (optionally) network features.
Eigen::MatrixXd feature_matrix(const std::vector<UserProfile>& profiles, bool with_network = true);

class EmptyInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct KMeansResult {
  std::vector<int> assignment;
  Eigen::MatrixXd centers;
  double inertia = 0.0;          // final centers, final assignment
  double initial_inertia = 0.0;  // seeded centers before any update
};

/// k-means++ seeding, then Sculley mini-batch updates with per-center rate
/// 1/(times updated). Batches are drawn without replacement from a reshuffled
/// permutation of the points, so every point is visited once per pass.
KMeansResult minibatch_kmeans(const Eigen::MatrixXd& points, int k, int batch_size, int iterations,
                              std::uint64_t seed, kernels::Exec exec = kernels::Exec::Parallel);

struct Community {
  std::string id;
  std::vector<std::string> members;
  TopicLabel label;
};

/// Topic k is set iff strictly more than half of the votes set it.
TopicLabel majority_label(const std::vector<TopicLabel>& votes, std::size_t topic_count);

/// Majority vote over the members' topic vectors.
TopicLabel community_topic_label(const Community& community, const std::vector<UserProfile>& profiles,
                                 std::size_t topic_count);

/// 1 - |A and B| / |A or B|; 1 when both are empty.
double jaccard_distance(const TopicLabel& a, const TopicLabel& b);

struct Segment {
  TopicLabel label;
  std::vector<std::size_t> communities;  // indices into the input communities
  std::vector<std::string> users;
  double shannon = 0.0;
};

struct Merge {
  std::size_t left;  // group indices at the time of the merge, left < right
  std::size_t right;
  double distance;
};

struct SegmentSet {
  std::vector<Segment> segments;
  std::vector<Merge> trace;
  int topic_coverage = 0;
};

/// Repeatedly merges the closest pair of groups (ties to the lexicographically
/// smallest index pair) until `target_segments` remain. The merged group takes
/// the left slot and its label is the majority vote of its communities' labels.
SegmentSet ensemble_agglomerate(const std::vector<Community>& communities, std::size_t target_segments);

/// -sum p_i ln p_i over the communities present in the segment.
double shannon_index(std::span<const std::string> users, const CommunityOf& community_of);
double shannon_from_counts(std::span<const std::size_t> counts);

/// Distinct topics set in any segment label.
int topic_coverage(const std::vector<Segment>& segments);

/// Segments from a clustering of profiles: label = majority vote of members.
SegmentSet segments_from_clusters(const std::vector<UserProfile>& profiles, const std::vector<int>& cluster,
                                  const CommunityOf& community_of, std::size_t topic_count);

/// Connected components of the user-repo graph, projected onto users.
/// Communities are ordered by their smallest user id and named c0, c1, ...
std::vector<Community> communities_from_graph(std::span<const EventRecord> events);

CommunityOf community_index(const std::vector<Community>& communities);
/// Groups users by community id; only users in `profiles` are kept.
std::vector<Community> communities_from_index(const CommunityOf& community_of, const std::vector<UserProfile>& profiles);

// `repo_id,topic`
TopicMap read_topic_map_csv(std::istream& in);
// `user_id,community_id`
CommunityOf read_communities_csv(std::istream& in);
// `segment_id,size,shannon_H,label_topics` (topics separated by ';')
void write_segment_report_csv(std::ostream& out, const SegmentSet& set, const std::vector<std::string>& vocabulary);

}  // namespace repopulse::segment
