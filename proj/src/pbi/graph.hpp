#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pbi/common.hpp"

namespace pbi {

struct Edge {
  Index user = 0;
  Index item = 0;
  auto operator<=>(const Edge&) const = default;
};

// External string ids for users and items, in first-appearance order.
struct IdMap {
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::unordered_map<std::string, Index> user_index;
  std::unordered_map<std::string, Index> item_index;

  Index intern_user(const std::string& id);
  Index intern_item(const std::string& id);
};

// Bipartite user-item implicit-feedback graph. Immutable after construction.
// Adjacency is stored twice (by user and by item) so both directions are O(1)
// to enumerate; per-user item lists are strictly sorted.
class InteractionGraph {
 public:
  InteractionGraph() = default;

  // Validates indices and collapses duplicate edges. `duplicates` (if given)
  // receives the number of edges dropped as repeats.
  static InteractionGraph from_edges(std::size_t num_users, std::size_t num_items,
                                     std::vector<Edge> edges,
                                     std::shared_ptr<const IdMap> ids = nullptr,
                                     std::size_t* duplicates = nullptr);

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t num_nodes() const { return num_users_ + num_items_; }
  std::size_t num_edges() const { return item_of_edge_.size(); }

  std::span<const Index> items_of(Index user) const {
    return {item_of_edge_.data() + user_ptr_[user], item_of_edge_.data() + user_ptr_[user + 1]};
  }
  std::span<const Index> users_of(Index item) const {
    return {user_of_edge_.data() + item_ptr_[item], user_of_edge_.data() + item_ptr_[item + 1]};
  }
  std::uint32_t user_degree(Index user) const {
    return static_cast<std::uint32_t>(user_ptr_[user + 1] - user_ptr_[user]);
  }
  std::uint32_t item_degree(Index item) const {
    return static_cast<std::uint32_t>(item_ptr_[item + 1] - item_ptr_[item]);
  }
  std::vector<std::uint32_t> item_degrees() const;

  // Binary search over the user's sorted item list.
  bool has_edge(Index user, Index item) const;

  // All edges sorted by (user, item).
  std::vector<Edge> edges() const;

  const std::shared_ptr<const IdMap>& ids() const { return ids_; }

 private:
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::vector<std::size_t> user_ptr_{0};
  std::vector<Index> item_of_edge_;
  std::vector<std::size_t> item_ptr_{0};
  std::vector<Index> user_of_edge_;
  std::shared_ptr<const IdMap> ids_;
};

struct LoadReport {
  std::size_t lines = 0;
  std::size_t duplicates = 0;
};

// Reads a `user_id<TAB>item_id` edge list. Blank lines and lines starting
// with '#' are skipped. Ids are re-indexed densely in first-appearance order.
InteractionGraph load_edge_list(const std::filesystem::path& path, LoadReport* report = nullptr);

// Loads a train/test pair into one shared index space: train ids first, then
// any ids that only appear in the test file. Both graphs get the same shape.
struct GraphPair {
  InteractionGraph train;
  InteractionGraph test;
};
GraphPair load_edge_list_pair(const std::filesystem::path& train_path,
                              const std::filesystem::path& test_path,
                              LoadReport* train_report = nullptr,
                              LoadReport* test_report = nullptr);

// Writes edges sorted by (user, item) using the external ids when present.
void write_edge_list(const InteractionGraph& graph, const std::filesystem::path& path);

double density(const InteractionGraph& graph);
double density(std::size_t num_users, std::size_t num_items, std::size_t num_edges);

struct SplitPair {
  InteractionGraph train;
  InteractionGraph test;
  std::uint64_t seed = 0;
};

// User-wise random holdout: round(test_fraction * d_u) of each user's edges
// go to test (half-up), chosen uniformly with a generator seeded by `seed`.
SplitPair split_holdout(const InteractionGraph& graph, double test_fraction, std::uint64_t seed);
// Same holdout rule for early-stopping data, drawn from the training seed's
// validation stream so it never coincides with the test split of that seed.
SplitPair carve_validation(const InteractionGraph& train, double fraction, std::uint64_t seed);

struct PopularityPartition {
  std::uint32_t threshold_alpha = 0;
  std::vector<Index> popular_items;
  std::vector<Index> unpopular_items;

  // Items of degree zero are in neither list.
  bool is_popular(Index item) const;
};

// Items with degree >= alpha are popular; zero-degree items are excluded.
PopularityPartition classify_popular(const InteractionGraph& graph, std::uint32_t alpha);

// Smallest alpha with |{i : degree(i) >= alpha}| <= top_fraction * n, where n
// counts items of degree >= 1. Items sharing a degree always land together.
std::uint32_t percentile_threshold(const InteractionGraph& graph, double top_fraction);
std::uint32_t percentile_threshold(std::span<const std::uint32_t> degrees, double top_fraction);

}  // namespace pbi
