#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "pbi/common.hpp"
#include "pbi/graph.hpp"
#include "pbi/rng.hpp"

namespace pbi {

enum class TripleOrigin : std::uint8_t { kBpr, kPbi };

// (user, i, j): the loss pushes score(u, i) above score(u, j).
struct TrainingTriple {
  Index user = 0;
  Index first_item = 0;
  Index second_item = 0;
  TripleOrigin origin = TripleOrigin::kBpr;
  bool operator==(const TrainingTriple&) const = default;
};

enum class PbiStrategy { kNone, kPopPosNT, kPopPosFT, kPopNegNT, kPopNegFT };

std::string_view strategy_name(PbiStrategy s);
std::optional<PbiStrategy> parse_strategy(std::string_view name);
inline bool uses_threshold(PbiStrategy s) {
  return s == PbiStrategy::kPopPosFT || s == PbiStrategy::kPopNegFT;
}

// Draws items with probability weight_k / total via binary search over the
// prefix sums. Weights must be positive.
class WeightedSampler {
 public:
  WeightedSampler() = default;
  WeightedSampler(std::vector<Index> items, std::span<const double> weights);

  Index draw(Rng& rng) const;
  double probability(std::size_t position) const;
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::span<const Index> items() const { return items_; }
  std::span<const double> cumulative_weights() const { return cumulative_; }

 private:
  std::vector<Index> items_;
  std::vector<double> cumulative_;
};

// weight_i = degree(i); probabilities follow P_pop.
WeightedSampler build_pop_sampler(std::span<const Index> items,
                                  std::span<const std::uint32_t> degrees);
// weight_i = 1 / degree(i); probabilities follow P_unpop.
WeightedSampler build_unpop_sampler(std::span<const Index> items,
                                    std::span<const std::uint32_t> degrees);

// Uniform user, uniform positive, negative by rejection against the user's
// positives. Users with no positive or no negative are never drawn.
std::vector<TrainingTriple> sample_bpr_triples(const InteractionGraph& train, std::size_t n,
                                               Rng& rng);

// Popularity-aware triple source for one training graph. The per-user pools
// and samplers are built once; each sample_* call draws a fresh list.
class PbiSampler {
 public:
  // `partition` is only consulted by the fixed-threshold variants.
  PbiSampler(const InteractionGraph& train, PopularityPartition partition);

  // i uniform over the user's unpopular positives, j uniform over popular positives.
  std::vector<TrainingTriple> sample_poppos_ft(std::size_t n, Rng& rng) const;
  // i ~ P_unpop, j ~ P_pop, both over the user's positives; j redrawn while j == i.
  std::vector<TrainingTriple> sample_poppos_nt(std::size_t n, Rng& rng) const;
  // i uniform over unpopular positives, j uniform over popular non-positives.
  std::vector<TrainingTriple> sample_popneg_ft(std::size_t n, Rng& rng) const;
  // i ~ P_unpop over positives, j ~ P_pop over non-positives of degree >= 1.
  std::vector<TrainingTriple> sample_popneg_nt(std::size_t n, Rng& rng) const;

  std::vector<TrainingTriple> sample(PbiStrategy strategy, std::size_t n, Rng& rng) const;

  const PopularityPartition& partition() const { return partition_; }
  const InteractionGraph& graph() const { return *graph_; }

  // Qualifying user pools, exposed for tests.
  std::span<const Index> poppos_ft_users() const { return poppos_ft_users_; }
  std::span<const Index> poppos_nt_users() const { return poppos_nt_users_; }
  std::span<const Index> popneg_ft_users() const { return popneg_ft_users_; }
  std::span<const Index> popneg_nt_users() const { return popneg_nt_users_; }

 private:
  const InteractionGraph* graph_;
  PopularityPartition partition_;
  std::vector<std::uint32_t> degrees_;

  // Per-user positives split by the partition (CSR layout).
  std::vector<std::size_t> unpop_ptr_;
  std::vector<Index> unpop_pos_;
  std::vector<std::size_t> pop_ptr_;
  std::vector<Index> pop_pos_;

  std::vector<WeightedSampler> user_pop_;    // P_pop over I_u^+
  std::vector<WeightedSampler> user_unpop_;  // P_unpop over I_u^+
  WeightedSampler all_pop_;                  // P_pop over items of degree >= 1

  std::vector<Index> poppos_ft_users_;
  std::vector<Index> poppos_nt_users_;
  std::vector<Index> popneg_ft_users_;
  std::vector<Index> popneg_nt_users_;
};

// Writes `origin<TAB>u<TAB>i<TAB>j` lines.
void write_triples(std::span<const TrainingTriple> triples, const std::filesystem::path& path,
                   bool append = false);

}  // namespace pbi
