#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pbi/common.hpp"
#include "pbi/graph.hpp"

namespace pbi {

// Items for one user by descending score; ties go to the lower item index.
// Training positives never appear. Rank of items[p] is p + 1.
struct RankedList {
  Index user = 0;
  std::vector<Index> items;
  std::vector<double> scores;
};

// `train_positives` must be sorted. `limit` truncates to the top entries
// (0 keeps the full candidate list).
RankedList rank_items(const Matrix& h, std::size_t num_users, Index user,
                      std::span<const Index> train_positives, std::size_t limit = 0);

// `relevant` must be sorted and non-empty for all three.
double f1_at_k(const RankedList& ranked, std::span<const Index> relevant, std::size_t k);
double ndcg_at_k(const RankedList& ranked, std::span<const Index> relevant, std::size_t k);
double map_at_k(const RankedList& ranked, std::span<const Index> relevant, std::size_t k);

// Average fractional ranks (1-based; ties share the mean of their positions).
std::vector<double> fractional_ranks(std::span<const double> values);

// Pearson correlation of fractional ranks. nullopt when n < 2, lengths
// differ, or either side is constant.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

// Per-user popularity/rank correlation, negated and averaged. pop(i) is the
// training degree; ranks come from the full candidate ranking.
struct PruResult {
  std::optional<double> value;
  std::size_t users_evaluated = 0;
  std::size_t users_skipped = 0;
};
PruResult pru(const Matrix& h, const InteractionGraph& test, const InteractionGraph& train);

// Negated Spearman correlation between item popularity and the item's mean
// rank over the users holding it in test.
struct PriResult {
  std::optional<double> value;
  std::size_t items_evaluated = 0;
};
PriResult pri(const Matrix& h, const InteractionGraph& test, const InteractionGraph& train);

struct MetricReport {
  std::size_t k = 10;
  double f1 = 0.0;
  double ndcg = 0.0;
  double map = 0.0;
  std::optional<double> pru;
  std::optional<double> pri;
  std::size_t n_users_evaluated = 0;
  std::size_t n_users_skipped_pru = 0;
  std::size_t n_items_evaluated_pri = 0;
  std::string fingerprint;
};

// Single pass over test users computing every metric.
MetricReport evaluate(const Matrix& h, const InteractionGraph& train, const InteractionGraph& test,
                      std::size_t k);

// Mean NDCG@k over users with held-out edges; used for early stopping.
double mean_ndcg(const Matrix& h, const InteractionGraph& train, const InteractionGraph& held_out,
                 std::size_t k);

}  // namespace pbi
