#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pbi/common.hpp"
#include "pbi/graph.hpp"
#include "pbi/propagation.hpp"
#include "pbi/sampler.hpp"

namespace pbi {

enum class Optimizer { kSgd, kAdam };

// Every field has a key=value name (see keys()); the same names are used by
// config files and CLI overrides.
struct TrainConfig {
  std::size_t layers = 4;
  std::size_t dim = 64;
  std::size_t batch_size = 1024;
  std::size_t epochs = 500;
  double base_lr = 0.001;
  double min_lr = 0.0001;
  std::size_t lr_decay_start = 50;
  double l2_beta = 1e-4;
  double pbi_weight = 0.0;
  PbiStrategy strategy = PbiStrategy::kNone;
  double alpha_top = 0.20;
  std::uint32_t alpha = 0;  // explicit degree threshold; 0 derives it from alpha_top
  double r = 0.5;
  std::uint64_t seed = 0;
  std::size_t patience = 10;
  // No early stop before this many epochs. Validation NDCG dips for several
  // epochs after the first popularity fit, long enough to exhaust patience.
  std::size_t min_epochs = 50;
  std::size_t eval_k = 10;
  Optimizer optimizer = Optimizer::kAdam;  // plain SGD at lr 1e-3 barely moves the BPR loss
  bool stale_h = false;
  double valid_fraction = 0.1;
  std::size_t triples_per_epoch = 0;  // 0 = number of training edges

  static const std::vector<std::string_view>& keys();
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  // Throws InvalidArgument naming the offending field.
  void validate() const;
  // Canonical `key=value` lines in keys() order.
  std::string to_text() const;
};

// Applies `key=value` lines ('#' comments and blank lines ignored).
void apply_config_text(TrainConfig& cfg, std::string_view text, std::string_view origin = "config");
TrainConfig load_config_file(const std::filesystem::path& path, TrainConfig base = {});

// 1 / (1 + e^-x), evaluated on the branch that cannot overflow.
double sigmoid(double x);
// ln(1 + e^x) without overflow.
double softplus(double x);
// -ln sigmoid(score_i - score_j).
double bpr_term(double score_i, double score_j);

struct BatchLoss {
  double total = 0.0;
  double bpr = 0.0;  // sum of BPR terms
  double pbi = 0.0;  // sum of PBi terms, before the weight w
  double l2 = 0.0;   // beta * ||X||^2
};

// total = sum_bpr bpr_term + w * sum_pbi bpr_term + beta * ||X||^2.
// Gradients are accumulated: grad_h gets the score-term gradient w.r.t. H
// rows, grad_x gets 2 beta X. Either pointer may be null.
BatchLoss batch_loss(const Matrix& h, std::size_t num_users,
                     std::span<const TrainingTriple> bpr_batch,
                     std::span<const TrainingTriple> pbi_batch, double w, double beta,
                     const Matrix& x, Matrix* grad_h, Matrix* grad_x);

// Loss of the full model and its gradient w.r.t. the base embeddings.
BatchLoss loss_and_gradient(const PropagationOperator& op, const EmbeddingTable& table,
                            std::span<const TrainingTriple> bpr_batch,
                            std::span<const TrainingTriple> pbi_batch, double w, double beta,
                            Matrix* grad_base);

// base_lr until lr_decay_start, then exponential decay reaching min_lr at
// `epochs`, clamped below at min_lr.
double lr_at(std::size_t epoch, const TrainConfig& cfg);

struct EpochStats {
  std::size_t epoch = 0;
  double bpr_loss = 0.0;    // mean BPR term
  double pbi_loss = 0.0;    // mean PBi term (0 when none were sampled)
  double total_loss = 0.0;  // epoch objective divided by the BPR triple count
  double lr = 0.0;
  std::optional<double> valid_ndcg;
  std::size_t bpr_triples = 0;
  std::size_t pbi_triples = 0;
  double seconds = 0.0;

  std::string to_json() const;
};

// Training state for one graph. Each run_epoch() samples that epoch's
// triples and performs the batched parameter updates.
class Trainer {
 public:
  Trainer(const InteractionGraph& train, TrainConfig cfg);

  EpochStats run_epoch(std::size_t epoch);

  const TrainConfig& config() const { return cfg_; }
  const PropagationOperator& op() const { return op_; }
  const EmbeddingTable& table() const { return table_; }
  EmbeddingTable& table() { return table_; }
  std::uint32_t alpha() const { return alpha_; }
  Matrix final_embeddings() const { return propagate(op_, table_); }

  // Triples run_epoch() would draw next, without consuming generator state.
  std::pair<std::vector<TrainingTriple>, std::vector<TrainingTriple>> peek_triples() const;

 private:
  std::pair<std::vector<TrainingTriple>, std::vector<TrainingTriple>> draw(Rng& bpr_rng,
                                                                           Rng& pbi_rng) const;
  void apply_update(const Matrix& grad, double lr);

  const InteractionGraph* graph_;
  TrainConfig cfg_;
  std::uint32_t alpha_ = 0;
  PropagationOperator op_;
  EmbeddingTable table_;
  std::optional<PbiSampler> pbi_;
  Rng bpr_rng_;
  Rng pbi_rng_;
  Matrix adam_m_;
  Matrix adam_v_;
  std::uint64_t adam_t_ = 0;
};

struct TrainResult {
  EmbeddingTable best;
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  std::optional<double> best_valid_ndcg;
  bool stopped_early = false;
  std::uint32_t alpha = 0;
};

// Runs the epoch loop with validation-based early stopping and returns the
// best-validation table. Without a validation graph the last table is kept.
TrainResult train(const InteractionGraph& train_graph, const InteractionGraph* valid_graph,
                  const TrainConfig& cfg,
                  const std::function<void(const EpochStats&)>& on_epoch = {});

// train() with validation carved from `train_graph` (valid_fraction of each
// user's edges, validation stream of cfg.seed). The returned base embeddings
// are meant to be propagated over the full `train_graph` at inference.
// valid_fraction = 0 trains on everything for cfg.epochs epochs.
TrainResult fit(const InteractionGraph& train_graph, const TrainConfig& cfg,
                const std::function<void(const EpochStats&)>& on_epoch = {});

}  // namespace pbi
