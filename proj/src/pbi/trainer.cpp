#include "pbi/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "pbi/metrics.hpp"

namespace pbi {

// ---- configuration ----

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* b = value.data();
  const auto* e = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(b, e, out);
  if (ec != std::errc() || ptr != e) {
    throw InvalidArgument("config key '" + std::string(key) + "': cannot parse '" +
                          std::string(value) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw InvalidArgument("config key '" + std::string(key) + "': expected true or false");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::vector<std::string_view>& TrainConfig::keys() {
  static const std::vector<std::string_view> k{
      "layers",   "dim",       "batch_size", "epochs",         "base_lr",
      "min_lr",   "lr_decay_start", "l2_beta", "w",            "strategy",
      "alpha_top", "alpha",    "r",          "seed",           "patience",
      "min_epochs", "eval_k",  "optimizer",  "stale_h",        "valid_fraction",
      "triples_per_epoch"};
  return k;
}

void TrainConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "layers") layers = parse_number<std::size_t>(key, value);
  else if (key == "dim") dim = parse_number<std::size_t>(key, value);
  else if (key == "batch_size") batch_size = parse_number<std::size_t>(key, value);
  else if (key == "epochs") epochs = parse_number<std::size_t>(key, value);
  else if (key == "base_lr") base_lr = parse_number<double>(key, value);
  else if (key == "min_lr") min_lr = parse_number<double>(key, value);
  else if (key == "lr_decay_start") lr_decay_start = parse_number<std::size_t>(key, value);
  else if (key == "l2_beta") l2_beta = parse_number<double>(key, value);
  else if (key == "w") pbi_weight = parse_number<double>(key, value);
  else if (key == "strategy") {
    const auto s = parse_strategy(value);
    if (!s) {
      throw InvalidArgument("unknown strategy '" + std::string(value) +
                            "' (valid: none, poppos-nt, poppos-ft, popneg-nt, popneg-ft)");
    }
    strategy = *s;
  } else if (key == "alpha_top") alpha_top = parse_number<double>(key, value);
  else if (key == "alpha") alpha = parse_number<std::uint32_t>(key, value);
  else if (key == "r") r = parse_number<double>(key, value);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "patience") patience = parse_number<std::size_t>(key, value);
  else if (key == "min_epochs") min_epochs = parse_number<std::size_t>(key, value);
  else if (key == "eval_k") eval_k = parse_number<std::size_t>(key, value);
  else if (key == "optimizer") {
    if (value == "sgd") optimizer = Optimizer::kSgd;
    else if (value == "adam") optimizer = Optimizer::kAdam;
    else throw InvalidArgument("unknown optimizer '" + std::string(value) + "' (valid: sgd, adam)");
  } else if (key == "stale_h") stale_h = parse_bool(key, value);
  else if (key == "valid_fraction") valid_fraction = parse_number<double>(key, value);
  else if (key == "triples_per_epoch") triples_per_epoch = parse_number<std::size_t>(key, value);
  else throw InvalidArgument("unknown config key '" + std::string(key) + "'");
}

std::string TrainConfig::get(std::string_view key) const {
  if (key == "layers") return std::to_string(layers);
  if (key == "dim") return std::to_string(dim);
  if (key == "batch_size") return std::to_string(batch_size);
  if (key == "epochs") return std::to_string(epochs);
  if (key == "base_lr") return format_double(base_lr);
  if (key == "min_lr") return format_double(min_lr);
  if (key == "lr_decay_start") return std::to_string(lr_decay_start);
  if (key == "l2_beta") return format_double(l2_beta);
  if (key == "w") return format_double(pbi_weight);
  if (key == "strategy") return std::string(strategy_name(strategy));
  if (key == "alpha_top") return format_double(alpha_top);
  if (key == "alpha") return std::to_string(alpha);
  if (key == "r") return format_double(r);
  if (key == "seed") return std::to_string(seed);
  if (key == "patience") return std::to_string(patience);
  if (key == "min_epochs") return std::to_string(min_epochs);
  if (key == "eval_k") return std::to_string(eval_k);
  if (key == "optimizer") return optimizer == Optimizer::kSgd ? "sgd" : "adam";
  if (key == "stale_h") return stale_h ? "true" : "false";
  if (key == "valid_fraction") return format_double(valid_fraction);
  if (key == "triples_per_epoch") return std::to_string(triples_per_epoch);
  throw InvalidArgument("unknown config key '" + std::string(key) + "'");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw InvalidArgument("invalid config: " + m); };
  if (dim < 1) fail("dim must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(min_lr > 0.0 && min_lr <= base_lr)) fail("need 0 < min_lr <= base_lr");
  if (!(pbi_weight >= 0.0) || !std::isfinite(pbi_weight)) fail("w must be >= 0");
  if (!(alpha_top > 0.0 && alpha_top < 1.0)) fail("alpha_top must lie in (0, 1)");
  if (!(l2_beta >= 0.0)) fail("l2_beta must be >= 0");
  if (!(r >= 0.0 && r <= 1.0)) fail("r must lie in [0, 1]");
  if (eval_k < 1) fail("eval_k must be >= 1");
  if (!(valid_fraction >= 0.0 && valid_fraction < 1.0)) fail("valid_fraction must lie in [0, 1)");
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (auto k : keys()) {
    out += k;
    out += '=';
    out += get(k);
    out += '\n';
  }
  return out;
}

void apply_config_text(TrainConfig& cfg, std::string_view text, std::string_view origin) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(std::string(origin) + ":" + std::to_string(line_no) +
                       ": expected key=value");
    }
    cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

TrainConfig load_config_file(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(base, ss.str(), path.string());
  return base;
}

// ---- objective ----

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double bpr_term(double score_i, double score_j) { return softplus(-(score_i - score_j)); }

namespace {

double accumulate_triples(const Matrix& h, std::size_t nu, std::span<const TrainingTriple> triples,
                          double coef, Matrix* grad_h) {
  double sum = 0.0;
  for (const auto& t : triples) {
    const auto u = static_cast<Eigen::Index>(t.user);
    const auto i = static_cast<Eigen::Index>(nu + t.first_item);
    const auto j = static_cast<Eigen::Index>(nu + t.second_item);
    const double diff = h.row(u).dot(h.row(i)) - h.row(u).dot(h.row(j));
    sum += softplus(-diff);
    if (grad_h != nullptr) {
      // d/d(diff) of softplus(-diff) is -sigmoid(-diff) = -(1 - sigmoid(diff)).
      const double g = coef * sigmoid(-diff);
      grad_h->row(u).noalias() -= g * (h.row(i) - h.row(j));
      grad_h->row(i).noalias() -= g * h.row(u);
      grad_h->row(j).noalias() += g * h.row(u);
    }
  }
  return sum;
}

}  // namespace

BatchLoss batch_loss(const Matrix& h, std::size_t num_users,
                     std::span<const TrainingTriple> bpr_batch,
                     std::span<const TrainingTriple> pbi_batch, double w, double beta,
                     const Matrix& x, Matrix* grad_h, Matrix* grad_x) {
  if (grad_h != nullptr && (grad_h->rows() != h.rows() || grad_h->cols() != h.cols())) {
    throw ShapeMismatch("grad_h must be shaped like H");
  }
  BatchLoss out;
  out.bpr = accumulate_triples(h, num_users, bpr_batch, 1.0, grad_h);
  out.pbi = accumulate_triples(h, num_users, pbi_batch, w, grad_h);
  out.l2 = beta * x.squaredNorm();
  if (grad_x != nullptr) {
    if (grad_x->rows() != x.rows() || grad_x->cols() != x.cols()) {
      throw ShapeMismatch("grad_x must be shaped like X");
    }
    grad_x->noalias() += (2.0 * beta) * x;
  }
  out.total = out.bpr + w * out.pbi + out.l2;
  return out;
}

BatchLoss loss_and_gradient(const PropagationOperator& op, const EmbeddingTable& table,
                            std::span<const TrainingTriple> bpr_batch,
                            std::span<const TrainingTriple> pbi_batch, double w, double beta,
                            Matrix* grad_base) {
  const Matrix h = propagate(op, table);
  if (grad_base == nullptr) {
    return batch_loss(h, op.num_users(), bpr_batch, pbi_batch, w, beta, table.base, nullptr,
                      nullptr);
  }
  Matrix grad_h = Matrix::Zero(h.rows(), h.cols());
  const auto loss =
      batch_loss(h, op.num_users(), bpr_batch, pbi_batch, w, beta, table.base, &grad_h, nullptr);
  *grad_base = backward_scores(op, grad_h, table);
  grad_base->noalias() += (2.0 * beta) * table.base;
  return loss;
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  if (epoch < cfg.lr_decay_start) return cfg.base_lr;
  if (cfg.epochs <= cfg.lr_decay_start) return cfg.min_lr;
  const double span = static_cast<double>(cfg.epochs - cfg.lr_decay_start);
  const double gamma = std::pow(cfg.min_lr / cfg.base_lr, 1.0 / span);
  const double lr = cfg.base_lr * std::pow(gamma, static_cast<double>(epoch - cfg.lr_decay_start));
  return std::max(lr, cfg.min_lr);
}

std::string EpochStats::to_json() const {
  nlohmann::json j{{"epoch", epoch},          {"bpr_loss", bpr_loss},
                   {"pbi_loss", pbi_loss},    {"total_loss", total_loss},
                   {"lr", lr},                {"bpr_triples", bpr_triples},
                   {"pbi_triples", pbi_triples}, {"seconds", seconds}};
  j["valid_ndcg"] = valid_ndcg ? nlohmann::json(*valid_ndcg) : nlohmann::json(nullptr);
  return j.dump();
}

// ---- training loop ----

Trainer::Trainer(const InteractionGraph& train, TrainConfig cfg)
    : graph_(&train),
      cfg_(std::move(cfg)),
      bpr_rng_(make_stream(cfg_.seed, 1)),
      pbi_rng_(make_stream(cfg_.seed, 2)) {
  cfg_.validate();
  if (train.num_edges() == 0) throw InvalidArgument("training graph has no edges");
  op_ = PropagationOperator::build(train, cfg_.r);
  table_ = init_embeddings(train.num_nodes(), cfg_.dim, cfg_.layers, cfg_.seed);
  if (cfg_.strategy != PbiStrategy::kNone) {
    PopularityPartition partition;
    if (uses_threshold(cfg_.strategy)) {
      alpha_ = cfg_.alpha > 0 ? cfg_.alpha : percentile_threshold(train, cfg_.alpha_top);
      partition = classify_popular(train, alpha_);
    }
    pbi_.emplace(train, std::move(partition));
  }
  if (cfg_.optimizer == Optimizer::kAdam) {
    adam_m_ = Matrix::Zero(table_.base.rows(), table_.base.cols());
    adam_v_ = Matrix::Zero(table_.base.rows(), table_.base.cols());
  }
}

std::pair<std::vector<TrainingTriple>, std::vector<TrainingTriple>> Trainer::draw(
    Rng& bpr_rng, Rng& pbi_rng) const {
  const std::size_t n = cfg_.triples_per_epoch > 0 ? cfg_.triples_per_epoch : graph_->num_edges();
  auto bpr = sample_bpr_triples(*graph_, n, bpr_rng);
  std::vector<TrainingTriple> pbi;
  if (pbi_) pbi = pbi_->sample(cfg_.strategy, n, pbi_rng);
  return {std::move(bpr), std::move(pbi)};
}

std::pair<std::vector<TrainingTriple>, std::vector<TrainingTriple>> Trainer::peek_triples() const {
  Rng b = bpr_rng_;
  Rng p = pbi_rng_;
  return draw(b, p);
}

void Trainer::apply_update(const Matrix& grad, double lr) {
  if (cfg_.optimizer == Optimizer::kSgd) {
    table_.base.noalias() -= lr * grad;
    return;
  }
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  ++adam_t_;
  adam_m_ = kBeta1 * adam_m_ + (1.0 - kBeta1) * grad;
  adam_v_ = kBeta2 * adam_v_ + (1.0 - kBeta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_t_));
  table_.base.array() -=
      lr * (adam_m_.array() / c1) / ((adam_v_.array() / c2).sqrt() + kEps);
}

EpochStats Trainer::run_epoch(std::size_t epoch) {
  const auto t0 = std::chrono::steady_clock::now();
  EpochStats stats;
  stats.epoch = epoch;
  stats.lr = lr_at(epoch, cfg_);

  auto [bpr, pbi] = draw(bpr_rng_, pbi_rng_);
  stats.bpr_triples = bpr.size();
  stats.pbi_triples = pbi.size();

  const std::size_t bs = cfg_.batch_size;
  const std::size_t num_batches = (bpr.size() + bs - 1) / bs;
  // L2 is charged once per epoch, spread evenly over the batches.
  const double beta_batch = cfg_.l2_beta / static_cast<double>(std::max<std::size_t>(1, num_batches));
  const std::size_t nu = graph_->num_users();

  Matrix h;
  Matrix grad_h;
  double bpr_sum = 0.0;
  double pbi_sum = 0.0;
  double total_sum = 0.0;
  for (std::size_t b = 0; b < num_batches; ++b) {
    if (!cfg_.stale_h || b == 0) h = propagate(op_, table_);
    const std::size_t lo = b * bs;
    const std::size_t hi = std::min(bpr.size(), lo + bs);
    const std::span<const TrainingTriple> bpr_batch(bpr.data() + lo, hi - lo);
    std::span<const TrainingTriple> pbi_batch;
    if (lo < pbi.size()) pbi_batch = {pbi.data() + lo, std::min(pbi.size(), hi) - lo};

    grad_h.setZero(h.rows(), h.cols());
    const auto loss = batch_loss(h, nu, bpr_batch, pbi_batch, cfg_.pbi_weight, beta_batch,
                                 table_.base, &grad_h, nullptr);
    if (!std::isfinite(loss.total)) {
      throw Diverged("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                     std::to_string(b) + " (bpr=" + std::to_string(loss.bpr) +
                     ", pbi=" + std::to_string(loss.pbi) + ")");
    }
    bpr_sum += loss.bpr;
    pbi_sum += loss.pbi;
    total_sum += loss.total;

    Matrix grad = backward_scores(op_, grad_h, table_);
    grad.noalias() += (2.0 * beta_batch) * table_.base;
    apply_update(grad, stats.lr);
  }
  stats.bpr_loss = bpr.empty() ? 0.0 : bpr_sum / static_cast<double>(bpr.size());
  stats.pbi_loss = pbi.empty() ? 0.0 : pbi_sum / static_cast<double>(pbi.size());
  stats.total_loss = bpr.empty() ? 0.0 : total_sum / static_cast<double>(bpr.size());
  stats.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return stats;
}

TrainResult train(const InteractionGraph& train_graph, const InteractionGraph* valid_graph,
                  const TrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch) {
  Trainer trainer(train_graph, cfg);
  TrainResult result;
  result.alpha = trainer.alpha();
  result.best = trainer.table();
  const bool validate = valid_graph != nullptr && valid_graph->num_edges() > 0;
  double best = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochStats stats = trainer.run_epoch(epoch);
    if (validate) {
      const double ndcg =
          mean_ndcg(trainer.final_embeddings(), train_graph, *valid_graph, cfg.eval_k);
      stats.valid_ndcg = ndcg;
      if (ndcg > best) {
        best = ndcg;
        since_best = 0;
        result.best = trainer.table();
        result.best_epoch = epoch;
        result.best_valid_ndcg = ndcg;
      } else {
        ++since_best;
      }
    } else {
      result.best = trainer.table();
      result.best_epoch = epoch;
    }
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (validate && cfg.patience > 0 && since_best >= cfg.patience && epoch + 1 >= cfg.min_epochs) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

TrainResult fit(const InteractionGraph& train_graph, const TrainConfig& cfg,
                const std::function<void(const EpochStats&)>& on_epoch) {
  if (cfg.valid_fraction <= 0.0) return train(train_graph, nullptr, cfg, on_epoch);
  const auto carved = carve_validation(train_graph, cfg.valid_fraction, cfg.seed);
  return train(carved.train, &carved.test, cfg, on_epoch);
}

}  // namespace pbi
