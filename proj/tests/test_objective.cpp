#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pbi/metrics.hpp"
#include "pbi/trainer.hpp"

using namespace pbi;

TEST(Sigmoid, Examples) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(sigmoid(700.0), 1.0);
  EXPECT_TRUE(std::isfinite(sigmoid(-700.0)));
  EXPECT_GE(sigmoid(-700.0), 0.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> x(-50, 50);
  for (int k = 0; k < 1000; ++k) {
    const double v = x(rng);
    EXPECT_NEAR(sigmoid(v) + sigmoid(-v), 1.0, 1e-15);
  }
}

TEST(BprTerm, Examples) {
  EXPECT_NEAR(bpr_term(3.0, 3.0), std::log(2.0), 1e-15);
  // ln(1 + e^-20) = e^-20 - e^-40 / 2 + O(e^-60)
  EXPECT_NEAR(bpr_term(20.0, 0.0), std::exp(-20.0) - std::exp(-40.0) / 2.0, 1e-23);
  EXPECT_NEAR(bpr_term(0.0, 20.0), 20.000000002061153, 1e-12);
  EXPECT_TRUE(std::isfinite(bpr_term(0.0, 800.0)));
  EXPECT_NEAR(bpr_term(0.0, 800.0), 800.0, 1e-9);
}

TEST(BatchLoss, EmptyPbiIsBprPlusL2) {
  std::mt19937_64 rng(2);
  Matrix h = Matrix::Random(5, 3);
  Matrix x = Matrix::Random(5, 3);
  const std::vector<TrainingTriple> bpr{{0, 0, 1, TripleOrigin::kBpr}, {1, 2, 0, TripleOrigin::kBpr}};
  const auto l = batch_loss(h, 2, bpr, {}, 0.7, 0.01, x, nullptr, nullptr);
  EXPECT_EQ(l.pbi, 0.0);
  EXPECT_DOUBLE_EQ(l.total, l.bpr + 0.01 * x.squaredNorm());
}

TEST(BatchLoss, EqualScoresGiveLn2AndHalfGradient) {
  // u = (1, 0), i = (0, 1), j = (0, 2): both scores are 0
  Matrix h(3, 2);
  h << 1, 0, 0, 1, 0, 2;
  const std::vector<TrainingTriple> t{{0, 0, 1, TripleOrigin::kBpr}};
  Matrix g = Matrix::Zero(3, 2);
  const auto l = batch_loss(h, 1, t, {}, 0.0, 0.0, h, &g, nullptr);
  EXPECT_NEAR(l.bpr, std::log(2.0), 1e-15);
  // d/dH[u] = -0.5 (H[i] - H[j]), d/dH[i] = -0.5 H[u], d/dH[j] = +0.5 H[u]
  EXPECT_EQ(g(0, 0), 0.0);
  EXPECT_EQ(g(0, 1), 0.5);
  EXPECT_EQ(g(1, 0), -0.5);
  EXPECT_EQ(g(2, 0), 0.5);
}

TEST(BatchLoss, PbiWeightScalesTermAndGradient) {
  std::mt19937_64 rng(3);
  Matrix h = Matrix::Random(6, 4);
  const std::vector<TrainingTriple> t{{0, 1, 2, TripleOrigin::kPbi}, {1, 3, 0, TripleOrigin::kPbi}};
  Matrix g1 = Matrix::Zero(6, 4);
  Matrix g2 = Matrix::Zero(6, 4);
  const auto a = batch_loss(h, 2, {}, t, 1.0, 0.0, h, &g1, nullptr);
  const auto b = batch_loss(h, 2, {}, t, 0.25, 0.0, h, &g2, nullptr);
  EXPECT_DOUBLE_EQ(a.pbi, b.pbi);
  EXPECT_DOUBLE_EQ(b.total, 0.25 * a.pbi);
  EXPECT_TRUE((0.25 * g1).isApprox(g2));
}

TEST(Gradient, MatchesFiniteDifferencesAllStrategies) {
  std::mt19937_64 gen(4);
  int instances = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const double r = trial % 2 ? 0.5 : 0.3;
    const std::size_t nu = 2 + trial % 3;
    const std::size_t ni = 3 + trial % 4;  // at most 9 nodes
    const auto g = oracle::random_graph(nu, ni, 0.45, gen);
    TrainConfig cfg;
    cfg.layers = trial % 3;
    cfg.dim = 1 + trial % 4;
    cfg.seed = trial;
    cfg.r = r;
    cfg.alpha = 2;
    cfg.triples_per_epoch = 6;
    const PbiStrategy strategies[] = {PbiStrategy::kNone, PbiStrategy::kPopPosNT,
                                      PbiStrategy::kPopPosFT, PbiStrategy::kPopNegNT,
                                      PbiStrategy::kPopNegFT};
    cfg.strategy = strategies[trial % 5];
    set_log_sink([](std::string_view) {});
    std::optional<Trainer> trainer;
    try {
      trainer.emplace(g, cfg);
    } catch (const InvalidArgument&) {
      set_log_sink(nullptr);
      continue;  // graph with no negatives
    }
    auto [bpr, pbi_t] = trainer->peek_triples();
    set_log_sink(nullptr);
    const double w = 0.3;
    const double beta = 0.01;
    Matrix grad;
    const auto loss = loss_and_gradient(trainer->op(), trainer->table(), bpr, pbi_t, w, beta, &grad);
    const auto dense = oracle::dense_operator(g, r);
    const Eigen::MatrixXd x = trainer->table().base;
    EXPECT_NEAR(loss.total, oracle::total_loss(dense, nu, cfg.layers, x, bpr, pbi_t, w, beta), 1e-12);
    const auto fd = oracle::numeric_gradient(dense, nu, cfg.layers, x, bpr, pbi_t, w, beta);
    EXPECT_LT(oracle::max_relative_error(grad, fd), 1e-5) << "trial " << trial;
    ++instances;
  }
  EXPECT_GE(instances, 20);
}

TEST(Schedule, Endpoints) {
  TrainConfig cfg;
  EXPECT_DOUBLE_EQ(lr_at(0, cfg), 0.001);
  EXPECT_DOUBLE_EQ(lr_at(49, cfg), 0.001);
  EXPECT_DOUBLE_EQ(lr_at(50, cfg), 0.001);
  EXPECT_NEAR(lr_at(500, cfg), 0.0001, 1e-15);
  EXPECT_DOUBLE_EQ(lr_at(900, cfg), 0.0001);
  // gamma^(epochs - start) = min/base
  EXPECT_NEAR(lr_at(275, cfg), std::sqrt(0.001 * 0.0001), 1e-12);
  double prev = 1.0;
  for (std::size_t e = 0; e < 600; ++e) {
    EXPECT_LE(lr_at(e, cfg), prev);
    prev = lr_at(e, cfg);
  }
}

TEST(Config, SetGetValidate) {
  TrainConfig cfg;
  for (auto k : TrainConfig::keys()) {
    TrainConfig copy;
    copy.set(k, cfg.get(k));
    EXPECT_EQ(copy.get(k), cfg.get(k)) << k;
  }
  cfg.set("strategy", "poppos-ft");
  cfg.set("w", "0.005");
  EXPECT_EQ(cfg.strategy, PbiStrategy::kPopPosFT);
  EXPECT_EQ(cfg.pbi_weight, 0.005);
  try {
    cfg.set("strategy", "popular");
    FAIL();
  } catch (const InvalidArgument& e) {
    const std::string m = e.what();
    for (auto name : {"none", "poppos-nt", "poppos-ft", "popneg-nt", "popneg-ft"}) {
      EXPECT_NE(m.find(name), std::string::npos);
    }
  }
  EXPECT_THROW(cfg.set("nonsense", "1"), InvalidArgument);
  EXPECT_THROW(cfg.set("dim", "abc"), InvalidArgument);

  TrainConfig bad;
  bad.min_lr = 0.01;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = {};
  bad.alpha_top = 1.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = {};
  bad.pbi_weight = -1.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = {};
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Config, TextRoundTrip) {
  TrainConfig cfg;
  cfg.set("strategy", "popneg-nt");
  cfg.set("r", "0.3");
  TrainConfig back;
  apply_config_text(back, "# header\n\n" + cfg.to_text());
  EXPECT_EQ(back.to_text(), cfg.to_text());
  EXPECT_THROW(apply_config_text(back, "dim 4\n"), ParseError);
}

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.dim = 8;
  cfg.layers = 2;
  cfg.batch_size = 64;
  cfg.epochs = 12;
  cfg.seed = 5;
  cfg.valid_fraction = 0.0;
  return cfg;
}

}  // namespace

TEST(Train, SeparatesTwoByTwo) {
  const auto g = oracle::graph(2, 2, {{0, 0}, {1, 1}});
  for (auto opt : {Optimizer::kAdam, Optimizer::kSgd}) {
    TrainConfig cfg = small_config();
    cfg.layers = 1;
    cfg.epochs = 200;
    cfg.optimizer = opt;
    if (opt == Optimizer::kSgd) cfg.base_lr = cfg.min_lr = 0.1;
    const auto res = train(g, nullptr, cfg);
    const auto op = PropagationOperator::build(g, cfg.r);
    const Matrix h = propagate(op, res.best);
    EXPECT_GT(score(h, 2, 0, 0), score(h, 2, 0, 1));
    EXPECT_GT(score(h, 2, 1, 1), score(h, 2, 1, 0));
  }
}

TEST(Train, DeterministicLossSequence) {
  std::mt19937_64 gen(6);
  const auto g = oracle::random_graph(30, 40, 0.15, gen);
  TrainConfig cfg = small_config();
  cfg.strategy = PbiStrategy::kPopNegNT;
  cfg.pbi_weight = 0.1;
  const auto a = train(g, nullptr, cfg);
  const auto b = train(g, nullptr, cfg);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    EXPECT_EQ(a.history[e].total_loss, b.history[e].total_loss);
    EXPECT_GT(a.history[e].total_loss, 0.0);
    EXPECT_GE(a.history[e].pbi_loss, 0.0);
  }
  EXPECT_EQ(a.best.base, b.best.base);
}

TEST(Train, ZeroWeightMatchesBaseline) {
  std::mt19937_64 gen(7);
  const auto g = oracle::random_graph(25, 30, 0.2, gen);
  TrainConfig base = small_config();
  const auto ref = train(g, nullptr, base);
  for (auto s : {PbiStrategy::kPopPosNT, PbiStrategy::kPopPosFT, PbiStrategy::kPopNegNT,
                 PbiStrategy::kPopNegFT}) {
    TrainConfig cfg = base;
    cfg.strategy = s;
    cfg.pbi_weight = 0.0;
    set_log_sink([](std::string_view) {});
    const auto res = train(g, nullptr, cfg);
    set_log_sink(nullptr);
    EXPECT_EQ(res.best.base, ref.best.base) << strategy_name(s);
    for (std::size_t e = 0; e < ref.history.size(); ++e) {
      EXPECT_EQ(res.history[e].bpr_loss, ref.history[e].bpr_loss);
    }
  }
}

TEST(Train, BprLossDecreasesOnTinyInstance) {
  // BPR loss over one fixed triple set, measured after each epoch
  std::mt19937_64 gen(8);
  const auto g = oracle::random_graph(12, 15, 0.3, gen);
  Trainer t(g, small_config());
  const auto fixed = t.peek_triples().first;
  auto loss_now = [&] {
    return batch_loss(t.final_embeddings(), g.num_users(), fixed, {}, 0.0, 0.0, t.table().base,
                      nullptr, nullptr).bpr;
  };
  double prev = loss_now();
  const double first = prev;
  int rises = 0;
  for (std::size_t e = 0; e < 10; ++e) {
    t.run_epoch(e);
    const double now = loss_now();
    rises += now > prev;
    prev = now;
  }
  EXPECT_LE(rises, 2);
  EXPECT_LT(prev, first);
}

TEST(Train, EarlyStoppingKeepsBestEpoch) {
  std::mt19937_64 gen(9);
  const auto g = oracle::random_graph(40, 50, 0.15, gen);
  const auto carved = carve_validation(g, 0.2, 1);
  TrainConfig cfg = small_config();
  cfg.epochs = 200;
  cfg.patience = 3;
  cfg.min_epochs = 0;
  cfg.base_lr = cfg.min_lr = 0.05;  // overfits quickly
  std::vector<double> seen;
  const auto res = train(carved.train, &carved.test, cfg, [&](const EpochStats& s) {
    ASSERT_TRUE(s.valid_ndcg.has_value());
    seen.push_back(*s.valid_ndcg);
  });
  ASSERT_TRUE(res.stopped_early);
  EXPECT_EQ(res.history.size(), res.best_epoch + 1 + cfg.patience);
  EXPECT_EQ(*res.best_valid_ndcg, *std::max_element(seen.begin(), seen.end()));
  const Matrix h = propagate(PropagationOperator::build(carved.train, cfg.r), res.best);
  EXPECT_NEAR(mean_ndcg(h, carved.train, carved.test, cfg.eval_k), *res.best_valid_ndcg, 1e-12);
}

TEST(Train, NoEarlyStopBeforeMinEpochs) {
  std::mt19937_64 gen(9);
  const auto g = oracle::random_graph(40, 50, 0.15, gen);
  const auto carved = carve_validation(g, 0.2, 1);
  TrainConfig cfg = small_config();
  cfg.epochs = 200;
  cfg.patience = 3;
  cfg.min_epochs = 40;
  cfg.base_lr = cfg.min_lr = 0.05;
  const auto res = train(carved.train, &carved.test, cfg);
  ASSERT_TRUE(res.stopped_early);
  EXPECT_EQ(res.history.size(), std::max<std::size_t>(40, res.best_epoch + 1 + cfg.patience));
  EXPECT_GE(res.history.size(), 40u);
}

TEST(Train, FitCarvesValidation) {
  std::mt19937_64 gen(10);
  const auto g = oracle::random_graph(30, 30, 0.2, gen);
  TrainConfig cfg = small_config();
  cfg.epochs = 3;
  cfg.valid_fraction = 0.1;
  const auto res = fit(g, cfg);
  EXPECT_TRUE(res.best_valid_ndcg.has_value());
  const auto carved = carve_validation(g, 0.1, cfg.seed);
  EXPECT_EQ(res.history.front().bpr_triples, carved.train.num_edges());
}

TEST(Train, DivergenceNamesEpochAndBatch) {
  std::mt19937_64 gen(11);
  const auto g = oracle::random_graph(10, 10, 0.3, gen);
  TrainConfig cfg = small_config();
  cfg.optimizer = Optimizer::kSgd;
  cfg.base_lr = cfg.min_lr = 1e200;
  try {
    train(g, nullptr, cfg);
    FAIL() << "expected divergence";
  } catch (const Diverged& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("epoch"), std::string::npos);
    EXPECT_NE(m.find("batch"), std::string::npos);
  }
}

TEST(Train, StaleHStillLearns) {
  std::mt19937_64 gen(12);
  const auto g = oracle::random_graph(20, 20, 0.2, gen);
  TrainConfig cfg = small_config();
  cfg.stale_h = true;
  cfg.batch_size = 8;
  const auto res = train(g, nullptr, cfg);
  EXPECT_LT(res.history.back().bpr_loss, res.history.front().bpr_loss);
}

TEST(EpochStats, JsonFields) {
  EpochStats s;
  s.epoch = 3;
  s.valid_ndcg = 0.5;
  const std::string j = s.to_json();
  for (auto key : {"epoch", "bpr_loss", "pbi_loss", "total_loss", "lr", "valid_ndcg"}) {
    EXPECT_NE(j.find(std::string("\"") + key + "\""), std::string::npos) << key;
  }
}
