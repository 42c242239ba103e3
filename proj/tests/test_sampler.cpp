#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "oracles.hpp"
#include "pbi/sampler.hpp"

using namespace pbi;

namespace {

constexpr std::size_t kDraws = 100000;

std::vector<std::size_t> histogram(const WeightedSampler& s, std::size_t draws, Rng& rng) {
  std::map<Index, std::size_t> pos;
  for (std::size_t k = 0; k < s.size(); ++k) pos[s.items()[k]] = k;
  std::vector<std::size_t> h(s.size(), 0);
  for (std::size_t k = 0; k < draws; ++k) ++h[pos.at(s.draw(rng))];
  return h;
}

bool positive(const InteractionGraph& g, Index u, Index i) { return g.has_edge(u, i); }

struct Silence {
  std::vector<std::string> messages;
  Silence() {
    set_log_sink([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~Silence() { set_log_sink(nullptr); }
};

}  // namespace

TEST(Weighted, PopAndUnpopProbabilities) {
  const std::vector<Index> items{0, 1};
  const std::vector<std::uint32_t> deg{1, 3};
  const auto pop = build_pop_sampler(items, deg);
  const auto unpop = build_unpop_sampler(items, deg);
  EXPECT_DOUBLE_EQ(pop.probability(0), 0.25);
  EXPECT_DOUBLE_EQ(pop.probability(1), 0.75);
  EXPECT_DOUBLE_EQ(unpop.probability(0), 0.75);
  EXPECT_DOUBLE_EQ(unpop.probability(1), 0.25);

  const std::vector<Index> three{0, 1, 2};
  const std::vector<std::uint32_t> d124{1, 2, 4};
  const auto u3 = build_unpop_sampler(three, d124);
  EXPECT_NEAR(u3.probability(0), 4.0 / 7.0, 1e-15);
  EXPECT_NEAR(u3.probability(1), 2.0 / 7.0, 1e-15);
  EXPECT_NEAR(u3.probability(2), 1.0 / 7.0, 1e-15);

  const std::vector<std::uint32_t> equal{5, 5, 5};
  const auto uni = build_pop_sampler(three, equal);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(uni.probability(k), 1.0 / 3.0, 1e-15);

  const std::vector<Index> one{2};
  EXPECT_DOUBLE_EQ(build_unpop_sampler(one, d124).probability(0), 1.0);
}

TEST(Weighted, CumulativeWeightsStrictlyIncrease) {
  const std::vector<Index> items{0, 1, 2, 3};
  const std::vector<std::uint32_t> deg{7, 1, 1, 30};
  for (const auto& s : {build_pop_sampler(items, deg), build_unpop_sampler(items, deg)}) {
    const auto c = s.cumulative_weights();
    EXPECT_GT(c.front(), 0.0);
    EXPECT_TRUE(std::adjacent_find(c.begin(), c.end(), std::greater_equal<>()) == c.end());
  }
}

TEST(Weighted, RejectsEmptyAndZeroDegree) {
  const std::vector<Index> none;
  const std::vector<std::uint32_t> deg{0, 2};
  EXPECT_THROW(build_pop_sampler(none, deg), InvalidArgument);
  EXPECT_THROW(build_unpop_sampler(none, deg), InvalidArgument);
  const std::vector<Index> zero{0};
  EXPECT_THROW(build_unpop_sampler(zero, deg), InvalidArgument);
}

TEST(Weighted, EmpiricalLawChiSquare) {
  const std::vector<Index> items{0, 1, 2};
  Rng rng = make_stream(1, 9);
  const std::vector<std::uint32_t> d235{2, 3, 5};
  EXPECT_GT(oracle::chi_square_p(histogram(build_pop_sampler(items, d235), kDraws, rng),
                                 {0.2, 0.3, 0.5}),
            0.01);
  const std::vector<std::uint32_t> d124{1, 2, 4};
  EXPECT_GT(oracle::chi_square_p(histogram(build_unpop_sampler(items, d124), kDraws, rng),
                                 {4.0 / 7, 2.0 / 7, 1.0 / 7}),
            0.01);
}

TEST(Bpr, ForcedTriple) {
  const auto g = oracle::graph(1, 2, {{0, 0}});
  Rng rng = make_stream(0, 1);
  for (const auto& t : sample_bpr_triples(g, 50, rng)) {
    EXPECT_EQ(t, (TrainingTriple{0, 0, 1, TripleOrigin::kBpr}));
  }
}

TEST(Bpr, MembershipAndDeterminism) {
  std::mt19937_64 gen(2);
  const auto g = oracle::random_graph(20, 15, 0.3, gen);
  Rng a = make_stream(4, 1);
  Rng b = make_stream(4, 1);
  const auto ta = sample_bpr_triples(g, 10000, a);
  EXPECT_EQ(ta, sample_bpr_triples(g, 10000, b));
  for (const auto& t : ta) {
    EXPECT_TRUE(positive(g, t.user, t.first_item));
    EXPECT_FALSE(positive(g, t.user, t.second_item));
    EXPECT_NE(t.first_item, t.second_item);
  }
}

TEST(Bpr, UsersUniformAndSaturatedUsersSkipped) {
  // user 3 has every item and can never appear
  const auto g = oracle::graph(4, 3, {{0, 0}, {1, 1}, {1, 2}, {2, 0}, {2, 2}, {3, 0}, {3, 1}, {3, 2}});
  Rng rng = make_stream(6, 1);
  std::vector<std::size_t> h(3, 0);
  for (const auto& t : sample_bpr_triples(g, kDraws, rng)) {
    ASSERT_LT(t.user, 3u);
    ++h[t.user];
  }
  EXPECT_GT(oracle::chi_square_p(h, {1.0 / 3, 1.0 / 3, 1.0 / 3}), 0.01);
}

TEST(Bpr, NoQualifyingUserThrows) {
  const auto g = oracle::graph(1, 1, {{0, 0}});
  Rng rng = make_stream(0, 1);
  EXPECT_THROW(sample_bpr_triples(g, 1, rng), InvalidArgument);
}

namespace {

// users 1..4 make item 0 popular at alpha=3; items 1 and 2 have degree 1
InteractionGraph two_class_graph(std::vector<std::pair<Index, Index>> user0) {
  std::vector<std::pair<Index, Index>> pairs = std::move(user0);
  for (Index u = 1; u <= 4; ++u) pairs.push_back({u, 0});
  pairs.push_back({1, 2});
  return oracle::graph(5, 3, pairs);
}

}  // namespace

TEST(PopPosFt, ForcedTripleAndPool) {
  const auto g = two_class_graph({{0, 0}, {0, 1}});
  const PbiSampler s(g, classify_popular(g, 3));
  Rng rng = make_stream(0, 2);
  const auto ts = s.sample_poppos_ft(200, rng);
  ASSERT_EQ(ts.size(), 200u);
  // user 1 holds {0 popular, 2 unpopular}; user 0 holds {0, 1}
  for (const auto& t : ts) {
    if (t.user == 0) EXPECT_EQ(t, (TrainingTriple{0, 1, 0, TripleOrigin::kPbi}));
    if (t.user == 1) EXPECT_EQ(t, (TrainingTriple{1, 2, 0, TripleOrigin::kPbi}));
  }
  EXPECT_EQ(std::vector<Index>(s.poppos_ft_users().begin(), s.poppos_ft_users().end()),
            (std::vector<Index>{0, 1}));
}

TEST(PopPosFt, OnlyQualifyingUserAppears) {
  // only user 2 has both classes
  const auto g = oracle::graph(3, 4, {{0, 0}, {1, 0}, {2, 0}, {2, 3}, {0, 1}, {1, 1}});
  const PbiSampler s(g, classify_popular(g, 2));
  Rng rng = make_stream(0, 2);
  for (const auto& t : s.sample_poppos_ft(500, rng)) EXPECT_EQ(t.user, 2u);
}

TEST(PopPosNt, TwoItemLaw) {
  // user 0 positives: item 1 (degree 1), item 0 (degree 9)
  std::vector<std::pair<Index, Index>> pairs{{0, 0}, {0, 1}};
  for (Index u = 1; u <= 8; ++u) pairs.push_back({u, 0});
  const auto g = oracle::graph(9, 2, pairs);
  const PbiSampler s(g, classify_popular(g, 1));
  Rng rng = make_stream(3, 2);
  std::size_t low_first = 0;
  std::size_t n = 0;
  for (const auto& t : s.sample_poppos_nt(kDraws, rng)) {
    ASSERT_EQ(t.user, 0u);  // the only user with two positives
    EXPECT_NE(t.first_item, t.second_item);
    low_first += t.first_item == 1;
    ++n;
  }
  EXPECT_GT(oracle::chi_square_p({low_first, n - low_first}, {0.9, 0.1}), 0.01);
}

TEST(PopPosNt, JointLawConditionedOnDistinct) {
  // user 0 holds items 0,1,2 with degrees 1,2,4
  std::vector<std::pair<Index, Index>> pairs{{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}, {3, 2}};
  const auto g = oracle::graph(4, 3, pairs);
  const PbiSampler s(g, classify_popular(g, 1));
  const std::vector<double> deg{1, 2, 4};
  std::vector<double> probs;
  std::vector<std::size_t> counts(9, 0);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      const double pu = (1 / deg[a]) / (1.0 + 0.5 + 0.25);
      const double pp = deg[b] / 7.0;
      probs.push_back(a == b ? 0.0 : pu * pp / (1.0 - deg[a] / 7.0));
    }
  }
  Rng rng = make_stream(6, 2);
  for (const auto& t : s.sample_poppos_nt(3 * kDraws, rng)) {
    if (t.user == 0) ++counts[t.first_item * 3 + t.second_item];
  }
  EXPECT_GT(oracle::chi_square_p(counts, probs), 0.01);
}

TEST(PopNegFt, ForcedTripleAndSkippedUser) {
  // user 0 holds only unpopular item 1; popular = {0}
  const auto g = two_class_graph({{0, 1}});
  const PbiSampler s(g, classify_popular(g, 3));
  Rng rng = make_stream(0, 2);
  for (const auto& t : s.sample_popneg_ft(300, rng)) {
    EXPECT_EQ(t, (TrainingTriple{0, 1, 0, TripleOrigin::kPbi}));
  }
  // user 1 holds the only popular item, so never qualifies
  const auto pool = s.popneg_ft_users();
  EXPECT_EQ(std::vector<Index>(pool.begin(), pool.end()), (std::vector<Index>{0}));
}

TEST(PopNegFt, SecondItemUniformOverUnseenPopular) {
  // items 0..3 popular (degree 3), item 4 unpopular; user 0 holds items 1 and 4
  std::vector<std::pair<Index, Index>> pairs{{0, 1}, {0, 4}};
  for (Index u = 1; u <= 3; ++u) {
    for (Index i = 0; i < 4; ++i) {
      if (!(i == 1 && u == 3)) pairs.push_back({u, i});
    }
  }
  const auto g = oracle::graph(4, 5, pairs);
  const PbiSampler s(g, classify_popular(g, 3));
  Rng rng = make_stream(8, 2);
  std::vector<std::size_t> h(4, 0);
  for (const auto& t : s.sample_popneg_ft(kDraws, rng)) {
    ASSERT_EQ(t.user, 0u);
    ++h[t.second_item];
  }
  EXPECT_EQ(h[1], 0u);
  EXPECT_GT(oracle::chi_square_p(h, {1.0 / 3, 0.0, 1.0 / 3, 1.0 / 3}), 0.01);
}

TEST(PopNegNt, ComplementLaw) {
  // user 0 holds item 0; complement items 1 (degree 1) and 2 (degree 3)
  const auto g = oracle::graph(4, 3, {{0, 0}, {1, 1}, {1, 2}, {2, 2}, {3, 2}, {1, 0}, {2, 0}, {3, 0}});
  const PbiSampler s(g, classify_popular(g, 1));
  Rng rng = make_stream(2, 2);
  std::size_t b = 0;
  std::size_t n = 0;
  for (const auto& t : s.sample_popneg_nt(kDraws, rng)) {
    if (t.user != 0) continue;
    EXPECT_EQ(t.first_item, 0u);  // single positive
    b += t.second_item == 2;
    ++n;
  }
  EXPECT_GT(oracle::chi_square_p({n - b, b}, {0.25, 0.75}), 0.01);
}

TEST(PopNegNt, JointProductForm) {
  // user 0 holds items 0 (deg 1), 1 (deg 3); complement 2 (deg 2), 3 (deg 4), 4 (deg 0)
  std::vector<std::pair<Index, Index>> pairs{{0, 0}, {0, 1}, {1, 1}, {2, 1}, {1, 2}, {2, 2},
                                             {1, 3}, {2, 3}, {3, 3}, {4, 3}};
  const auto g = oracle::graph(5, 5, pairs);
  const PbiSampler s(g, classify_popular(g, 1));
  const double pu0 = 1.0 / (1.0 + 1.0 / 3.0);
  const std::vector<double> probs{pu0 * 2 / 6, pu0 * 4 / 6, (1 - pu0) * 2 / 6, (1 - pu0) * 4 / 6};
  std::vector<std::size_t> counts(4, 0);
  Rng rng = make_stream(12, 2);
  for (const auto& t : s.sample_popneg_nt(3 * kDraws, rng)) {
    if (t.user != 0) continue;
    ASSERT_NE(t.second_item, 4u);  // zero-degree items never drawn
    counts[t.first_item * 2 + (t.second_item == 3 ? 1 : 0)]++;
  }
  EXPECT_GT(oracle::chi_square_p(counts, probs), 0.01);
}

TEST(Pbi, EmptyPoolWarnsAndYieldsNothing) {
  // nothing is popular at alpha 9
  const auto g = oracle::graph(2, 2, {{0, 0}, {1, 1}, {0, 1}});
  Silence quiet;
  const PbiSampler s(g, classify_popular(g, 9));
  Rng rng = make_stream(0, 2);
  EXPECT_TRUE(s.sample_popneg_ft(10, rng).empty());
  EXPECT_TRUE(s.sample_poppos_ft(10, rng).empty());
  EXPECT_GE(quiet.messages.size(), 2u);
  EXPECT_TRUE(s.sample(PbiStrategy::kNone, 10, rng).empty());
}

TEST(Pbi, MembershipPredicatesOnRandomGraphs) {
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 5; ++trial) {
    const auto g = oracle::random_graph(40, 60, 0.08, gen);
    const auto part = classify_popular(g, percentile_threshold(g, 0.2));
    const PbiSampler s(g, part);
    Rng rng = make_stream(trial, 2);
    auto popular = [&](Index i) { return part.is_popular(i); };
    auto unpopular = [&](Index i) { return g.item_degree(i) > 0 && !part.is_popular(i); };
    for (const auto& t : s.sample_poppos_ft(10000, rng)) {
      ASSERT_TRUE(positive(g, t.user, t.first_item) && unpopular(t.first_item));
      ASSERT_TRUE(positive(g, t.user, t.second_item) && popular(t.second_item));
    }
    for (const auto& t : s.sample_poppos_nt(10000, rng)) {
      ASSERT_TRUE(positive(g, t.user, t.first_item));
      ASSERT_TRUE(positive(g, t.user, t.second_item));
      ASSERT_NE(t.first_item, t.second_item);
    }
    for (const auto& t : s.sample_popneg_ft(10000, rng)) {
      ASSERT_TRUE(positive(g, t.user, t.first_item) && unpopular(t.first_item));
      ASSERT_TRUE(!positive(g, t.user, t.second_item) && popular(t.second_item));
    }
    for (const auto& t : s.sample_popneg_nt(10000, rng)) {
      ASSERT_TRUE(positive(g, t.user, t.first_item));
      ASSERT_TRUE(!positive(g, t.user, t.second_item) && g.item_degree(t.second_item) > 0);
      ASSERT_EQ(t.origin, TripleOrigin::kPbi);
    }
  }
}

TEST(Pbi, DeterministicPerSeed) {
  std::mt19937_64 gen(4);
  const auto g = oracle::random_graph(30, 30, 0.1, gen);
  const PbiSampler s(g, classify_popular(g, 4));
  for (auto strat : {PbiStrategy::kPopPosFT, PbiStrategy::kPopPosNT, PbiStrategy::kPopNegFT,
                     PbiStrategy::kPopNegNT}) {
    Rng a = make_stream(77, 2);
    Rng b = make_stream(77, 2);
    EXPECT_EQ(s.sample(strat, 2000, a), s.sample(strat, 2000, b));
  }
}

TEST(Strategy, NamesRoundTrip) {
  for (auto s : {PbiStrategy::kNone, PbiStrategy::kPopPosNT, PbiStrategy::kPopPosFT,
                 PbiStrategy::kPopNegNT, PbiStrategy::kPopNegFT}) {
    EXPECT_EQ(parse_strategy(strategy_name(s)), s);
  }
  EXPECT_EQ(parse_strategy("popneg-ft"), PbiStrategy::kPopNegFT);
  EXPECT_FALSE(parse_strategy("popneg"));
}

TEST(Triples, DumpFormat) {
  oracle::TempDir dir;
  const std::vector<TrainingTriple> ts{{1, 2, 3, TripleOrigin::kBpr}, {4, 5, 6, TripleOrigin::kPbi}};
  write_triples(ts, dir.path / "t.tsv");
  std::ifstream in(dir.path / "t.tsv");
  std::string a;
  std::string b;
  std::getline(in, a);
  std::getline(in, b);
  EXPECT_EQ(a, "BPR\t1\t2\t3");
  EXPECT_EQ(b, "PBI\t4\t5\t6");
}
