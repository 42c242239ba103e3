#include "pbi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pbi {

namespace {

bool contains(std::span<const Index> sorted, Index v) {
  return std::binary_search(sorted.begin(), sorted.end(), v);
}

std::size_t hits_at(const RankedList& ranked, std::span<const Index> relevant, std::size_t k) {
  std::size_t hits = 0;
  const std::size_t n = std::min(k, ranked.items.size());
  for (std::size_t p = 0; p < n; ++p) hits += contains(relevant, ranked.items[p]) ? 1 : 0;
  return hits;
}

void require_k(std::size_t k) {
  if (k < 1) throw InvalidArgument("cutoff k must be >= 1");
}

}  // namespace

RankedList rank_items(const Matrix& h, std::size_t num_users, Index user,
                      std::span<const Index> train_positives, std::size_t limit) {
  const auto num_items = static_cast<std::size_t>(h.rows()) - num_users;
  if (user >= num_users) throw InvalidArgument("user index out of range");
  const Eigen::VectorXd s =
      h.bottomRows(static_cast<Eigen::Index>(num_items)) * h.row(user).transpose();

  std::vector<Index> cand;
  cand.reserve(num_items);
  for (Index i = 0; i < num_items; ++i) {
    if (!contains(train_positives, i)) cand.push_back(i);
  }
  auto better = [&](Index a, Index b) {
    if (s[a] != s[b]) return s[a] > s[b];
    return a < b;
  };
  if (limit > 0 && limit < cand.size()) {
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(limit), cand.end(),
                      better);
    cand.resize(limit);
  } else {
    std::sort(cand.begin(), cand.end(), better);
  }
  RankedList out;
  out.user = user;
  out.scores.reserve(cand.size());
  for (Index i : cand) out.scores.push_back(s[i]);
  out.items = std::move(cand);
  return out;
}

double f1_at_k(const RankedList& ranked, std::span<const Index> relevant, std::size_t k) {
  require_k(k);
  if (relevant.empty()) throw InvalidArgument("f1_at_k: no relevant items");
  const double hits = static_cast<double>(hits_at(ranked, relevant, k));
  const double precision = hits / static_cast<double>(k);
  const double recall = hits / static_cast<double>(relevant.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double ndcg_at_k(const RankedList& ranked, std::span<const Index> relevant, std::size_t k) {
  require_k(k);
  if (relevant.empty()) throw InvalidArgument("ndcg_at_k: no relevant items");
  double dcg = 0.0;
  const std::size_t n = std::min(k, ranked.items.size());
  for (std::size_t p = 0; p < n; ++p) {
    if (contains(relevant, ranked.items[p])) dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  }
  double idcg = 0.0;
  const std::size_t ideal = std::min(k, relevant.size());
  for (std::size_t p = 0; p < ideal; ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  return dcg / idcg;
}

double map_at_k(const RankedList& ranked, std::span<const Index> relevant, std::size_t k) {
  require_k(k);
  if (relevant.empty()) throw InvalidArgument("map_at_k: no relevant items");
  double sum = 0.0;
  std::size_t hits = 0;
  const std::size_t n = std::min(k, ranked.items.size());
  for (std::size_t p = 0; p < n; ++p) {
    if (contains(relevant, ranked.items[p])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(p + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t p = 0; p < order.size();) {
    std::size_t q = p;
    while (q + 1 < order.size() && values[order[q + 1]] == values[order[p]]) ++q;
    // Positions p..q (0-based) share the mean 1-based rank.
    const double mean_rank = 0.5 * static_cast<double>(p + q) + 1.0;
    for (std::size_t t = p; t <= q; ++t) ranks[order[t]] = mean_rank;
    p = q + 1;
  }
  return ranks;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const auto rx = fractional_ranks(x);
  const auto ry = fractional_ranks(y);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < rx.size(); ++k) {
    const double dx = rx[k] - mx;
    const double dy = ry[k] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

struct UserOutcome {
  bool evaluated = false;
  double f1 = 0.0;
  double ndcg = 0.0;
  double map = 0.0;
  std::optional<double> neg_src;
  // Full-list ranks of the user's test items, aligned with test.items_of(u).
  std::vector<double> test_ranks;
};

void check_pair(const Matrix& h, const InteractionGraph& train, const InteractionGraph& test) {
  if (train.num_users() != test.num_users() || train.num_items() != test.num_items()) {
    throw ShapeMismatch("train graph is " + std::to_string(train.num_users()) + "x" +
                        std::to_string(train.num_items()) + " but test graph is " +
                        std::to_string(test.num_users()) + "x" +
                        std::to_string(test.num_items()));
  }
  if (static_cast<std::size_t>(h.rows()) != train.num_nodes()) {
    throw ShapeMismatch("embeddings have " + std::to_string(h.rows()) + " rows but graph has " +
                        std::to_string(train.num_nodes()) + " nodes (" +
                        std::to_string(train.num_users()) + " users + " +
                        std::to_string(train.num_items()) + " items)");
  }
}

std::vector<UserOutcome> evaluate_users(const Matrix& h, const InteractionGraph& train,
                                        const InteractionGraph& test, std::size_t k) {
  check_pair(h, train, test);
  require_k(k);
  const std::size_t nu = train.num_users();
  std::vector<UserOutcome> out(nu);
  parallel_for(nu, [&](std::size_t begin, std::size_t end) {
    for (std::size_t uu = begin; uu < end; ++uu) {
      const auto u = static_cast<Index>(uu);
      const auto relevant = test.items_of(u);
      if (relevant.empty()) continue;
      const auto ranked = rank_items(h, nu, u, train.items_of(u));
      UserOutcome& r = out[u];
      r.evaluated = true;
      r.f1 = f1_at_k(ranked, relevant, k);
      r.ndcg = ndcg_at_k(ranked, relevant, k);
      r.map = map_at_k(ranked, relevant, k);
      r.test_ranks.assign(relevant.size(), 0.0);
      for (std::size_t p = 0; p < ranked.items.size(); ++p) {
        const auto it = std::lower_bound(relevant.begin(), relevant.end(), ranked.items[p]);
        if (it != relevant.end() && *it == ranked.items[p]) {
          r.test_ranks[static_cast<std::size_t>(it - relevant.begin())] = static_cast<double>(p + 1);
        }
      }
      std::vector<double> pops;
      pops.reserve(relevant.size());
      for (Index i : relevant) pops.push_back(train.item_degree(i));
      if (auto src = spearman(pops, r.test_ranks)) r.neg_src = -*src;
    }
  });
  return out;
}

PruResult reduce_pru(const std::vector<UserOutcome>& users) {
  PruResult res;
  double sum = 0.0;
  for (const auto& u : users) {
    if (!u.evaluated) continue;
    if (u.neg_src) {
      sum += *u.neg_src;
      ++res.users_evaluated;
    } else {
      ++res.users_skipped;
    }
  }
  if (res.users_evaluated > 0) res.value = sum / static_cast<double>(res.users_evaluated);
  return res;
}

PriResult reduce_pri(const std::vector<UserOutcome>& users, const InteractionGraph& train,
                     const InteractionGraph& test) {
  std::vector<double> rank_sum(test.num_items(), 0.0);
  for (Index u = 0; u < users.size(); ++u) {
    if (!users[u].evaluated) continue;
    const auto items = test.items_of(u);
    for (std::size_t t = 0; t < items.size(); ++t) rank_sum[items[t]] += users[u].test_ranks[t];
  }
  std::vector<double> pops;
  std::vector<double> mean_ranks;
  for (Index i = 0; i < test.num_items(); ++i) {
    const auto holders = test.item_degree(i);
    if (holders == 0) continue;
    pops.push_back(train.item_degree(i));
    mean_ranks.push_back(rank_sum[i] / holders);
  }
  PriResult res;
  res.items_evaluated = pops.size();
  if (auto src = spearman(pops, mean_ranks)) res.value = -*src;
  return res;
}

}  // namespace

PruResult pru(const Matrix& h, const InteractionGraph& test, const InteractionGraph& train) {
  return reduce_pru(evaluate_users(h, train, test, 1));
}

PriResult pri(const Matrix& h, const InteractionGraph& test, const InteractionGraph& train) {
  return reduce_pri(evaluate_users(h, train, test, 1), train, test);
}

MetricReport evaluate(const Matrix& h, const InteractionGraph& train, const InteractionGraph& test,
                      std::size_t k) {
  const auto users = evaluate_users(h, train, test, k);
  MetricReport rep;
  rep.k = k;
  for (const auto& u : users) {
    if (!u.evaluated) continue;
    rep.f1 += u.f1;
    rep.ndcg += u.ndcg;
    rep.map += u.map;
    ++rep.n_users_evaluated;
  }
  if (rep.n_users_evaluated > 0) {
    const double n = static_cast<double>(rep.n_users_evaluated);
    rep.f1 /= n;
    rep.ndcg /= n;
    rep.map /= n;
  }
  const auto p = reduce_pru(users);
  rep.pru = p.value;
  rep.n_users_skipped_pru = p.users_skipped;
  const auto q = reduce_pri(users, train, test);
  rep.pri = q.value;
  rep.n_items_evaluated_pri = q.items_evaluated;
  return rep;
}

double mean_ndcg(const Matrix& h, const InteractionGraph& train, const InteractionGraph& held_out,
                 std::size_t k) {
  check_pair(h, train, held_out);
  require_k(k);
  const std::size_t nu = train.num_users();
  std::vector<double> per_user(nu, -1.0);
  parallel_for(nu, [&](std::size_t begin, std::size_t end) {
    for (std::size_t uu = begin; uu < end; ++uu) {
      const auto u = static_cast<Index>(uu);
      const auto relevant = held_out.items_of(u);
      if (relevant.empty()) continue;
      const auto ranked = rank_items(h, nu, u, train.items_of(u), k);
      per_user[u] = ndcg_at_k(ranked, relevant, k);
    }
  });
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : per_user) {
    if (v >= 0.0) {
      sum += v;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace pbi
