#include "pbi/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pbi/rng.hpp"

namespace pbi {

Index IdMap::intern_user(const std::string& id) {
  auto [it, inserted] = user_index.try_emplace(id, static_cast<Index>(user_ids.size()));
  if (inserted) user_ids.push_back(id);
  return it->second;
}

Index IdMap::intern_item(const std::string& id) {
  auto [it, inserted] = item_index.try_emplace(id, static_cast<Index>(item_ids.size()));
  if (inserted) item_ids.push_back(id);
  return it->second;
}

InteractionGraph InteractionGraph::from_edges(std::size_t num_users, std::size_t num_items,
                                              std::vector<Edge> edges,
                                              std::shared_ptr<const IdMap> ids,
                                              std::size_t* duplicates) {
  for (const Edge& e : edges) {
    if (e.user >= num_users || e.item >= num_items) {
      throw InvalidArgument("edge (" + std::to_string(e.user) + ", " + std::to_string(e.item) +
                            ") out of range for " + std::to_string(num_users) + " users x " +
                            std::to_string(num_items) + " items");
    }
  }
  if (ids && (ids->user_ids.size() != num_users || ids->item_ids.size() != num_items)) {
    throw ShapeMismatch("id map does not match graph shape");
  }
  std::sort(edges.begin(), edges.end());
  const std::size_t before = edges.size();
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  if (duplicates != nullptr) *duplicates = before - edges.size();

  InteractionGraph g;
  g.num_users_ = num_users;
  g.num_items_ = num_items;
  g.ids_ = std::move(ids);

  g.user_ptr_.assign(num_users + 1, 0);
  g.item_ptr_.assign(num_items + 1, 0);
  for (const Edge& e : edges) {
    ++g.user_ptr_[e.user + 1];
    ++g.item_ptr_[e.item + 1];
  }
  std::partial_sum(g.user_ptr_.begin(), g.user_ptr_.end(), g.user_ptr_.begin());
  std::partial_sum(g.item_ptr_.begin(), g.item_ptr_.end(), g.item_ptr_.begin());

  // Edges are sorted by (user, item), so both fills below produce sorted lists.
  g.item_of_edge_.resize(edges.size());
  g.user_of_edge_.resize(edges.size());
  std::vector<std::size_t> cursor(g.item_ptr_.begin(), g.item_ptr_.end() - 1);
  for (std::size_t k = 0; k < edges.size(); ++k) {
    g.item_of_edge_[k] = edges[k].item;
    g.user_of_edge_[cursor[edges[k].item]++] = edges[k].user;
  }
  return g;
}

std::vector<std::uint32_t> InteractionGraph::item_degrees() const {
  std::vector<std::uint32_t> d(num_items_);
  for (Index i = 0; i < num_items_; ++i) d[i] = item_degree(i);
  return d;
}

bool InteractionGraph::has_edge(Index user, Index item) const {
  const auto items = items_of(user);
  return std::binary_search(items.begin(), items.end(), item);
}

std::vector<Edge> InteractionGraph::edges() const {
  std::vector<Edge> out;
  out.reserve(num_edges());
  for (Index u = 0; u < num_users_; ++u) {
    for (Index i : items_of(u)) out.push_back({u, i});
  }
  return out;
}

namespace {

struct RawPair {
  std::string user;
  std::string item;
};

std::vector<RawPair> read_pairs(const std::filesystem::path& path, LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open edge list '" + path.string() + "'");
  std::vector<RawPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
        line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected 'user_id<TAB>item_id'");
    }
    pairs.push_back({line.substr(0, tab), line.substr(tab + 1)});
  }
  if (in.bad()) throw IoError("read error on '" + path.string() + "'");
  if (pairs.empty()) throw ParseError("edge list '" + path.string() + "' has no edges");
  if (report != nullptr) report->lines = pairs.size();
  return pairs;
}

std::vector<Edge> intern(const std::vector<RawPair>& pairs, IdMap& ids) {
  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (const auto& p : pairs) edges.push_back({ids.intern_user(p.user), ids.intern_item(p.item)});
  return edges;
}

InteractionGraph build_reported(std::vector<Edge> edges, const std::shared_ptr<const IdMap>& ids,
                                LoadReport* report, const std::filesystem::path& path) {
  std::size_t dups = 0;
  auto g = InteractionGraph::from_edges(ids->user_ids.size(), ids->item_ids.size(),
                                        std::move(edges), ids, &dups);
  if (report != nullptr) report->duplicates = dups;
  if (dups > 0) {
    warn(path.string() + ": collapsed " + std::to_string(dups) + " duplicate edge line(s)");
  }
  return g;
}

}  // namespace

InteractionGraph load_edge_list(const std::filesystem::path& path, LoadReport* report) {
  const auto pairs = read_pairs(path, report);
  auto ids = std::make_shared<IdMap>();
  auto edges = intern(pairs, *ids);
  return build_reported(std::move(edges), ids, report, path);
}

GraphPair load_edge_list_pair(const std::filesystem::path& train_path,
                              const std::filesystem::path& test_path, LoadReport* train_report,
                              LoadReport* test_report) {
  const auto train_pairs = read_pairs(train_path, train_report);
  const auto test_pairs = read_pairs(test_path, test_report);
  auto ids = std::make_shared<IdMap>();
  auto train_edges = intern(train_pairs, *ids);
  auto test_edges = intern(test_pairs, *ids);
  GraphPair out;
  out.train = build_reported(std::move(train_edges), ids, train_report, train_path);
  out.test = build_reported(std::move(test_edges), ids, test_report, test_path);
  return out;
}

void write_edge_list(const InteractionGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  const IdMap* ids = graph.ids().get();
  for (Index u = 0; u < graph.num_users(); ++u) {
    for (Index i : graph.items_of(u)) {
      if (ids != nullptr) {
        out << ids->user_ids[u] << '\t' << ids->item_ids[i] << '\n';
      } else {
        out << u << '\t' << i << '\n';
      }
    }
  }
  if (!out) throw IoError("write error on '" + path.string() + "'");
}

double density(std::size_t num_users, std::size_t num_items, std::size_t num_edges) {
  if (num_users == 0 || num_items == 0) throw InvalidArgument("density of an empty graph");
  return static_cast<double>(num_edges) /
         (static_cast<double>(num_users) * static_cast<double>(num_items));
}

double density(const InteractionGraph& graph) {
  return density(graph.num_users(), graph.num_items(), graph.num_edges());
}

namespace {

SplitPair split_with(const InteractionGraph& graph, double test_fraction, Rng& rng) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidArgument("test_fraction must lie in (0, 1)");
  }
  std::vector<Edge> train;
  std::vector<Edge> test;
  train.reserve(graph.num_edges());
  std::vector<Index> items;
  for (Index u = 0; u < graph.num_users(); ++u) {
    const auto pos = graph.items_of(u);
    items.assign(pos.begin(), pos.end());
    const std::size_t d = items.size();
    if (d == 0) continue;
    // Every user keeps at least one training edge.
    const auto n_test = std::min(d - 1, static_cast<std::size_t>(std::floor(test_fraction * d + 0.5)));
    // Partial Fisher-Yates: the first n_test slots become the test sample.
    for (std::size_t k = 0; k < n_test; ++k) {
      const std::size_t j = k + uniform_index(rng, d - k);
      std::swap(items[k], items[j]);
    }
    for (std::size_t k = 0; k < d; ++k) (k < n_test ? test : train).push_back({u, items[k]});
  }
  SplitPair out;
  out.train = InteractionGraph::from_edges(graph.num_users(), graph.num_items(), std::move(train),
                                           graph.ids());
  out.test = InteractionGraph::from_edges(graph.num_users(), graph.num_items(), std::move(test),
                                          graph.ids());
  return out;
}

}  // namespace

SplitPair split_holdout(const InteractionGraph& graph, double test_fraction, std::uint64_t seed) {
  Rng rng(seed);
  auto out = split_with(graph, test_fraction, rng);
  out.seed = seed;
  return out;
}

SplitPair carve_validation(const InteractionGraph& train, double fraction, std::uint64_t seed) {
  Rng rng = make_stream(seed, 3);
  auto out = split_with(train, fraction, rng);
  out.seed = seed;
  return out;
}

bool PopularityPartition::is_popular(Index item) const {
  return std::binary_search(popular_items.begin(), popular_items.end(), item);
}

PopularityPartition classify_popular(const InteractionGraph& graph, std::uint32_t alpha) {
  if (alpha < 1) throw InvalidArgument("popularity threshold alpha must be >= 1");
  PopularityPartition p;
  p.threshold_alpha = alpha;
  for (Index i = 0; i < graph.num_items(); ++i) {
    const auto d = graph.item_degree(i);
    if (d == 0) continue;
    (d >= alpha ? p.popular_items : p.unpopular_items).push_back(i);
  }
  if (p.popular_items.empty()) {
    warn("popularity threshold " + std::to_string(alpha) +
         " exceeds every item degree; no item is popular");
  }
  return p;
}

std::uint32_t percentile_threshold(std::span<const std::uint32_t> degrees, double top_fraction) {
  if (!(top_fraction > 0.0 && top_fraction < 1.0)) {
    throw InvalidArgument("top_fraction must lie in (0, 1)");
  }
  std::vector<std::uint32_t> d;
  for (auto v : degrees) {
    if (v > 0) d.push_back(v);
  }
  if (d.empty()) throw InvalidArgument("no item has degree >= 1");
  std::sort(d.begin(), d.end());
  const double bound = top_fraction * static_cast<double>(d.size()) + 1e-9;
  // Candidates are the attained degrees in increasing order; the count of
  // items at or above a candidate is everything from its first occurrence on.
  for (std::size_t k = 0; k < d.size();) {
    const std::size_t at_or_above = d.size() - k;
    if (static_cast<double>(at_or_above) <= bound) return d[k];
    const auto v = d[k];
    while (k < d.size() && d[k] == v) ++k;
  }
  return d.back() + 1;
}

std::uint32_t percentile_threshold(const InteractionGraph& graph, double top_fraction) {
  const auto degrees = graph.item_degrees();
  return percentile_threshold(degrees, top_fraction);
}

}  // namespace pbi
