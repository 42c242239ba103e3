#include "pbi/sampler.hpp"

#include <algorithm>
#include <array>
#include <fstream>

namespace pbi {

namespace {

constexpr std::array<std::pair<PbiStrategy, std::string_view>, 5> kStrategyNames{{
    {PbiStrategy::kNone, "none"},
    {PbiStrategy::kPopPosNT, "poppos-nt"},
    {PbiStrategy::kPopPosFT, "poppos-ft"},
    {PbiStrategy::kPopNegNT, "popneg-nt"},
    {PbiStrategy::kPopNegFT, "popneg-ft"},
}};

bool contains(std::span<const Index> sorted, Index v) {
  return std::binary_search(sorted.begin(), sorted.end(), v);
}

Index pick(std::span<const Index> v, Rng& rng) { return v[uniform_index(rng, v.size())]; }

}  // namespace

std::string_view strategy_name(PbiStrategy s) {
  for (const auto& [k, name] : kStrategyNames) {
    if (k == s) return name;
  }
  return "none";
}

std::optional<PbiStrategy> parse_strategy(std::string_view name) {
  for (const auto& [k, n] : kStrategyNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

WeightedSampler::WeightedSampler(std::vector<Index> items, std::span<const double> weights)
    : items_(std::move(items)) {
  if (items_.empty()) throw InvalidArgument("weighted sampler needs at least one item");
  if (weights.size() != items_.size()) throw InvalidArgument("one weight per item required");
  cumulative_.reserve(weights.size());
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw InvalidArgument("sampling weights must be positive");
    total += w;
    cumulative_.push_back(total);
  }
}

Index WeightedSampler::draw(Rng& rng) const {
  const double target = uniform_unit(rng) * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  if (it == cumulative_.end()) --it;  // target rounded up to the total
  return items_[static_cast<std::size_t>(it - cumulative_.begin())];
}

double WeightedSampler::probability(std::size_t position) const {
  const double prev = position == 0 ? 0.0 : cumulative_[position - 1];
  return (cumulative_[position] - prev) / cumulative_.back();
}

namespace {

std::vector<double> weights_for(std::span<const Index> items,
                                std::span<const std::uint32_t> degrees, bool inverse) {
  std::vector<double> w;
  w.reserve(items.size());
  for (Index i : items) {
    if (i >= degrees.size()) throw InvalidArgument("item index outside the degree table");
    const auto d = degrees[i];
    if (d < 1) throw InvalidArgument("popularity sampling requires degree >= 1");
    w.push_back(inverse ? 1.0 / d : static_cast<double>(d));
  }
  return w;
}

}  // namespace

WeightedSampler build_pop_sampler(std::span<const Index> items,
                                  std::span<const std::uint32_t> degrees) {
  if (items.empty()) throw InvalidArgument("build_pop_sampler: empty item list");
  const auto w = weights_for(items, degrees, false);
  return WeightedSampler({items.begin(), items.end()}, w);
}

WeightedSampler build_unpop_sampler(std::span<const Index> items,
                                    std::span<const std::uint32_t> degrees) {
  if (items.empty()) throw InvalidArgument("build_unpop_sampler: empty item list");
  const auto w = weights_for(items, degrees, true);
  return WeightedSampler({items.begin(), items.end()}, w);
}

std::vector<TrainingTriple> sample_bpr_triples(const InteractionGraph& train, std::size_t n,
                                               Rng& rng) {
  std::vector<Index> pool;
  for (Index u = 0; u < train.num_users(); ++u) {
    const auto d = train.user_degree(u);
    if (d >= 1 && d < train.num_items()) pool.push_back(u);
  }
  if (pool.empty()) throw InvalidArgument("no user has both a positive and a negative item");
  std::vector<TrainingTriple> out;
  out.reserve(n);
  const auto num_items = train.num_items();
  for (std::size_t k = 0; k < n; ++k) {
    const Index u = pick(pool, rng);
    const auto pos = train.items_of(u);
    const Index i = pick(pos, rng);
    Index j;
    do {
      j = static_cast<Index>(uniform_index(rng, num_items));
    } while (contains(pos, j));
    out.push_back({u, i, j, TripleOrigin::kBpr});
  }
  return out;
}

PbiSampler::PbiSampler(const InteractionGraph& train, PopularityPartition partition)
    : graph_(&train), partition_(std::move(partition)), degrees_(train.item_degrees()) {
  const std::size_t nu = train.num_users();
  std::vector<char> popular(train.num_items(), 0);
  for (Index i : partition_.popular_items) {
    if (i >= train.num_items()) throw InvalidArgument("partition references unknown item");
    popular[i] = 1;
  }

  unpop_ptr_.assign(1, 0);
  pop_ptr_.assign(1, 0);
  user_pop_.resize(nu);
  user_unpop_.resize(nu);
  std::size_t active_items = 0;
  for (auto d : degrees_) active_items += d > 0 ? 1 : 0;
  const std::size_t n_popular = partition_.popular_items.size();

  for (Index u = 0; u < nu; ++u) {
    const auto pos = train.items_of(u);
    std::size_t n_pop = 0;
    std::size_t n_unpop = 0;
    for (Index i : pos) {
      if (popular[i]) {
        pop_pos_.push_back(i);
        ++n_pop;
      } else if (degrees_[i] > 0) {
        unpop_pos_.push_back(i);
        ++n_unpop;
      }
    }
    pop_ptr_.push_back(pop_pos_.size());
    unpop_ptr_.push_back(unpop_pos_.size());
    if (!pos.empty()) {
      user_pop_[u] = build_pop_sampler(pos, degrees_);
      user_unpop_[u] = build_unpop_sampler(pos, degrees_);
    }
    if (n_pop >= 1 && n_unpop >= 1) poppos_ft_users_.push_back(u);
    if (pos.size() >= 2) poppos_nt_users_.push_back(u);
    if (n_unpop >= 1 && n_popular > n_pop) popneg_ft_users_.push_back(u);
    if (!pos.empty() && pos.size() < active_items) popneg_nt_users_.push_back(u);
  }

  std::vector<Index> active;
  for (Index i = 0; i < train.num_items(); ++i) {
    if (degrees_[i] > 0) active.push_back(i);
  }
  if (!active.empty()) all_pop_ = build_pop_sampler(active, degrees_);
}

namespace {

std::vector<TrainingTriple> empty_pool(std::string_view variant) {
  warn(std::string(variant) + ": no user qualifies; PBi loss is 0 for this epoch");
  return {};
}

}  // namespace

std::vector<TrainingTriple> PbiSampler::sample_poppos_ft(std::size_t n, Rng& rng) const {
  if (poppos_ft_users_.empty()) return empty_pool("poppos-ft");
  std::vector<TrainingTriple> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Index u = pick(poppos_ft_users_, rng);
    const std::span<const Index> unpop(unpop_pos_.data() + unpop_ptr_[u],
                                       unpop_pos_.data() + unpop_ptr_[u + 1]);
    const std::span<const Index> pop(pop_pos_.data() + pop_ptr_[u], pop_pos_.data() + pop_ptr_[u + 1]);
    const Index i = pick(unpop, rng);
    const Index j = pick(pop, rng);
    out.push_back({u, i, j, TripleOrigin::kPbi});
  }
  return out;
}

std::vector<TrainingTriple> PbiSampler::sample_poppos_nt(std::size_t n, Rng& rng) const {
  if (poppos_nt_users_.empty()) return empty_pool("poppos-nt");
  std::vector<TrainingTriple> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Index u = pick(poppos_nt_users_, rng);
    const Index i = user_unpop_[u].draw(rng);
    Index j;
    do {
      j = user_pop_[u].draw(rng);
    } while (j == i);
    out.push_back({u, i, j, TripleOrigin::kPbi});
  }
  return out;
}

std::vector<TrainingTriple> PbiSampler::sample_popneg_ft(std::size_t n, Rng& rng) const {
  if (popneg_ft_users_.empty()) return empty_pool("popneg-ft");
  std::vector<TrainingTriple> out;
  out.reserve(n);
  const std::span<const Index> popular = partition_.popular_items;
  for (std::size_t k = 0; k < n; ++k) {
    const Index u = pick(popneg_ft_users_, rng);
    const std::span<const Index> unpop(unpop_pos_.data() + unpop_ptr_[u],
                                       unpop_pos_.data() + unpop_ptr_[u + 1]);
    const Index i = pick(unpop, rng);
    const auto pos = graph_->items_of(u);
    Index j;
    do {
      j = pick(popular, rng);
    } while (contains(pos, j));
    out.push_back({u, i, j, TripleOrigin::kPbi});
  }
  return out;
}

std::vector<TrainingTriple> PbiSampler::sample_popneg_nt(std::size_t n, Rng& rng) const {
  if (popneg_nt_users_.empty()) return empty_pool("popneg-nt");
  std::vector<TrainingTriple> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Index u = pick(popneg_nt_users_, rng);
    const Index i = user_unpop_[u].draw(rng);
    const auto pos = graph_->items_of(u);
    Index j;
    do {
      j = all_pop_.draw(rng);
    } while (contains(pos, j));
    out.push_back({u, i, j, TripleOrigin::kPbi});
  }
  return out;
}

std::vector<TrainingTriple> PbiSampler::sample(PbiStrategy strategy, std::size_t n,
                                               Rng& rng) const {
  switch (strategy) {
    case PbiStrategy::kPopPosFT:
      return sample_poppos_ft(n, rng);
    case PbiStrategy::kPopPosNT:
      return sample_poppos_nt(n, rng);
    case PbiStrategy::kPopNegFT:
      return sample_popneg_ft(n, rng);
    case PbiStrategy::kPopNegNT:
      return sample_popneg_nt(n, rng);
    case PbiStrategy::kNone:
      break;
  }
  return {};
}

void write_triples(std::span<const TrainingTriple> triples, const std::filesystem::path& path,
                   bool append) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw IoError("cannot write triples to '" + path.string() + "'");
  for (const auto& t : triples) {
    out << (t.origin == TripleOrigin::kBpr ? "BPR" : "PBI") << '\t' << t.user << '\t'
        << t.first_item << '\t' << t.second_item << '\n';
  }
}

}  // namespace pbi
