#include "multisage/eval.hpp"

#include "multisage/errors.hpp"
#include "multisage/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace multisage {

void SplitConfig::validate() const {
  auto open_unit = [](double x) { return x > 0.0 && x < 1.0; };
  auto half_open = [](double x) { return x > 0.0 && x <= 1.0; };
  if (!open_unit(marked_fraction)) throw ConfigError("marked_fraction must lie in (0, 1)");
  if (!open_unit(intra_test_fraction)) throw ConfigError("intra_test_fraction must lie in (0, 1)");
  if (!half_open(intra_negative_fraction)) throw ConfigError("intra_negative_fraction must lie in (0, 1]");
  if (!half_open(inter_negative_fraction)) throw ConfigError("inter_negative_fraction must lie in (0, 1]");
  if (!(negative_cap_ratio >= 0.0)) throw ConfigError("negative_cap_ratio must be non-negative");
}

std::vector<Edge> EvalSplit::train_positives() const {
  std::vector<Edge> out = train_pos_intra;
  out.insert(out.end(), train_pos_inter.begin(), train_pos_inter.end());
  return out;
}

std::vector<Edge> EvalSplit::test_positives() const {
  std::vector<Edge> out = test_pos_intra;
  out.insert(out.end(), test_pos_inter.begin(), test_pos_inter.end());
  return out;
}

namespace {

std::uint64_t pair_key(const Edge& e) { return (static_cast<std::uint64_t>(e.u) << 32) | e.v; }

std::size_t round_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

// Uniform subset of `k` indices out of [0, n), ascending.
std::vector<std::size_t> choose_indices(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Calls fn(u, v) for every non-adjacent marked pair u < v, intra or inter.
template <typename Fn>
void for_each_marked_nonedge(const MultiplexGraph& g, const std::vector<ReplicaId>& marked, LinkType type, Fn&& fn) {
  for (std::size_t i = 0; i < marked.size(); ++i) {
    const auto u = marked[i];
    for (std::size_t j = i + 1; j < marked.size(); ++j) {
      const auto v = marked[j];
      const bool same = g.layer_of(u) == g.layer_of(v);
      if (same != (type == LinkType::intra)) continue;
      if (g.has_edge(u, v)) continue;
      fn(u, v);
    }
  }
}

// Selection sampling (Knuth's Algorithm S) of `take` pairs from the marked
// non-edge pool of one type.
std::vector<Edge> sample_marked_nonedges(const MultiplexGraph& g, const std::vector<ReplicaId>& marked, LinkType type,
                                         double fraction, std::optional<std::size_t> cap, Rng& rng) {
  std::size_t pool = 0;
  for_each_marked_nonedge(g, marked, type, [&](ReplicaId, ReplicaId) { ++pool; });
  std::size_t take = round_count(fraction, pool);
  if (cap) take = std::min(take, *cap);
  std::vector<Edge> out;
  out.reserve(take);
  std::size_t seen = 0;
  for_each_marked_nonedge(g, marked, type, [&](ReplicaId u, ReplicaId v) {
    const std::size_t remaining = pool - seen++;
    const std::size_t needed = take - out.size();
    if (needed > 0 && uniform_index(rng, remaining) < needed) out.emplace_back(u, v);
  });
  return out;
}

}  // namespace

EvalSplit make_split(const MultiplexGraph& g, const SplitConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t n = g.num_replicas();
  const std::size_t marked_count = round_count(config.marked_fraction, n);
  if (marked_count < 2) {
    throw DataError("graph too small for a marked-node split: " + std::to_string(n) + " replicas");
  }
  Rng rng(seed);
  EvalSplit split;
  split.seed = seed;

  for (auto i : choose_indices(n, marked_count, rng)) split.marked.push_back(static_cast<ReplicaId>(i));
  std::vector<char> is_marked(n, 0);
  for (auto m : split.marked) is_marked[m] = 1;
  auto qualifies = [&](const Edge& e) {
    return config.both_endpoints_marked ? (is_marked[e.u] && is_marked[e.v]) : (is_marked[e.u] || is_marked[e.v]);
  };

  // Positives.
  std::vector<Edge> intra_candidates;
  for (const auto& e : g.intra_edges()) {
    if (qualifies(e)) {
      intra_candidates.push_back(e);
    } else {
      split.train_pos_intra.push_back(e);
    }
  }
  const auto chosen = choose_indices(intra_candidates.size(),
                                     round_count(config.intra_test_fraction, intra_candidates.size()), rng);
  std::vector<char> in_test(intra_candidates.size(), 0);
  for (auto i : chosen) in_test[i] = 1;
  for (std::size_t i = 0; i < intra_candidates.size(); ++i)
    (in_test[i] ? split.test_pos_intra : split.train_pos_intra).push_back(intra_candidates[i]);
  std::sort(split.train_pos_intra.begin(), split.train_pos_intra.end());

  for (const auto& e : g.inter_edges()) (qualifies(e) ? split.test_pos_inter : split.train_pos_inter).push_back(e);

  if (split.test_pos_intra.empty() && split.test_pos_inter.empty()) {
    throw DataError("graph too small for the requested fractions: no test positives");
  }

  // Test negatives among marked nodes.
  auto cap_for = [&](std::size_t positives) -> std::optional<std::size_t> {
    if (config.negative_cap_ratio <= 0.0) return std::nullopt;
    return static_cast<std::size_t>(std::floor(config.negative_cap_ratio * static_cast<double>(positives)));
  };
  split.test_neg_intra = sample_marked_nonedges(g, split.marked, LinkType::intra, config.intra_negative_fraction,
                                                cap_for(split.test_pos_intra.size()), rng);
  split.test_neg_inter = sample_marked_nonedges(g, split.marked, LinkType::inter, config.inter_negative_fraction,
                                                cap_for(split.test_pos_inter.size()), rng);

  // Train negatives from the remaining non-edges.
  std::unordered_set<std::uint64_t> used;
  for (const auto& e : split.test_neg_intra) used.insert(pair_key(e));
  for (const auto& e : split.test_neg_inter) used.insert(pair_key(e));
  const std::size_t train_pos = split.train_pos_intra.size() + split.train_pos_inter.size();
  std::size_t want = train_pos;
  if (auto cap = cap_for(train_pos)) want = std::min(want, *cap);
  const std::size_t max_attempts = 64 * want + 1024;
  std::size_t attempts = 0;
  while (split.train_neg.size() < want) {
    if (++attempts > max_attempts) {
      throw DataError("graph too dense to draw " + std::to_string(want) + " training non-edges");
    }
    auto u = static_cast<ReplicaId>(uniform_index(rng, n));
    auto v = static_cast<ReplicaId>(uniform_index(rng, n));
    if (u == v || g.has_edge(u, v)) continue;
    Edge e = Edge{u, v}.canonical();
    if (!used.insert(pair_key(e)).second) continue;
    split.train_neg.push_back(e);
  }
  std::sort(split.train_neg.begin(), split.train_neg.end());
  return split;
}

MultiplexGraph training_graph(const MultiplexGraph& g, const EvalSplit& split) {
  return remove_edges(g, split.test_positives());
}

// ---------------------------------------------------------------------------
// ROC / AUC

double mann_whitney_auc(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw std::invalid_argument("AUC needs non-empty positive and negative lists");
  std::vector<double> sorted(neg.begin(), neg.end());
  std::sort(sorted.begin(), sorted.end());
  // Twice the Mann–Whitney count keeps ties integral.
  std::uint64_t twice = 0;
  for (double p : pos) {
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), p);
    auto hi = std::upper_bound(lo, sorted.end(), p);
    twice += 2 * static_cast<std::uint64_t>(lo - sorted.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

RocCurve roc_auc(std::span<const double> pos, std::span<const double> neg) {
  RocCurve curve;
  curve.auc = mann_whitney_auc(pos, neg);
  std::vector<std::pair<double, bool>> scored;
  scored.reserve(pos.size() + neg.size());
  for (double p : pos) scored.emplace_back(p, true);
  for (double x : neg) scored.emplace_back(x, false);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  const auto np = static_cast<double>(pos.size());
  const auto nn = static_cast<double>(neg.size());
  std::size_t tp = 0, fp = 0;
  curve.points.push_back({0.0, 0.0});
  for (std::size_t i = 0; i < scored.size();) {
    const double threshold = scored[i].first;
    for (; i < scored.size() && scored[i].first == threshold; ++i) (scored[i].second ? tp : fp) += 1;
    curve.points.push_back({static_cast<double>(fp) / nn, static_cast<double>(tp) / np});
  }
  return curve;
}

double trapezoid_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  return area;
}

EvalResult evaluate(const EmbeddingTable& z, const EvalSplit& split) {
  auto scores = [&](const std::vector<Edge>& pairs) {
    std::vector<double> s;
    s.reserve(pairs.size());
    for (const auto& e : pairs) {
      if (!z.contains(e.u) || !z.contains(e.v)) {
        throw std::invalid_argument("missing embedding for replica " + std::to_string(z.contains(e.u) ? e.v : e.u));
      }
      s.push_back(score_link(z, e.u, e.v));
    }
    return s;
  };
  EvalResult r;
  auto curve = [&](const std::vector<Edge>& p, const std::vector<Edge>& n) -> std::optional<RocCurve> {
    if (p.empty() || n.empty()) return std::nullopt;
    auto ps = scores(p);
    auto ns = scores(n);
    return roc_auc(ps, ns);
  };
  r.intra = curve(split.test_pos_intra, split.test_neg_intra);
  r.inter = curve(split.test_pos_inter, split.test_neg_inter);
  return r;
}

// ---------------------------------------------------------------------------
// δ(L)

std::vector<LayerId> layers_by_size(const MultiplexGraph& g) {
  std::vector<LayerId> order(g.num_layers());
  std::iota(order.begin(), order.end(), LayerId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](LayerId a, LayerId b) { return g.layer_size(a) > g.layer_size(b); });
  return order;
}

DeltaSeries delta(const MultiplexGraph& g, std::span<const LayerId> order) {
  if (order.size() < 2) throw std::invalid_argument("delta needs at least two layers");
  constexpr auto kUnused = static_cast<std::size_t>(-1);
  std::vector<std::size_t> rank(g.num_layers(), kUnused);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] >= g.num_layers()) throw std::invalid_argument("delta: unknown layer");
    if (rank[order[i]] != kUnused) throw std::invalid_argument("delta: repeated layer in order");
    rank[order[i]] = i;
  }
  // An inter edge enters the prefix once its later layer does.
  std::vector<std::size_t> entering(order.size(), 0);
  for (const auto& e : g.inter_edges()) {
    const auto a = rank[g.layer_of(e.u)], b = rank[g.layer_of(e.v)];
    if (a == kUnused || b == kUnused) continue;
    ++entering[std::max(a, b)];
  }
  DeltaSeries s;
  s.order.assign(order.begin(), order.end());
  for (auto l : order) s.layer_sizes.push_back(g.layer_size(l));
  std::size_t m = entering[0];
  double potential = 0.0;
  for (std::size_t i = 1; i < order.size(); ++i) {
    m += entering[i];
    potential += static_cast<double>(i) * static_cast<double>(s.layer_sizes[i]);
    DeltaPoint p;
    p.layers = i + 1;
    p.inter_edges = m;
    p.delta = potential > 0.0 ? 1.0 - static_cast<double>(m) / potential : 1.0;
    s.points.push_back(p);
  }
  return s;
}

RunStats aggregate_runs(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("aggregate_runs needs at least one run");
  RunStats s;
  s.count = values.size();
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace multisage
