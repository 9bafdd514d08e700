#include "multisage/graph.hpp"

#include "multisage/errors.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace multisage {

// ---------------------------------------------------------------------------
// Csr

Csr::Csr(std::size_t num_rows, std::span<const Edge> undirected_edges) : offsets_(num_rows + 1, 0) {
  for (const auto& e : undirected_edges) {
    ++offsets_[e.u + 1];
    ++offsets_[e.v + 1];
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  targets_.resize(offsets_.back());
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const auto& e : undirected_edges) {
    targets_[cursor[e.u]++] = e.v;
    targets_[cursor[e.v]++] = e.u;
  }
  for (std::size_t n = 0; n < num_rows; ++n) {
    std::sort(targets_.begin() + static_cast<std::ptrdiff_t>(offsets_[n]),
              targets_.begin() + static_cast<std::ptrdiff_t>(offsets_[n + 1]));
  }
}

bool Csr::contains(ReplicaId n, ReplicaId m) const {
  auto r = row(n);
  return std::binary_search(r.begin(), r.end(), m);
}

Csr Csr::merge(const Csr& a, const Csr& b) {
  if (a.num_rows() != b.num_rows()) throw std::invalid_argument("Csr::merge: row count mismatch");
  Csr out;
  out.offsets_.assign(a.num_rows() + 1, 0);
  out.targets_.reserve(a.num_entries() + b.num_entries());
  for (std::size_t n = 0; n < a.num_rows(); ++n) {
    auto ra = a.row(static_cast<ReplicaId>(n));
    auto rb = b.row(static_cast<ReplicaId>(n));
    std::set_union(ra.begin(), ra.end(), rb.begin(), rb.end(), std::back_inserter(out.targets_));
    out.offsets_[n + 1] = out.targets_.size();
  }
  return out;
}

Csr Csr::empty(std::size_t num_rows) {
  Csr out;
  out.offsets_.assign(num_rows + 1, 0);
  return out;
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

std::string describe(const std::vector<Replica>& replicas, const std::vector<std::string>& layers,
                     ReplicaId n) {
  const auto& r = replicas[n];
  return r.label + "@" + layers[r.layer];
}

}  // namespace

// Trusted constructor for already-validated parts.
struct GraphAssembler {
  static MultiplexGraph assemble(std::vector<std::string> layer_names, std::vector<Replica> replicas,
                                 std::span<const Edge> intra, std::span<const Edge> inter,
                                 std::vector<std::string> warnings = {}) {
    MultiplexGraph g;
    g.layer_names_ = std::move(layer_names);
    g.layer_offsets_.assign(g.layer_names_.size() + 1, 0);
    for (const auto& r : replicas) ++g.layer_offsets_[r.layer + 1];
    std::partial_sum(g.layer_offsets_.begin(), g.layer_offsets_.end(), g.layer_offsets_.begin());
    g.replicas_ = std::move(replicas);
    g.intra_ = Csr(g.replicas_.size(), intra);
    g.inter_ = Csr(g.replicas_.size(), inter);
    g.label_index_.resize(g.replicas_.size());
    std::iota(g.label_index_.begin(), g.label_index_.end(), ReplicaId{0});
    std::sort(g.label_index_.begin(), g.label_index_.end(), [&](ReplicaId a, ReplicaId b) {
      const auto& ra = g.replicas_[a];
      const auto& rb = g.replicas_[b];
      if (ra.layer != rb.layer) return ra.layer < rb.layer;
      return ra.label < rb.label;
    });
    g.warnings_ = std::move(warnings);
    return g;
  }

  // Keeps replicas with keep[n] set, all edges among them, and the layers
  // with keep_layer[l] set.
  static MultiplexGraph induced(const MultiplexGraph& g, const std::vector<char>& keep,
                                const std::vector<char>& keep_layer) {
    std::vector<LayerId> layer_map(g.num_layers(), 0);
    std::vector<std::string> names;
    for (LayerId l = 0; l < g.num_layers(); ++l) {
      if (!keep_layer[l]) continue;
      layer_map[l] = static_cast<LayerId>(names.size());
      names.push_back(g.layer_name(l));
    }

    constexpr auto kDropped = static_cast<ReplicaId>(-1);
    std::vector<ReplicaId> index_map(g.num_replicas(), kDropped);
    std::vector<Replica> replicas;
    for (ReplicaId n = 0; n < g.num_replicas(); ++n) {
      if (!keep[n]) continue;
      index_map[n] = static_cast<ReplicaId>(replicas.size());
      replicas.push_back({layer_map[g.layer_of(n)], g.replica(n).label});
    }
    auto remap = [&](const std::vector<Edge>& edges) {
      std::vector<Edge> out;
      for (const auto& e : edges)
        if (index_map[e.u] != kDropped && index_map[e.v] != kDropped) out.emplace_back(index_map[e.u], index_map[e.v]);
      return out;
    };
    auto intra = remap(g.intra_edges());
    auto inter = remap(g.inter_edges());
    return assemble(std::move(names), std::move(replicas), intra, inter);
  }
};

MultiplexGraph MultiplexGraph::build(std::vector<std::string> layer_names, std::vector<Replica> replicas,
                                     std::span<const Edge> intra_edges, std::span<const Edge> inter_edges,
                                     ValidationMode mode) {
  const std::size_t n_in = replicas.size();
  for (const auto& r : replicas) {
    if (r.layer >= layer_names.size()) {
      throw DataError("replica '" + r.label + "' references undeclared layer " + std::to_string(r.layer));
    }
  }

  // Stable sort by layer so that every layer occupies a contiguous index block.
  std::vector<ReplicaId> order(n_in);
  std::iota(order.begin(), order.end(), ReplicaId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](ReplicaId a, ReplicaId b) { return replicas[a].layer < replicas[b].layer; });
  std::vector<ReplicaId> position(n_in);
  std::vector<Replica> sorted;
  sorted.reserve(n_in);
  for (ReplicaId i = 0; i < n_in; ++i) {
    position[order[i]] = i;
    sorted.push_back(std::move(replicas[order[i]]));
  }

  {
    std::vector<Replica> keys = sorted;
    std::sort(keys.begin(), keys.end(), [](const Replica& a, const Replica& b) {
      return a.layer != b.layer ? a.layer < b.layer : a.label < b.label;
    });
    auto dup = std::adjacent_find(keys.begin(), keys.end());
    if (dup != keys.end()) throw DataError("duplicate replica " + dup->label + "@" + layer_names[dup->layer]);
  }

  auto prepare = [&](std::span<const Edge> edges, LinkType type) {
    std::vector<Edge> out;
    out.reserve(edges.size());
    for (const auto& e : edges) {
      if (e.u >= n_in || e.v >= n_in) {
        throw DataError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                        ") references an undeclared replica");
      }
      if (e.u == e.v) throw DataError("self-loop on replica " + describe(sorted, layer_names, position[e.u]));
      Edge m = Edge{position[e.u], position[e.v]}.canonical();
      const bool same_layer = sorted[m.u].layer == sorted[m.v].layer;
      if (type == LinkType::intra && !same_layer) {
        throw DataError("intra-layer edge joins different layers: " + describe(sorted, layer_names, m.u) + " - " +
                        describe(sorted, layer_names, m.v));
      }
      if (type == LinkType::inter && same_layer) {
        throw DataError("inter-layer edge within one layer: " + describe(sorted, layer_names, m.u) + " - " +
                        describe(sorted, layer_names, m.v));
      }
      out.push_back(m);
    }
    std::sort(out.begin(), out.end());
    auto dup = std::adjacent_find(out.begin(), out.end());
    if (dup != out.end()) {
      throw DataError("duplicate edge " + describe(sorted, layer_names, dup->u) + " - " +
                      describe(sorted, layer_names, dup->v));
    }
    return out;
  };
  auto intra = prepare(intra_edges, LinkType::intra);
  auto inter = prepare(inter_edges, LinkType::inter);

  std::vector<std::string> violations;
  auto check_inter = [&](const std::vector<Edge>& edges, std::vector<std::string>& out) {
    // At most one inter-neighbor per other layer.
    Csr adj(sorted.size(), edges);
    for (ReplicaId n = 0; n < sorted.size(); ++n) {
      auto row = adj.row(n);
      std::vector<LayerId> layers;
      for (auto m : row) layers.push_back(sorted[m].layer);
      std::sort(layers.begin(), layers.end());
      auto dup = std::adjacent_find(layers.begin(), layers.end());
      if (dup != layers.end()) {
        out.push_back("replica " + describe(sorted, layer_names, n) + " has several inter-layer neighbors on layer " +
                      layer_names[*dup]);
      }
    }
    // Components of the coupling graph must be cliques.
    UnionFind uf(sorted.size());
    for (const auto& e : edges) uf.unite(e.u, e.v);
    std::vector<std::size_t> size(sorted.size(), 0), count(sorted.size(), 0);
    for (ReplicaId n = 0; n < sorted.size(); ++n) ++size[uf.find(n)];
    for (const auto& e : edges) ++count[uf.find(e.u)];
    for (ReplicaId n = 0; n < sorted.size(); ++n) {
      if (uf.find(n) != n) continue;
      const std::size_t s = size[n];
      if (count[n] != s * (s - 1) / 2) {
        out.push_back("inter-layer component containing " + describe(sorted, layer_names, n) + " has " +
                      std::to_string(count[n]) + " edges over " + std::to_string(s) + " replicas (not a clique)");
      }
    }
    return uf;
  };

  auto uf = check_inter(inter, violations);
  if (!violations.empty()) {
    if (mode == ValidationMode::strict) throw DataError("inter-layer constraint violated: " + violations.front());
    if (mode == ValidationMode::close) {
      std::vector<std::vector<ReplicaId>> members(sorted.size());
      for (ReplicaId n = 0; n < sorted.size(); ++n) members[uf.find(n)].push_back(n);
      std::vector<Edge> closed;
      for (const auto& comp : members) {
        for (std::size_t i = 0; i < comp.size(); ++i)
          for (std::size_t j = i + 1; j < comp.size(); ++j) closed.emplace_back(comp[i], comp[j]);
      }
      std::sort(closed.begin(), closed.end());
      inter = std::move(closed);
      violations.clear();
      check_inter(inter, violations);
      if (!violations.empty()) {
        throw DataError("inter-layer constraint violated after closure: " + violations.front());
      }
    }
  }

  return GraphAssembler::assemble(std::move(layer_names), std::move(sorted), intra, inter,
                                  mode == ValidationMode::warn ? std::move(violations) : std::vector<std::string>{});
}

std::optional<ReplicaId> MultiplexGraph::find(LayerId layer, std::string_view label) const {
  auto it = std::lower_bound(label_index_.begin(), label_index_.end(), std::pair{layer, label},
                             [&](ReplicaId a, const std::pair<LayerId, std::string_view>& key) {
                               const auto& r = replicas_[a];
                               if (r.layer != key.first) return r.layer < key.first;
                               return std::string_view(r.label) < key.second;
                             });
  if (it == label_index_.end()) return std::nullopt;
  const auto& r = replicas_[*it];
  if (r.layer != layer || r.label != label) return std::nullopt;
  return *it;
}

namespace {
std::vector<Edge> edges_of(const Csr& adj) {
  std::vector<Edge> out;
  out.reserve(adj.num_entries() / 2);
  for (ReplicaId n = 0; n < adj.num_rows(); ++n)
    for (auto m : adj.row(n))
      if (n < m) out.emplace_back(n, m);
  return out;
}
}  // namespace

std::vector<Edge> MultiplexGraph::intra_edges() const { return edges_of(intra_); }
std::vector<Edge> MultiplexGraph::inter_edges() const { return edges_of(inter_); }

// ---------------------------------------------------------------------------
// FlattenedView

FlattenedView::FlattenedView(const MultiplexGraph& g) : graph_(&g), adjacency_(Csr::merge(g.intra(), g.inter())) {}

std::vector<Edge> FlattenedView::edges() const { return edges_of(adjacency_); }

MultiplexGraph FlattenedView::to_single_layer() const {
  std::vector<Replica> replicas;
  replicas.reserve(num_nodes());
  for (const auto& r : graph_->replicas()) replicas.push_back({0, graph_->layer_name(r.layer) + ":" + r.label});
  auto e = edges();
  return GraphAssembler::assemble({"flattened"}, std::move(replicas), e, {});
}

// ---------------------------------------------------------------------------
// Operations

Eigen::SparseMatrix<int> supra_adjacency(const MultiplexGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.num_replicas());
  std::vector<Eigen::Triplet<int>> triplets;
  triplets.reserve(g.intra().num_entries() + g.inter().num_entries());
  for (ReplicaId i = 0; i < g.num_replicas(); ++i) {
    for (auto j : g.intra_neighbors(i)) triplets.emplace_back(i, j, 1);
    for (auto j : g.inter_neighbors(i)) triplets.emplace_back(i, j, 1);
  }
  Eigen::SparseMatrix<int> a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

std::vector<std::size_t> connected_components(const MultiplexGraph& g) {
  constexpr auto kUnset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> comp(g.num_replicas(), kUnset);
  std::size_t next = 0;
  std::vector<ReplicaId> stack;
  for (ReplicaId s = 0; s < g.num_replicas(); ++s) {
    if (comp[s] != kUnset) continue;
    comp[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      auto n = stack.back();
      stack.pop_back();
      for (const Csr* adj : {&g.intra(), &g.inter()}) {
        for (auto m : adj->row(n)) {
          if (comp[m] == kUnset) {
            comp[m] = next;
            stack.push_back(m);
          }
        }
      }
    }
    ++next;
  }
  return comp;
}

MultiplexGraph largest_connected_component(const MultiplexGraph& g) {
  if (g.num_replicas() == 0) return g;
  auto comp = connected_components(g);
  std::vector<std::size_t> sizes(*std::max_element(comp.begin(), comp.end()) + 1, 0);
  for (auto c : comp) ++sizes[c];
  // Components are numbered by their smallest member, so max_element's first
  // hit implements the tie-break.
  const auto best = static_cast<std::size_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  std::vector<char> keep(g.num_replicas());
  std::vector<char> keep_layer(g.num_layers(), 0);
  for (ReplicaId n = 0; n < keep.size(); ++n) {
    keep[n] = comp[n] == best;
    if (keep[n]) keep_layer[g.layer_of(n)] = 1;
  }
  return GraphAssembler::induced(g, keep, keep_layer);
}

MultiplexGraph layer_subnetwork(const MultiplexGraph& g, std::span<const LayerId> layers) {
  if (layers.empty()) throw std::invalid_argument("layer_subnetwork: empty layer subset");
  std::vector<char> selected(g.num_layers(), 0);
  for (auto l : layers) {
    if (l >= g.num_layers()) throw std::invalid_argument("layer_subnetwork: unknown layer " + std::to_string(l));
    selected[l] = 1;
  }
  std::vector<char> keep(g.num_replicas());
  for (ReplicaId n = 0; n < g.num_replicas(); ++n) keep[n] = selected[g.layer_of(n)];
  return GraphAssembler::induced(g, keep, selected);
}

MultiplexGraph remove_edges(const MultiplexGraph& g, std::span<const Edge> edges) {
  std::vector<Edge> drop;
  drop.reserve(edges.size());
  for (const auto& e : edges) drop.push_back(e.canonical());
  std::sort(drop.begin(), drop.end());
  auto filter = [&](std::vector<Edge> in) {
    std::erase_if(in, [&](const Edge& e) { return std::binary_search(drop.begin(), drop.end(), e); });
    return in;
  };
  auto intra = filter(g.intra_edges());
  auto inter = filter(g.inter_edges());
  return GraphAssembler::assemble(g.layer_names(), g.replicas(), intra, inter);
}

}  // namespace multisage
