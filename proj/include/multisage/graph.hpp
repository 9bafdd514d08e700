#pragma once

#include <Eigen/SparseCore>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace multisage {

using LayerId = std::uint32_t;
using ReplicaId = std::uint32_t;

/// A node replica: one (layer, local label) pair.
struct Replica {
  LayerId layer = 0;
  std::string label;

  friend bool operator==(const Replica&, const Replica&) = default;
};

/// Undirected edge between two replicas. Canonical form has u < v.
struct Edge {
  ReplicaId u = 0;
  ReplicaId v = 0;

  Edge() = default;
  Edge(ReplicaId a, ReplicaId b) : u(a), v(b) {}

  [[nodiscard]] Edge canonical() const { return u < v ? Edge{u, v} : Edge{v, u}; }
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class LinkType { intra, inter };

/// Handling of inter-layer constraint violations at build time.
///  strict: violations are errors.
///  close:  inter-layer components are transitively closed into cliques.
///  warn:   violations are recorded in warnings() and kept.
enum class ValidationMode { strict, close, warn };

/// Compressed sparse row adjacency; rows are sorted ascending.
class Csr {
 public:
  Csr() : offsets_(1, 0) {}
  Csr(std::size_t num_rows, std::span<const Edge> undirected_edges);

  [[nodiscard]] std::span<const ReplicaId> row(ReplicaId n) const {
    return {targets_.data() + offsets_[n], targets_.data() + offsets_[n + 1]};
  }
  [[nodiscard]] std::size_t degree(ReplicaId n) const { return offsets_[n + 1] - offsets_[n]; }
  [[nodiscard]] std::size_t num_rows() const { return offsets_.size() - 1; }
  [[nodiscard]] std::size_t num_entries() const { return targets_.size(); }
  [[nodiscard]] bool contains(ReplicaId n, ReplicaId m) const;

  /// Row-wise sorted union of two adjacency structures with equal row count.
  static Csr merge(const Csr& a, const Csr& b);
  static Csr empty(std::size_t num_rows);

 private:
  std::vector<std::size_t> offsets_;
  std::vector<ReplicaId> targets_;
};

/// Immutable multiplex network. Replicas are indexed globally in contiguous
/// per-layer blocks ordered by layer id; intra- and inter-layer edges are kept
/// in separate adjacency structures (the diagonal and off-diagonal blocks of
/// the supra-adjacency matrix).
class MultiplexGraph {
 public:
  MultiplexGraph() = default;

  /// Builds a graph. Edge endpoints index into `replicas` as given; the
  /// resulting graph stable-sorts replicas by layer, so global indices may
  /// differ from input positions (use find() to map back).
  static MultiplexGraph build(std::vector<std::string> layer_names, std::vector<Replica> replicas,
                              std::span<const Edge> intra_edges, std::span<const Edge> inter_edges,
                              ValidationMode mode = ValidationMode::strict);

  [[nodiscard]] std::size_t num_replicas() const { return replicas_.size(); }
  [[nodiscard]] std::size_t num_layers() const { return layer_names_.size(); }
  [[nodiscard]] std::size_t layer_size(LayerId l) const { return layer_offsets_[l + 1] - layer_offsets_[l]; }
  [[nodiscard]] ReplicaId layer_begin(LayerId l) const { return static_cast<ReplicaId>(layer_offsets_[l]); }
  [[nodiscard]] ReplicaId layer_end(LayerId l) const { return static_cast<ReplicaId>(layer_offsets_[l + 1]); }
  [[nodiscard]] const std::string& layer_name(LayerId l) const { return layer_names_[l]; }
  [[nodiscard]] const std::vector<std::string>& layer_names() const { return layer_names_; }

  [[nodiscard]] const Replica& replica(ReplicaId n) const { return replicas_[n]; }
  [[nodiscard]] const std::vector<Replica>& replicas() const { return replicas_; }
  [[nodiscard]] LayerId layer_of(ReplicaId n) const { return replicas_[n].layer; }
  [[nodiscard]] std::optional<ReplicaId> find(LayerId layer, std::string_view label) const;

  /// N_H(n): same-layer neighbors, sorted.
  [[nodiscard]] std::span<const ReplicaId> intra_neighbors(ReplicaId n) const { return intra_.row(n); }
  /// N_V(n): cross-layer neighbors, sorted.
  [[nodiscard]] std::span<const ReplicaId> inter_neighbors(ReplicaId n) const { return inter_.row(n); }

  [[nodiscard]] const Csr& intra() const { return intra_; }
  [[nodiscard]] const Csr& inter() const { return inter_; }

  [[nodiscard]] std::size_t num_intra_edges() const { return intra_.num_entries() / 2; }
  [[nodiscard]] std::size_t num_inter_edges() const { return inter_.num_entries() / 2; }

  /// Canonical (u < v) edge lists in ascending order.
  [[nodiscard]] std::vector<Edge> intra_edges() const;
  [[nodiscard]] std::vector<Edge> inter_edges() const;

  [[nodiscard]] bool has_edge(ReplicaId u, ReplicaId v) const {
    return intra_.contains(u, v) || inter_.contains(u, v);
  }
  [[nodiscard]] LinkType pair_type(ReplicaId u, ReplicaId v) const {
    return layer_of(u) == layer_of(v) ? LinkType::intra : LinkType::inter;
  }

  /// Constraint violations kept under ValidationMode::warn.
  [[nodiscard]] const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  friend struct GraphAssembler;

  std::vector<std::string> layer_names_;
  std::vector<std::size_t> layer_offsets_{0};
  std::vector<Replica> replicas_;
  Csr intra_;
  Csr inter_;
  std::vector<ReplicaId> label_index_;  // sorted by (layer, label)
  std::vector<std::string> warnings_;
};

/// The flattened multiplex: one edge set E_intra ∪ E_inter with no type
/// distinction. Holds a reference; the graph must outlive the view.
class FlattenedView {
 public:
  explicit FlattenedView(const MultiplexGraph& g);

  [[nodiscard]] std::size_t num_nodes() const { return adjacency_.num_rows(); }
  [[nodiscard]] std::size_t num_edges() const { return adjacency_.num_entries() / 2; }
  [[nodiscard]] std::span<const ReplicaId> neighbors(ReplicaId n) const { return adjacency_.row(n); }
  [[nodiscard]] const Csr& adjacency() const { return adjacency_; }
  [[nodiscard]] std::vector<Edge> edges() const;
  [[nodiscard]] const MultiplexGraph& source() const { return *graph_; }

  /// Single-layer copy of the flattened network with edge types erased.
  /// Replica indices are unchanged; labels become "<layer>:<label>".
  [[nodiscard]] MultiplexGraph to_single_layer() const;

 private:
  const MultiplexGraph* graph_;
  Csr adjacency_;
};

/// Supra-adjacency matrix: direct sum of layer adjacencies plus the coupling
/// matrix C. Symmetric, 0/1, zero diagonal.
Eigen::SparseMatrix<int> supra_adjacency(const MultiplexGraph& g);

/// Largest connected component under E_intra ∪ E_inter. Equal sizes are broken
/// by the smallest contained global index. Layers left without replicas are
/// dropped; indices are recompacted preserving layer-block order.
MultiplexGraph largest_connected_component(const MultiplexGraph& g);

/// Keeps replicas on the given layers plus every edge among them. Original
/// layer order is kept regardless of the order of `layers`.
MultiplexGraph layer_subnetwork(const MultiplexGraph& g, std::span<const LayerId> layers);

/// Same replicas, with the given edges (any orientation) removed.
MultiplexGraph remove_edges(const MultiplexGraph& g, std::span<const Edge> edges);

/// Connected components of the union graph; component[n] numbers components by
/// their smallest member, in ascending order.
std::vector<std::size_t> connected_components(const MultiplexGraph& g);

}  // namespace multisage
