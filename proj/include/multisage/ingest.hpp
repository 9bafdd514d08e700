#pragma once

#include "multisage/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace multisage {

enum class CouplingPolicy {
  /// Replicas sharing a local label across layers form an inter-layer clique.
  derive_shared_label,
  /// Inter-layer links come only from a coupling file.
  explicit_file,
};

/// Single-layer undirected graph on nodes 0..n-1. Edges are canonical and
/// sorted; `labels`, when non-empty, names each node.
struct SimpleGraph {
  std::size_t num_nodes = 0;
  std::vector<Edge> edges;
  std::vector<std::string> labels;

  [[nodiscard]] std::size_t num_edges() const { return edges.size(); }
};

/// Statistics gathered while reading an edge list.
struct LoadReport {
  std::size_t lines = 0;
  std::size_t self_loops_dropped = 0;
  std::size_t duplicates_dropped = 0;
  std::size_t replicas_before_lcc = 0;
};

/// Parses `layer u v [weight]` lines and, optionally, `layer_a u layer_b v`
/// coupling lines into a multiplex graph (before LCC extraction).
///
/// Layers are ordered numerically when every layer id is an integer and
/// lexicographically otherwise; replicas keep their order of first appearance
/// within a layer. Explicit couplings are transitively closed into cliques.
/// `couplings` must be null under derive_shared_label and non-null under
/// explicit_file.
MultiplexGraph parse_multiplex(std::istream& edges, std::istream* couplings, CouplingPolicy policy,
                               LoadReport* report = nullptr);

/// Reads a layered edge list, derives or reads couplings, and returns the
/// largest connected component.
MultiplexGraph load_multiplex(const std::filesystem::path& edge_file,
                              const std::optional<std::filesystem::path>& coupling_file,
                              CouplingPolicy policy, LoadReport* report = nullptr);

/// Union of `g` with an Erdős–Rényi sample G(n, rho) on the same node set.
SimpleGraph add_random_links(const SimpleGraph& g, double rho, std::uint64_t seed);

/// Watts–Strogatz graph: ring lattice with `k` neighbors per node (k/2 on each
/// side), each lattice edge's far endpoint rewired with probability `phi`.
/// Edge count is exactly n*k/2 for every phi.
SimpleGraph watts_strogatz(std::size_t n, std::size_t k, double phi, std::uint64_t seed);

/// Wraps a single-layer graph as a one-layer multiplex with no inter edges.
MultiplexGraph lift_to_single_layer_multiplex(const SimpleGraph& g, std::string layer_name = "0");

/// The layer with the most replicas (ties: lowest layer index) as a simple graph.
SimpleGraph largest_layer(const MultiplexGraph& g);

}  // namespace multisage
