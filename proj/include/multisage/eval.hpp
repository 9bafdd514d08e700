#pragma once

#include "multisage/engine.hpp"
#include "multisage/graph.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace multisage {

struct SplitConfig {
  double marked_fraction = 0.2;
  /// Share of intra-layer links of marked nodes moved to the test set.
  double intra_test_fraction = 0.2;
  /// Share of the intra-layer non-edges among marked nodes used as test negatives.
  double intra_negative_fraction = 0.2;
  /// Share of the inter-layer non-edges among marked nodes used as test negatives.
  double inter_negative_fraction = 1.0;
  /// Each negative pool is capped at this multiple of the matching positive
  /// count (0 disables the cap).
  double negative_cap_ratio = 10.0;
  /// Test positives need both endpoints marked instead of at least one.
  bool both_endpoints_marked = false;

  void validate() const;
};

/// Marked-node train/test split. All pair lists are canonical (u < v) and
/// sorted.
struct EvalSplit {
  std::vector<ReplicaId> marked;
  std::vector<Edge> train_pos_intra;
  std::vector<Edge> train_pos_inter;
  std::vector<Edge> test_pos_intra;
  std::vector<Edge> test_pos_inter;
  std::vector<Edge> train_neg;
  std::vector<Edge> test_neg_intra;
  std::vector<Edge> test_neg_inter;
  std::uint64_t seed = 0;

  [[nodiscard]] std::vector<Edge> train_positives() const;
  [[nodiscard]] std::vector<Edge> test_positives() const;
};

/// Samples marked nodes and builds test/train positives and negatives:
///  - test positives: a share of the intra-layer links incident to marked
///    nodes plus all their inter-layer links;
///  - test negatives: sampled non-edges among marked nodes, intra and inter
///    pools separately, each capped relative to its positive count;
///  - train positives: every remaining link;
///  - train negatives: remaining non-edges, as many as train positives
///    (capped likewise).
/// Throws DataError when the graph is too small for the requested fractions.
EvalSplit make_split(const MultiplexGraph& g, const SplitConfig& config, std::uint64_t seed);

/// The graph seen during training: `g` without the test positives.
MultiplexGraph training_graph(const MultiplexGraph& g, const EvalSplit& split);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
  double auc = 0.5;
};

/// Mann–Whitney AUC (ties count 1/2); exact rational arithmetic on counts.
double mann_whitney_auc(std::span<const double> pos, std::span<const double> neg);

/// Threshold sweep over distinct scores plus the Mann–Whitney AUC.
/// Throws std::invalid_argument if either list is empty.
RocCurve roc_auc(std::span<const double> pos, std::span<const double> neg);

/// Trapezoidal area under a ROC curve.
double trapezoid_area(std::span<const RocPoint> points);

struct EvalResult {
  std::optional<RocCurve> intra;
  std::optional<RocCurve> inter;

  [[nodiscard]] std::optional<double> auc_intra() const {
    return intra ? std::optional<double>(intra->auc) : std::nullopt;
  }
  [[nodiscard]] std::optional<double> auc_inter() const {
    return inter ? std::optional<double>(inter->auc) : std::nullopt;
  }
};

/// Scores every test pair with score_link and computes separate intra- and
/// inter-layer ROC curves. A curve is absent when either of its lists is empty.
EvalResult evaluate(const EmbeddingTable& z, const EvalSplit& split);

struct DeltaPoint {
  std::size_t layers = 0;       // L
  std::size_t inter_edges = 0;  // m_L
  double delta = 0.0;
};

struct DeltaSeries {
  std::vector<LayerId> order;
  std::vector<std::size_t> layer_sizes;  // N_l in `order`
  std::vector<DeltaPoint> points;        // L = 2..|order|
};

/// Layers sorted by replica count, descending; ties by lower index.
std::vector<LayerId> layers_by_size(const MultiplexGraph& g);

/// δ(L) = 1 - m_L / Σ_{l=2}^{L} (l-1) N_l over every prefix of `order`.
/// Throws std::invalid_argument if fewer than two layers are given.
DeltaSeries delta(const MultiplexGraph& g, std::span<const LayerId> order);

struct RunStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n-1); 0 for a single run
  std::size_t count = 0;

  friend bool operator==(const RunStats&, const RunStats&) = default;
};

RunStats aggregate_runs(std::span<const double> values);

// Split files: replayable textual records, see docs/formats.md.
/// `provenance`, when given, is written as a single '#' comment line.
void write_split(std::ostream& out, const EvalSplit& split, std::string_view provenance = {});
EvalSplit read_split(std::istream& in, const MultiplexGraph& g);
void save_split(const std::filesystem::path& path, const EvalSplit& split, std::string_view provenance = {});
EvalSplit load_split(const std::filesystem::path& path, const MultiplexGraph& g);

}  // namespace multisage
