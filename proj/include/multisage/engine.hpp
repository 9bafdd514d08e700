#pragma once

#include "multisage/graph.hpp"
#include "multisage/model.hpp"
#include "multisage/rng.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace multisage {

/// Neighborhood functions N_H and N_V consumed by the aggregator, plus their
/// union for graphsage mode.
class Neighborhoods {
 public:
  /// N_H = intra-layer neighbors, N_V = inter-layer neighbors.
  static Neighborhoods multiplex(const MultiplexGraph& g);
  /// N_H = all flattened neighbors, N_V = empty.
  static Neighborhoods flattened(const FlattenedView& view);

  [[nodiscard]] std::size_t num_nodes() const { return horizontal_.num_rows(); }
  [[nodiscard]] const Csr& horizontal() const { return horizontal_; }
  [[nodiscard]] const Csr& vertical() const { return vertical_; }
  [[nodiscard]] const Csr& combined() const { return combined_; }

 private:
  Csr horizontal_;
  Csr vertical_;
  Csr combined_;
};

/// Which nodes are evaluated at each depth and which neighbors feed them.
/// nodes[k] holds the replicas whose h^k is computed (sorted); nodes[K] are
/// the targets. hops[k-1] maps each node of nodes[k] to positions in
/// nodes[k-1].
struct ComputationPlan {
  struct Hop {
    std::vector<std::size_t> h_offsets{0};
    std::vector<std::uint32_t> h_index;
    std::vector<std::size_t> v_offsets{0};
    std::vector<std::uint32_t> v_index;
    std::vector<std::uint32_t> self_index;
  };
  Mode mode = Mode::multisage;
  std::vector<std::vector<ReplicaId>> nodes;
  std::vector<Hop> hops;

  [[nodiscard]] std::size_t depth() const { return hops.size(); }
  [[nodiscard]] const std::vector<ReplicaId>& targets() const { return nodes.back(); }
};

/// Builds a plan for the given targets. With `sample_sizes` (one entry per
/// depth k = 1..K), each neighborhood at depth k is subsampled without
/// replacement to at most sample_sizes[k-1] members; otherwise full
/// neighborhoods are used and `rng` is not touched.
ComputationPlan make_plan(const Neighborhoods& nb, Mode mode, std::span<const ReplicaId> targets, std::size_t depth,
                          const std::optional<std::vector<std::size_t>>& sample_sizes = std::nullopt,
                          Rng* rng = nullptr);

/// Plan over every node.
ComputationPlan full_plan(const Neighborhoods& nb, Mode mode, std::size_t depth,
                          const std::optional<std::vector<std::size_t>>& sample_sizes = std::nullopt,
                          Rng* rng = nullptr);

/// z_n for a set of replicas, stored column-wise.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<ReplicaId> nodes, Eigen::MatrixXd columns, std::size_t num_nodes);

  [[nodiscard]] bool contains(ReplicaId n) const { return n < position_.size() && position_[n] >= 0; }
  [[nodiscard]] auto vector(ReplicaId n) const { return columns_.col(position_.at(n)); }
  [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(columns_.rows()); }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] const std::vector<ReplicaId>& nodes() const { return nodes_; }
  [[nodiscard]] const Eigen::MatrixXd& columns() const { return columns_; }
  [[nodiscard]] std::size_t num_nodes() const { return position_.size(); }

 private:
  std::vector<ReplicaId> nodes_;
  Eigen::MatrixXd columns_;
  std::vector<std::int64_t> position_;
};

/// Activations retained by forward() for backpropagation.
struct ForwardCache {
  ComputationPlan plan;
  bool normalized = true;
  std::vector<Eigen::MatrixXd> hidden;   // h^k over plan.nodes[k]; hidden[0] empty for one-hot input
  std::vector<Eigen::MatrixXd> pre;      // pre-activation at depth k, stored at k-1
  std::vector<Eigen::MatrixXd> mean_h;   // neighborhood means at depth k (unused at depth 1 for one-hot)
  std::vector<Eigen::MatrixXd> mean_v;
  std::vector<Eigen::MatrixXd> self_in;  // h^{k-1}_n of each target
  Eigen::VectorXd norms;                 // ||h^K_n|| per target
  EmbeddingTable output;
};

/// Mean-aggregator forward pass:
///   h^k_n = θ(W_H^k mean_{N_H(n)} h^{k-1} + W_V^k mean_{N_V(n)} h^{k-1} + S^k h^{k-1}_n)
/// with θ = params.activation_at(k) and empty means taken as zero;
/// z_n = h^K_n, optionally L2-normalised.
ForwardCache forward(const Neighborhoods& nb, const ModelParams& params, const Features& features,
                     ComputationPlan plan, bool l2_normalize = true);

/// Embeddings of every replica with full neighborhoods.
EmbeddingTable embed(const Neighborhoods& nb, const ModelParams& params, const Features& features,
                     bool l2_normalize = true);

/// Numerically stable log σ(x).
double log_sigmoid(double x);
double sigmoid(double x);

/// Negative-sampling loss
///   J = -Σ_{(n,m)} [ log σ(z_n·z_m) + Σ_{q} log σ(-z_n·z_{m̄_q}) ]
/// where negatives[i*q .. i*q+q) belong to positives[i] and are drawn around
/// its first endpoint.
double negative_sampling_loss(const EmbeddingTable& z, std::span<const Edge> positives,
                              std::span<const ReplicaId> negatives, std::size_t q);

struct LossGradient {
  double loss = 0.0;
  ModelGradients gradients;
};

/// Exact gradient of negative_sampling_loss (times `scale`) with respect to
/// every weight matrix, using the neighbor samples recorded in `cache`.
/// Throws std::invalid_argument if the cache does not cover the batch or was
/// produced with other parameter shapes.
LossGradient loss_gradient(const ModelParams& params, const Features& features, const ForwardCache& cache,
                           std::span<const Edge> positives, std::span<const ReplicaId> negatives, std::size_t q,
                           double scale = 1.0);

/// Convenience: forward over the batch endpoints with full neighborhoods, then
/// loss_gradient.
LossGradient gradients(const Neighborhoods& nb, const ModelParams& params, const Features& features,
                       std::span<const Edge> positives, std::span<const ReplicaId> negatives, std::size_t q,
                       bool l2_normalize = true);

/// z_n · z_m.
double score_link(const EmbeddingTable& z, ReplicaId n, ReplicaId m);

// ---------------------------------------------------------------------------
// Negative sampling

enum class NegativeDistribution { uniform, degree_power };

struct NegativeSamplerConfig {
  std::size_t q = 5;
  NegativeDistribution distribution = NegativeDistribution::uniform;
  double exponent = 0.75;
  std::uint64_t seed = 0;
};

/// Draws i.i.d. negatives for n from V \ ({n} ∪ neighbors(n)), uniformly or
/// proportionally to degree^exponent. When that support is empty the draw
/// falls back to uniform over V \ {n} and a warning is logged once.
class NegativeSampler {
 public:
  NegativeSampler(const Csr& adjacency, NegativeSamplerConfig config);

  void sample(ReplicaId n, Rng& rng, std::vector<ReplicaId>& out);
  [[nodiscard]] std::vector<ReplicaId> sample(ReplicaId n, Rng& rng) {
    std::vector<ReplicaId> out;
    sample(n, rng, out);
    return out;
  }

  [[nodiscard]] const NegativeSamplerConfig& config() const { return config_; }
  [[nodiscard]] std::size_t fallback_count() const { return fallbacks_; }

 private:
  ReplicaId draw_weighted(Rng& rng) const;

  const Csr* adjacency_;
  NegativeSamplerConfig config_;
  std::vector<double> cumulative_;  // degree_power only
  std::size_t fallbacks_ = 0;
};

/// Q negatives for n, drawn with a stream derived from (config.seed, n).
std::vector<ReplicaId> sample_negatives(ReplicaId n, const Csr& adjacency, const NegativeSamplerConfig& config);

}  // namespace multisage
