#pragma once

#include "multisage/engine.hpp"
#include "multisage/graph.hpp"
#include "multisage/model.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace multisage {

enum class Optimizer { sgd, adam };

struct TrainConfig {
  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t epochs = 100;
  /// Positive edges per optimizer step; 0 means the whole edge set.
  std::size_t batch_size = 0;
  /// S_1..S_K; absent means full neighborhoods.
  std::optional<std::vector<std::size_t>> neighbor_sample_sizes;
  bool l2_normalize_output = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainResult {
  ModelParams params;
  /// Full-neighborhood embeddings of every replica under the final weights.
  EmbeddingTable embeddings;
  /// Mean loss per positive edge, one entry per epoch.
  std::vector<double> loss_history;
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Trains the aggregator weights on `training_edges` (which must be edges of
/// `g`) with the negative-sampling objective. Each step resamples negatives,
/// runs the forward pass on the batch, backpropagates and updates the
/// weights. The step minimises the loss averaged over the batch. Fully
/// deterministic for a fixed config.
///
/// Throws NumericError if the loss becomes non-finite.
TrainResult train(const MultiplexGraph& g, std::span<const Edge> training_edges, ModelParams init,
                  const TrainConfig& config, const NegativeSamplerConfig& sampler, const Features& features,
                  const EpochCallback& on_epoch = {});

/// Adam / SGD state for one parameter set.
class OptimizerState {
 public:
  OptimizerState(const ModelParams& params, const TrainConfig& config);
  void step(ModelParams& params, const ModelGradients& grads);

 private:
  TrainConfig config_;
  ModelGradients first_;
  ModelGradients second_;
  std::size_t t_ = 0;
};

}  // namespace multisage
