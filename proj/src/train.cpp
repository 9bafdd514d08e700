#include "multisage/train.hpp"

#include "multisage/errors.hpp"
#include "multisage/log.hpp"
#include "multisage/rng.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace multisage {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be non-negative");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (optimizer == Optimizer::adam) {
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  }
  if (neighbor_sample_sizes) {
    for (auto s : *neighbor_sample_sizes)
      if (s == 0) throw ConfigError("neighbor sample sizes must be positive");
  }
}

OptimizerState::OptimizerState(const ModelParams& params, const TrainConfig& config)
    : config_(config), first_(zero_gradients(params)), second_(zero_gradients(params)) {}

void OptimizerState::step(ModelParams& params, const ModelGradients& grads) {
  ++t_;
  const double lr = config_.learning_rate;
  if (config_.optimizer == Optimizer::sgd) {
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
      params.layers[k].horizontal -= lr * grads[k].horizontal;
      params.layers[k].vertical -= lr * grads[k].vertical;
      params.layers[k].self -= lr * grads[k].self;
    }
    return;
  }
  const double b1 = config_.beta1, b2 = config_.beta2, eps = config_.epsilon;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto update = [&](Eigen::MatrixXd& p, const Eigen::MatrixXd& g, Eigen::MatrixXd& m, Eigen::MatrixXd& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    update(params.layers[k].horizontal, grads[k].horizontal, first_[k].horizontal, second_[k].horizontal);
    if (params.layers[k].vertical.size() != 0) {
      update(params.layers[k].vertical, grads[k].vertical, first_[k].vertical, second_[k].vertical);
    }
    update(params.layers[k].self, grads[k].self, first_[k].self, second_[k].self);
  }
}

TrainResult train(const MultiplexGraph& g, std::span<const Edge> training_edges, ModelParams init,
                  const TrainConfig& config, const NegativeSamplerConfig& sampler_config, const Features& features,
                  const EpochCallback& on_epoch) {
  config.validate();
  init.validate();
  if (training_edges.empty()) throw std::invalid_argument("train: no training edges");
  for (const auto& e : training_edges) {
    if (e.u >= g.num_replicas() || e.v >= g.num_replicas() || !g.has_edge(e.u, e.v)) {
      throw std::invalid_argument("train: training edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                                  ") is not an edge of the training graph");
    }
  }
  if (config.neighbor_sample_sizes && config.neighbor_sample_sizes->size() != init.depth()) {
    throw ConfigError("need one neighbor sample size per aggregation depth");
  }

  const auto nb = Neighborhoods::multiplex(g);
  NegativeSampler sampler(nb.combined(), sampler_config);
  OptimizerState optimizer(init, config);
  TrainResult result{std::move(init), {}, {}};
  ModelParams& params = result.params;

  const std::size_t q = sampler_config.q;
  const std::size_t batch = config.batch_size == 0 ? training_edges.size() : config.batch_size;
  const bool reuse_full_plan = !config.neighbor_sample_sizes && batch >= training_edges.size();
  std::optional<ComputationPlan> cached_plan;
  if (reuse_full_plan) cached_plan = full_plan(nb, params.mode, params.depth());

  std::vector<Edge> edges(training_edges.begin(), training_edges.end());
  std::vector<ReplicaId> negatives;
  std::vector<ReplicaId> targets;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, {epoch}));
    shuffle(edges.begin(), edges.end(), rng);
    for (auto& e : edges)
      if (bernoulli(rng, 0.5)) std::swap(e.u, e.v);

    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < edges.size(); begin += batch) {
      const std::size_t end = std::min(edges.size(), begin + batch);
      std::span<const Edge> positives(edges.data() + begin, end - begin);
      negatives.clear();
      for (const auto& e : positives) sampler.sample(e.u, rng, negatives);

      ComputationPlan plan;
      if (reuse_full_plan) {
        plan = *cached_plan;
      } else {
        targets.clear();
        for (const auto& e : positives) {
          targets.push_back(e.u);
          targets.push_back(e.v);
        }
        targets.insert(targets.end(), negatives.begin(), negatives.end());
        plan = make_plan(nb, params.mode, targets, params.depth(), config.neighbor_sample_sizes, &rng);
      }
      auto cache = forward(nb, params, features, std::move(plan), config.l2_normalize_output);
      auto lg = loss_gradient(params, features, cache, positives, negatives, q,
                              1.0 / static_cast<double>(positives.size()));
      if (!std::isfinite(lg.loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch starting at edge " +
                           std::to_string(begin));
      }
      if (log::enabled(log::Level::debug)) {
        std::ostringstream msg;
        msg << "epoch " << epoch << " batch " << begin / batch << " loss "
            << lg.loss / static_cast<double>(positives.size());
        log::debug(msg.str());
      }
      epoch_loss += lg.loss;
      optimizer.step(params, lg.gradients);
    }
    const double mean = epoch_loss / static_cast<double>(edges.size());
    if (!std::isfinite(mean)) throw NumericError("non-finite mean loss at epoch " + std::to_string(epoch));
    for (const auto& w : params.layers) {
      if (!w.horizontal.allFinite() || !w.self.allFinite() || !w.vertical.allFinite()) {
        throw NumericError("weights diverged at epoch " + std::to_string(epoch));
      }
    }
    result.loss_history.push_back(mean);
    if (log::enabled(log::Level::info)) {
      std::ostringstream msg;
      msg << "epoch " << epoch + 1 << "/" << config.epochs << " loss " << mean;
      log::info(msg.str());
    }
    if (on_epoch) on_epoch(epoch, mean);
  }

  result.embeddings = embed(nb, params, features, config.l2_normalize_output);
  return result;
}

}  // namespace multisage
