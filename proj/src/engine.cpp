#include "multisage/engine.hpp"

#include "multisage/errors.hpp"
#include "multisage/log.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace multisage {

// ---------------------------------------------------------------------------
// Neighborhoods

Neighborhoods Neighborhoods::multiplex(const MultiplexGraph& g) {
  Neighborhoods nb;
  nb.horizontal_ = g.intra();
  nb.vertical_ = g.inter();
  nb.combined_ = Csr::merge(g.intra(), g.inter());
  return nb;
}

Neighborhoods Neighborhoods::flattened(const FlattenedView& view) {
  Neighborhoods nb;
  nb.horizontal_ = view.adjacency();
  nb.vertical_ = Csr::empty(view.num_nodes());
  nb.combined_ = view.adjacency();
  return nb;
}

// ---------------------------------------------------------------------------
// Plans

namespace {

constexpr auto kAbsent = static_cast<std::uint32_t>(-1);

void sample_row(std::span<const ReplicaId> row, std::optional<std::size_t> limit, Rng* rng,
                std::vector<ReplicaId>& out) {
  out.assign(row.begin(), row.end());
  if (!limit || out.size() <= *limit) return;
  // Partial Fisher-Yates, then restore ascending order so that summation order
  // does not depend on the draw order.
  for (std::size_t i = 0; i < *limit; ++i) {
    auto j = i + uniform_index(*rng, out.size() - i);
    std::swap(out[i], out[j]);
  }
  out.resize(*limit);
  std::sort(out.begin(), out.end());
}

}  // namespace

ComputationPlan make_plan(const Neighborhoods& nb, Mode mode, std::span<const ReplicaId> targets, std::size_t depth,
                          const std::optional<std::vector<std::size_t>>& sample_sizes, Rng* rng) {
  if (depth == 0) throw std::invalid_argument("make_plan: depth must be positive");
  if (sample_sizes && sample_sizes->size() != depth) {
    throw std::invalid_argument("make_plan: need one neighbor sample size per depth");
  }
  if (sample_sizes && rng == nullptr) throw std::invalid_argument("make_plan: sampling requires an rng");
  const std::size_t n_nodes = nb.num_nodes();
  const Csr& h_adj = mode == Mode::multisage ? nb.horizontal() : nb.combined();
  const bool use_v = mode == Mode::multisage;

  ComputationPlan plan;
  plan.mode = mode;
  plan.nodes.resize(depth + 1);
  plan.hops.resize(depth);
  plan.nodes[depth].assign(targets.begin(), targets.end());
  std::sort(plan.nodes[depth].begin(), plan.nodes[depth].end());
  plan.nodes[depth].erase(std::unique(plan.nodes[depth].begin(), plan.nodes[depth].end()), plan.nodes[depth].end());
  for (auto t : plan.nodes[depth])
    if (t >= n_nodes) throw std::invalid_argument("make_plan: target out of range");

  std::vector<std::uint32_t> position(n_nodes, kAbsent);
  std::vector<ReplicaId> sampled;
  for (std::size_t k = depth; k >= 1; --k) {
    const auto& tier = plan.nodes[k];
    std::optional<std::size_t> limit;
    if (sample_sizes) limit = (*sample_sizes)[k - 1];

    // Neighbor lists in global ids first; positions are resolved once the
    // source tier is known.
    std::vector<std::vector<ReplicaId>> h_lists(tier.size()), v_lists(tier.size());
    std::vector<ReplicaId> sources(tier.begin(), tier.end());
    for (std::size_t i = 0; i < tier.size(); ++i) {
      sample_row(h_adj.row(tier[i]), limit, rng, h_lists[i]);
      sources.insert(sources.end(), h_lists[i].begin(), h_lists[i].end());
      if (use_v) {
        sample_row(nb.vertical().row(tier[i]), limit, rng, v_lists[i]);
        sources.insert(sources.end(), v_lists[i].begin(), v_lists[i].end());
      }
    }
    std::sort(sources.begin(), sources.end());
    sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
    for (std::uint32_t j = 0; j < sources.size(); ++j) position[sources[j]] = j;

    auto& hop = plan.hops[k - 1];
    hop.self_index.reserve(tier.size());
    for (std::size_t i = 0; i < tier.size(); ++i) {
      for (auto m : h_lists[i]) hop.h_index.push_back(position[m]);
      hop.h_offsets.push_back(hop.h_index.size());
      for (auto m : v_lists[i]) hop.v_index.push_back(position[m]);
      hop.v_offsets.push_back(hop.v_index.size());
      hop.self_index.push_back(position[tier[i]]);
    }
    for (auto s : sources) position[s] = kAbsent;
    plan.nodes[k - 1] = std::move(sources);
    if (k == 1) break;
  }
  return plan;
}

ComputationPlan full_plan(const Neighborhoods& nb, Mode mode, std::size_t depth,
                          const std::optional<std::vector<std::size_t>>& sample_sizes, Rng* rng) {
  std::vector<ReplicaId> all(nb.num_nodes());
  std::iota(all.begin(), all.end(), ReplicaId{0});
  return make_plan(nb, mode, all, depth, sample_sizes, rng);
}

// ---------------------------------------------------------------------------
// Embedding table

EmbeddingTable::EmbeddingTable(std::vector<ReplicaId> nodes, Eigen::MatrixXd columns, std::size_t num_nodes)
    : nodes_(std::move(nodes)), columns_(std::move(columns)), position_(num_nodes, -1) {
  if (static_cast<std::size_t>(columns_.cols()) != nodes_.size()) {
    throw std::invalid_argument("EmbeddingTable: column count does not match node count");
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) position_.at(nodes_[i]) = static_cast<std::int64_t>(i);
}

// ---------------------------------------------------------------------------
// Forward

namespace {

void activate(Activation a, const Eigen::MatrixXd& pre, Eigen::MatrixXd& out) {
  switch (a) {
    case Activation::relu: out = pre.cwiseMax(0.0); break;
    case Activation::sigmoid: out = pre.unaryExpr([](double x) { return sigmoid(x); }); break;
    case Activation::identity: out = pre; break;
  }
}

// dPre = dH ⊙ θ'(pre), with θ' evaluated from pre and h = θ(pre).
void activation_backward(Activation a, const Eigen::MatrixXd& pre, const Eigen::MatrixXd& h, Eigen::MatrixXd& grad) {
  switch (a) {
    case Activation::relu: grad = grad.cwiseProduct((pre.array() > 0.0).cast<double>().matrix()); break;
    case Activation::sigmoid: grad = grad.cwiseProduct(h.cwiseProduct((1.0 - h.array()).matrix())); break;
    case Activation::identity: break;
  }
}

// Column means over CSR-style index lists; empty lists give zero columns.
Eigen::MatrixXd neighborhood_means(const Eigen::MatrixXd& in, const std::vector<std::size_t>& offsets,
                                   const std::vector<std::uint32_t>& index) {
  const auto count = static_cast<Eigen::Index>(offsets.size() - 1);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(in.rows(), count);
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto b = offsets[i], e = offsets[i + 1];
    if (b == e) continue;
    for (auto p = b; p < e; ++p) out.col(i) += in.col(index[p]);
    out.col(i) /= static_cast<double>(e - b);
  }
  return out;
}

}  // namespace

ForwardCache forward(const Neighborhoods& nb, const ModelParams& params, const Features& features,
                     ComputationPlan plan, bool l2_normalize) {
  params.validate();
  if (features.dim() != params.input_dim()) {
    throw std::invalid_argument("feature dimension " + std::to_string(features.dim()) +
                                " does not match model input dimension " + std::to_string(params.input_dim()));
  }
  if (features.num_nodes() != nb.num_nodes()) {
    throw std::invalid_argument("feature rows do not match the number of replicas");
  }
  if (plan.depth() != params.depth()) throw std::invalid_argument("plan depth does not match model depth");
  if (plan.mode != params.mode) throw std::invalid_argument("plan built for a different mode");

  const std::size_t depth = params.depth();
  const bool multisage = params.mode == Mode::multisage;
  ForwardCache c;
  c.normalized = l2_normalize;
  c.hidden.resize(depth + 1);
  c.pre.resize(depth);
  c.mean_h.resize(depth);
  c.mean_v.resize(depth);
  c.self_in.resize(depth);

  if (!features.is_one_hot()) {
    const auto& src = plan.nodes[0];
    c.hidden[0].resize(features.columns().rows(), static_cast<Eigen::Index>(src.size()));
    for (std::size_t j = 0; j < src.size(); ++j) c.hidden[0].col(static_cast<Eigen::Index>(j)) = features.columns().col(src[j]);
  }

  for (std::size_t k = 1; k <= depth; ++k) {
    const auto& w = params.layers[k - 1];
    const auto& hop = plan.hops[k - 1];
    const auto& tier = plan.nodes[k];
    const auto count = static_cast<Eigen::Index>(tier.size());
    Eigen::MatrixXd& pre = c.pre[k - 1];

    if (k == 1 && features.is_one_hot()) {
      // W · e_m is column m of W, so aggregation reduces to column averaging.
      const auto& src = plan.nodes[0];
      pre.resize(w.self.rows(), count);
      for (Eigen::Index i = 0; i < count; ++i) {
        auto col = pre.col(i);
        col = w.self.col(src[hop.self_index[i]]);
        const auto hb = hop.h_offsets[i], he = hop.h_offsets[i + 1];
        if (hb != he) {
          Eigen::VectorXd acc = Eigen::VectorXd::Zero(w.horizontal.rows());
          for (auto p = hb; p < he; ++p) acc += w.horizontal.col(src[hop.h_index[p]]);
          col += acc / static_cast<double>(he - hb);
        }
        if (multisage) {
          const auto vb = hop.v_offsets[i], ve = hop.v_offsets[i + 1];
          if (vb != ve) {
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(w.vertical.rows());
            for (auto p = vb; p < ve; ++p) acc += w.vertical.col(src[hop.v_index[p]]);
            col += acc / static_cast<double>(ve - vb);
          }
        }
      }
    } else {
      const Eigen::MatrixXd& in = c.hidden[k - 1];
      c.mean_h[k - 1] = neighborhood_means(in, hop.h_offsets, hop.h_index);
      Eigen::MatrixXd& self_in = c.self_in[k - 1];
      self_in.resize(in.rows(), count);
      for (Eigen::Index i = 0; i < count; ++i) self_in.col(i) = in.col(hop.self_index[i]);
      pre.noalias() = w.horizontal * c.mean_h[k - 1];
      pre.noalias() += w.self * self_in;
      if (multisage) {
        c.mean_v[k - 1] = neighborhood_means(in, hop.v_offsets, hop.v_index);
        pre.noalias() += w.vertical * c.mean_v[k - 1];
      }
    }
    activate(params.activation_at(k), pre, c.hidden[k]);
  }

  Eigen::MatrixXd z = c.hidden[depth];
  c.norms = z.colwise().norm().transpose();
  if (l2_normalize) {
    for (Eigen::Index i = 0; i < z.cols(); ++i)
      if (c.norms[i] > 0.0) z.col(i) /= c.norms[i];
  }
  if (!z.allFinite()) throw NumericError("forward pass produced non-finite embeddings");
  c.output = EmbeddingTable(plan.nodes[depth], std::move(z), nb.num_nodes());
  c.plan = std::move(plan);
  return c;
}

EmbeddingTable embed(const Neighborhoods& nb, const ModelParams& params, const Features& features,
                     bool l2_normalize) {
  return forward(nb, params, features, full_plan(nb, params.mode, params.depth()), l2_normalize).output;
}

// ---------------------------------------------------------------------------
// Loss

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

namespace {
void check_batch(std::span<const Edge> positives, std::span<const ReplicaId> negatives, std::size_t q) {
  if (negatives.size() != positives.size() * q) {
    throw std::invalid_argument("expected " + std::to_string(q) + " negatives per positive edge");
  }
}
}  // namespace

double negative_sampling_loss(const EmbeddingTable& z, std::span<const Edge> positives,
                              std::span<const ReplicaId> negatives, std::size_t q) {
  check_batch(positives, negatives, q);
  // Neumaier-compensated sum of the terms.
  double j = 0.0, c = 0.0;
  auto add = [&](double t) {
    const double s = j + t;
    c += std::abs(j) >= std::abs(t) ? (j - s) + t : (t - s) + j;
    j = s;
  };
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const auto& e = positives[i];
    const auto zn = z.vector(e.u);
    add(-log_sigmoid(zn.dot(z.vector(e.v))));
    for (std::size_t s = 0; s < q; ++s) add(-log_sigmoid(-zn.dot(z.vector(negatives[i * q + s]))));
  }
  return j + c;
}

double score_link(const EmbeddingTable& z, ReplicaId n, ReplicaId m) { return z.vector(n).dot(z.vector(m)); }

// ---------------------------------------------------------------------------
// Backward

LossGradient loss_gradient(const ModelParams& params, const Features& features, const ForwardCache& cache,
                           std::span<const Edge> positives, std::span<const ReplicaId> negatives, std::size_t q,
                           double scale) {
  check_batch(positives, negatives, q);
  const std::size_t depth = params.depth();
  if (cache.plan.depth() != depth || cache.plan.mode != params.mode || cache.hidden.size() != depth + 1) {
    throw std::invalid_argument("forward cache does not match the model");
  }
  for (std::size_t k = 1; k <= depth; ++k) {
    if (static_cast<std::size_t>(cache.hidden[k].rows()) != params.dims[k]) {
      throw std::invalid_argument("forward cache was produced with different dimensions");
    }
  }
  const auto& z = cache.output;
  auto require = [&](ReplicaId n) {
    if (!z.contains(n)) throw std::invalid_argument("forward cache does not cover replica " + std::to_string(n));
  };
  for (const auto& e : positives) {
    require(e.u);
    require(e.v);
  }
  for (auto n : negatives) require(n);

  LossGradient out;
  out.gradients = zero_gradients(params);

  // dJ/dz
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(z.columns().rows(), z.columns().cols());
  auto pos = [&](ReplicaId n) { return static_cast<Eigen::Index>(std::lower_bound(z.nodes().begin(), z.nodes().end(), n) - z.nodes().begin()); };
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const auto a = pos(positives[i].u);
    const auto b = pos(positives[i].v);
    const double s = z.columns().col(a).dot(z.columns().col(b));
    out.loss -= log_sigmoid(s);
    const double c = (sigmoid(s) - 1.0) * scale;
    grad.col(a) += c * z.columns().col(b);
    grad.col(b) += c * z.columns().col(a);
    for (std::size_t t = 0; t < q; ++t) {
      const auto m = pos(negatives[i * q + t]);
      const double sn = z.columns().col(a).dot(z.columns().col(m));
      out.loss -= log_sigmoid(-sn);
      const double cn = sigmoid(sn) * scale;
      grad.col(a) += cn * z.columns().col(m);
      grad.col(m) += cn * z.columns().col(a);
    }
  }

  // Through the optional normalisation z = h / ||h||.
  if (cache.normalized) {
    for (Eigen::Index i = 0; i < grad.cols(); ++i) {
      const double norm = cache.norms[i];
      if (norm > 0.0) {
        const auto zi = z.columns().col(i);
        grad.col(i) = (grad.col(i) - zi * zi.dot(grad.col(i))) / norm;
      } else {
        grad.col(i).setZero();
      }
    }
  }

  const bool multisage = params.mode == Mode::multisage;
  for (std::size_t k = depth; k >= 1; --k) {
    const auto& w = params.layers[k - 1];
    auto& gw = out.gradients[k - 1];
    const auto& hop = cache.plan.hops[k - 1];
    activation_backward(params.activation_at(k), cache.pre[k - 1], cache.hidden[k], grad);
    const auto count = grad.cols();

    if (k == 1 && features.is_one_hot()) {
      const auto& src = cache.plan.nodes[0];
      for (Eigen::Index i = 0; i < count; ++i) {
        const auto g = grad.col(i);
        gw.self.col(src[hop.self_index[i]]) += g;
        const auto hb = hop.h_offsets[i], he = hop.h_offsets[i + 1];
        for (auto p = hb; p < he; ++p) gw.horizontal.col(src[hop.h_index[p]]) += g / static_cast<double>(he - hb);
        if (multisage) {
          const auto vb = hop.v_offsets[i], ve = hop.v_offsets[i + 1];
          for (auto p = vb; p < ve; ++p) gw.vertical.col(src[hop.v_index[p]]) += g / static_cast<double>(ve - vb);
        }
      }
      break;
    }

    gw.horizontal.noalias() += grad * cache.mean_h[k - 1].transpose();
    gw.self.noalias() += grad * cache.self_in[k - 1].transpose();
    if (multisage) gw.vertical.noalias() += grad * cache.mean_v[k - 1].transpose();
    if (k == 1) break;

    const auto& in = cache.hidden[k - 1];
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(in.rows(), in.cols());
    const Eigen::MatrixXd gh = w.horizontal.transpose() * grad;
    const Eigen::MatrixXd gs = w.self.transpose() * grad;
    Eigen::MatrixXd gv;
    if (multisage) gv = w.vertical.transpose() * grad;
    for (Eigen::Index i = 0; i < count; ++i) {
      next.col(hop.self_index[i]) += gs.col(i);
      const auto hb = hop.h_offsets[i], he = hop.h_offsets[i + 1];
      for (auto p = hb; p < he; ++p) next.col(hop.h_index[p]) += gh.col(i) / static_cast<double>(he - hb);
      if (multisage) {
        const auto vb = hop.v_offsets[i], ve = hop.v_offsets[i + 1];
        for (auto p = vb; p < ve; ++p) next.col(hop.v_index[p]) += gv.col(i) / static_cast<double>(ve - vb);
      }
    }
    grad = std::move(next);
  }
  return out;
}

LossGradient gradients(const Neighborhoods& nb, const ModelParams& params, const Features& features,
                       std::span<const Edge> positives, std::span<const ReplicaId> negatives, std::size_t q,
                       bool l2_normalize) {
  std::vector<ReplicaId> targets;
  for (const auto& e : positives) {
    targets.push_back(e.u);
    targets.push_back(e.v);
  }
  targets.insert(targets.end(), negatives.begin(), negatives.end());
  auto cache = forward(nb, params, features, make_plan(nb, params.mode, targets, params.depth()), l2_normalize);
  return loss_gradient(params, features, cache, positives, negatives, q);
}

// ---------------------------------------------------------------------------
// Negative sampling

NegativeSampler::NegativeSampler(const Csr& adjacency, NegativeSamplerConfig config)
    : adjacency_(&adjacency), config_(config) {
  if (config_.q < 1) throw std::invalid_argument("negative sampler needs q >= 1");
  if (adjacency.num_rows() < 2) throw std::invalid_argument("negative sampling needs at least two replicas");
  if (config_.distribution == NegativeDistribution::degree_power) {
    cumulative_.resize(adjacency.num_rows());
    double acc = 0.0;
    for (ReplicaId n = 0; n < adjacency.num_rows(); ++n) {
      acc += std::pow(static_cast<double>(adjacency.degree(n)), config_.exponent);
      cumulative_[n] = acc;
    }
  }
}

ReplicaId NegativeSampler::draw_weighted(Rng& rng) const {
  const double r = uniform01(rng) * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
  if (it == cumulative_.end()) --it;
  return static_cast<ReplicaId>(it - cumulative_.begin());
}

void NegativeSampler::sample(ReplicaId n, Rng& rng, std::vector<ReplicaId>& out) {
  const auto& adj = *adjacency_;
  const std::size_t total = adj.num_rows();
  const auto row = adj.row(n);
  const std::size_t support = total - 1 - row.size();
  auto excluded = [&](ReplicaId m) { return m == n || std::binary_search(row.begin(), row.end(), m); };
  auto fallback = [&] {
    if (fallbacks_++ == 0) {
      log::warn("negative sampling support is empty for replica " + std::to_string(n) +
                "; falling back to uniform draws over all other replicas");
    }
    for (std::size_t s = 0; s < config_.q; ++s) {
      auto m = static_cast<ReplicaId>(uniform_index(rng, total - 1));
      out.push_back(m >= n ? m + 1 : m);
    }
  };

  if (config_.distribution == NegativeDistribution::uniform) {
    if (support == 0) return fallback();
    if (support * 4 >= total) {
      for (std::size_t s = 0; s < config_.q;) {
        auto m = static_cast<ReplicaId>(uniform_index(rng, total));
        if (excluded(m)) continue;
        out.push_back(m);
        ++s;
      }
      return;
    }
    // Sparse support: enumerate it explicitly.
    std::vector<ReplicaId> candidates;
    candidates.reserve(support);
    for (ReplicaId m = 0; m < total; ++m)
      if (!excluded(m)) candidates.push_back(m);
    for (std::size_t s = 0; s < config_.q; ++s) out.push_back(candidates[uniform_index(rng, candidates.size())]);
    return;
  }

  // degree_power
  auto weight = [&](ReplicaId m) { return cumulative_[m] - (m == 0 ? 0.0 : cumulative_[m - 1]); };
  double excluded_weight = weight(n);
  for (auto m : row) excluded_weight += weight(m);
  const double support_weight = cumulative_.back() - excluded_weight;
  if (support == 0 || support_weight <= 1e-12 * cumulative_.back()) return fallback();
  if (support_weight * 4 >= cumulative_.back()) {
    for (std::size_t s = 0; s < config_.q;) {
      auto m = draw_weighted(rng);
      if (excluded(m)) continue;
      out.push_back(m);
      ++s;
    }
    return;
  }
  std::vector<ReplicaId> candidates;
  std::vector<double> cum;
  double acc = 0.0;
  for (ReplicaId m = 0; m < total; ++m) {
    if (excluded(m) || weight(m) <= 0.0) continue;
    acc += weight(m);
    candidates.push_back(m);
    cum.push_back(acc);
  }
  for (std::size_t s = 0; s < config_.q; ++s) {
    auto it = std::upper_bound(cum.begin(), cum.end(), uniform01(rng) * acc);
    if (it == cum.end()) --it;
    out.push_back(candidates[static_cast<std::size_t>(it - cum.begin())]);
  }
}

std::vector<ReplicaId> sample_negatives(ReplicaId n, const Csr& adjacency, const NegativeSamplerConfig& config) {
  NegativeSampler sampler(adjacency, config);
  Rng rng(derive_seed(config.seed, {n}));
  return sampler.sample(n, rng);
}

}  // namespace multisage
