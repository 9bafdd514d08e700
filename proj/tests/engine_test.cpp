#include "multisage/engine.hpp"
#include "multisage/ingest.hpp"

#include "gradcheck.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

using namespace multisage;
using namespace multisage::testing;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform_real(rng, -1.0, 1.0);
  return m;
}

struct Instance {
  MultiplexGraph g;
  ModelParams params;
  Eigen::MatrixXd x;  // N x d0
};

Instance random_instance(std::uint64_t seed, Mode mode, Activation act, Activation out, std::size_t depth) {
  Rng rng(seed);
  auto g = random_multiplex(rng(), {.layers = 3, .entities = 10});
  std::vector<std::size_t> dims{3};
  for (std::size_t k = 0; k < depth; ++k) dims.push_back(2 + uniform_index(rng, 3));
  auto p = ModelParams::glorot(mode, act, dims, rng());
  p.output_activation = out;
  auto x = random_matrix(rng, static_cast<Eigen::Index>(g.num_replicas()), 3);
  return {std::move(g), std::move(p), std::move(x)};
}

Eigen::MatrixXd table_matrix(const EmbeddingTable& t) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.dim()), static_cast<Eigen::Index>(t.num_nodes()));
  for (ReplicaId n = 0; n < t.num_nodes(); ++n) m.col(n) = t.vector(n);
  return m;
}

}  // namespace

class ForwardOracle : public ::testing::TestWithParam<int> {};

TEST_P(ForwardOracle, MatchesPerNodeEvaluation) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  const Activation acts[] = {Activation::relu, Activation::sigmoid, Activation::identity};
  for (Mode mode : {Mode::multisage, Mode::graphsage}) {
    for (std::size_t depth : {1u, 2u, 3u}) {
      Rng pick(seed * 31 + depth);
      const auto act = acts[uniform_index(pick, 3)];
      const auto out = acts[uniform_index(pick, 3)];
      auto inst = random_instance(seed, mode, act, out, depth);
      const auto nb = Neighborhoods::multiplex(inst.g);
      for (bool normalize : {false, true}) {
        auto z = table_matrix(embed(nb, inst.params, Features::dense(inst.x), normalize));
        auto ref = reference_forward(inst.g, inst.params, inst.x.transpose(), normalize);
        EXPECT_LT((z - ref).cwiseAbs().maxCoeff(), 1e-12) << to_string(mode) << " K=" << depth;
        if (normalize) {
          for (Eigen::Index i = 0; i < z.cols(); ++i) {
            const double norm = z.col(i).norm();
            EXPECT_TRUE(norm == 0.0 || std::abs(norm - 1.0) < 1e-12);
          }
        }
      }
    }
  }
}

TEST_P(ForwardOracle, OneHotEqualsIdentityFeatures) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  for (Mode mode : {Mode::multisage, Mode::graphsage}) {
    Rng rng(seed);
    auto g = random_multiplex(rng(), {.layers = 2, .entities = 8});
    const auto n = g.num_replicas();
    auto p = ModelParams::glorot(mode, Activation::relu, {n, 4, 3}, rng());
    const auto nb = Neighborhoods::multiplex(g);
    auto a = table_matrix(embed(nb, p, Features::one_hot(n)));
    auto b = table_matrix(embed(nb, p, Features::dense(Eigen::MatrixXd::Identity(n, n))));
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, ForwardOracle, ::testing::Range(1, 11));

TEST(Forward, EdgeInputOrderDoesNotChangeOutput) {
  auto g = random_multiplex(5, {.layers = 3, .entities = 12});
  auto intra = g.intra_edges();
  auto inter = g.inter_edges();
  Rng rng(2);
  shuffle(intra.begin(), intra.end(), rng);
  shuffle(inter.begin(), inter.end(), rng);
  for (auto& e : intra)
    if (bernoulli(rng, 0.5)) std::swap(e.u, e.v);
  auto h = MultiplexGraph::build(g.layer_names(), g.replicas(), intra, inter);
  auto p = ModelParams::glorot(Mode::multisage, Activation::relu, {g.num_replicas(), 5, 4}, 3);
  auto a = table_matrix(embed(Neighborhoods::multiplex(g), p, Features::one_hot(g.num_replicas())));
  auto b = table_matrix(embed(Neighborhoods::multiplex(h), p, Features::one_hot(h.num_replicas())));
  EXPECT_TRUE(a == b);
}

TEST(Forward, ScalingWeightsScalesIdentityOutput) {
  auto inst = random_instance(7, Mode::multisage, Activation::identity, Activation::identity, 1);
  const auto nb = Neighborhoods::multiplex(inst.g);
  auto z = table_matrix(embed(nb, inst.params, Features::dense(inst.x), false));
  auto scaled = inst.params;
  for (auto& w : scaled.layers) {
    w.horizontal *= 2.5;
    w.vertical *= 2.5;
    w.self *= 2.5;
  }
  auto z2 = table_matrix(embed(nb, scaled, Features::dense(inst.x), false));
  EXPECT_LT((z2 - 2.5 * z).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, EmptyVerticalNeighborhoodIgnoresVerticalWeights) {
  auto inst = random_instance(11, Mode::multisage, Activation::sigmoid, Activation::identity, 1);
  const auto nb = Neighborhoods::multiplex(inst.g);
  auto z = table_matrix(embed(nb, inst.params, Features::dense(inst.x), false));
  auto changed = inst.params;
  changed.layers[0].vertical.setConstant(9.0);
  auto z2 = table_matrix(embed(nb, changed, Features::dense(inst.x), false));
  std::size_t isolated = 0;
  for (ReplicaId n = 0; n < inst.g.num_replicas(); ++n) {
    if (!inst.g.inter_neighbors(n).empty()) continue;
    ++isolated;
    EXPECT_TRUE(z.col(n) == z2.col(n));
  }
  EXPECT_GT(isolated, 0u);
}

TEST(Forward, GraphsageIgnoresEdgeTypes) {
  auto g = random_multiplex(13, {.layers = 3, .entities = 10});
  FlattenedView view(g);
  auto erased = view.to_single_layer();
  const auto n = g.num_replicas();
  auto p = ModelParams::glorot(Mode::graphsage, Activation::relu, {n, 6, 4}, 1);
  auto a = table_matrix(embed(Neighborhoods::multiplex(g), p, Features::one_hot(n)));
  auto b = table_matrix(embed(Neighborhoods::flattened(view), p, Features::one_hot(n)));
  auto c = table_matrix(embed(Neighborhoods::multiplex(erased), p, Features::one_hot(n)));
  EXPECT_TRUE(a == b);
  EXPECT_TRUE(a == c);
}

TEST(Forward, GraphsageOnLayerWithoutCouplingsMatchesMultisageWithZeroVertical) {
  auto g = lift_to_single_layer_multiplex(watts_strogatz(30, 4, 0.2, 1));
  auto gs = ModelParams::glorot(Mode::graphsage, Activation::relu, {30, 5, 3}, 4);
  auto ms = ModelParams::glorot(Mode::multisage, Activation::relu, {30, 5, 3}, 4);
  for (auto& w : ms.layers) w.vertical.setZero();
  const auto nb = Neighborhoods::multiplex(g);
  EXPECT_TRUE(table_matrix(embed(nb, gs, Features::one_hot(30))) == table_matrix(embed(nb, ms, Features::one_hot(30))));
}

TEST(Plan, SampledNeighborhoodsRespectLimits) {
  auto g = random_multiplex(17, {.layers = 3, .entities = 15, .p_intra = 0.6});
  const auto nb = Neighborhoods::multiplex(g);
  Rng rng(1);
  std::vector<ReplicaId> targets{0, 3, 7};
  for (Mode mode : {Mode::multisage, Mode::graphsage}) {
    auto plan = make_plan(nb, mode, targets, 2, std::vector<std::size_t>{3, 2}, &rng);
    ASSERT_EQ(plan.depth(), 2u);
    EXPECT_EQ(plan.targets(), targets);
    for (std::size_t k = 1; k <= 2; ++k) {
      const auto& hop = plan.hops[k - 1];
      const std::size_t limit = k == 1 ? 3 : 2;
      for (std::size_t i = 0; i < plan.nodes[k].size(); ++i) {
        const auto node = plan.nodes[k][i];
        const auto h = hop.h_offsets[i + 1] - hop.h_offsets[i];
        const auto v = hop.v_offsets[i + 1] - hop.v_offsets[i];
        EXPECT_LE(h, limit);
        EXPECT_LE(v, limit);
        const auto& csr_h = mode == Mode::multisage ? nb.horizontal() : nb.combined();
        EXPECT_EQ(h, std::min(limit, csr_h.degree(node)));
        std::set<ReplicaId> seen;
        for (auto j = hop.h_offsets[i]; j < hop.h_offsets[i + 1]; ++j) {
          const auto m = plan.nodes[k - 1][hop.h_index[j]];
          EXPECT_TRUE(csr_h.contains(node, m));
          EXPECT_TRUE(seen.insert(m).second);
        }
        if (mode == Mode::graphsage) {
          EXPECT_EQ(v, 0u);
        }
        EXPECT_EQ(plan.nodes[k - 1][hop.self_index[i]], node);
      }
    }
  }
}

TEST(Plan, SampleAtLeastDegreeEqualsFullNeighborhoods) {
  auto inst = random_instance(19, Mode::multisage, Activation::relu, Activation::identity, 2);
  const auto nb = Neighborhoods::multiplex(inst.g);
  Rng rng(5);
  auto sampled = forward(nb, inst.params, Features::dense(inst.x),
                         full_plan(nb, Mode::multisage, 2, std::vector<std::size_t>{1000, 1000}, &rng));
  auto full = embed(nb, inst.params, Features::dense(inst.x));
  EXPECT_LT((table_matrix(sampled.output) - table_matrix(full)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Loss, AllZeroEmbeddingsClosedForm) {
  for (std::size_t edges : {1u, 10u, 137u}) {
    for (std::size_t q : {1u, 5u}) {
      const std::size_t n = 300;
      EmbeddingTable z(std::vector<ReplicaId>(), Eigen::MatrixXd(4, 0), 0);
      std::vector<ReplicaId> nodes(n);
      for (ReplicaId i = 0; i < n; ++i) nodes[i] = i;
      z = EmbeddingTable(nodes, Eigen::MatrixXd::Zero(4, n), n);
      std::vector<Edge> pos;
      std::vector<ReplicaId> neg;
      for (std::size_t i = 0; i < edges; ++i) {
        pos.emplace_back(static_cast<ReplicaId>(i), static_cast<ReplicaId>(i + 1));
        for (std::size_t t = 0; t < q; ++t) neg.push_back(static_cast<ReplicaId>((i * 7 + t) % n));
      }
      const double expected = static_cast<double>(edges * (1 + q)) * std::numbers::ln2;
      EXPECT_NEAR(negative_sampling_loss(z, pos, neg, q), expected, 1e-12) << edges << " " << q;
    }
  }
}

TEST(Loss, MatchesDirectFormula) {
  Rng rng(3);
  const std::size_t n = 20, q = 3;
  std::vector<ReplicaId> nodes(n);
  for (ReplicaId i = 0; i < n; ++i) nodes[i] = i;
  Eigen::MatrixXd m = random_matrix(rng, 5, n) * 3.0;
  EmbeddingTable z(nodes, m, n);
  std::vector<Edge> pos;
  std::vector<ReplicaId> neg;
  for (int i = 0; i < 15; ++i) {
    pos.emplace_back(static_cast<ReplicaId>(uniform_index(rng, n)), static_cast<ReplicaId>(uniform_index(rng, n)));
    for (std::size_t t = 0; t < q; ++t) neg.push_back(static_cast<ReplicaId>(uniform_index(rng, n)));
  }
  EXPECT_NEAR(negative_sampling_loss(z, pos, neg, q), reference_loss(m, pos, neg, q), 1e-12);
  EXPECT_THROW(negative_sampling_loss(z, pos, std::vector<ReplicaId>(3), q), std::invalid_argument);
}

TEST(Loss, LogSigmoidIsStable) {
  EXPECT_EQ(log_sigmoid(-1000.0), -1000.0);
  EXPECT_EQ(log_sigmoid(1000.0), 0.0);
  EXPECT_NEAR(log_sigmoid(0.0), -std::numbers::ln2, 1e-15);
  EXPECT_NEAR(log_sigmoid(40.0), -std::exp(-40.0), 1e-30);
  EXPECT_NEAR(log_sigmoid(-3.0), std::log(1.0 / (1.0 + std::exp(3.0))), 1e-15);
  EXPECT_NEAR(sigmoid(-800.0), 0.0, 1e-300);
  EXPECT_EQ(sigmoid(800.0), 1.0);
}

TEST(Loss, PositiveTermVanishesForAlignedPair) {
  EmbeddingTable z({0, 1, 2}, (Eigen::MatrixXd(1, 3) << 100.0, 100.0, -100.0).finished(), 3);
  std::vector<Edge> pos{{0, 1}};
  std::vector<ReplicaId> neg{2};
  EXPECT_LT(negative_sampling_loss(z, pos, neg, 1), 1e-300);
}

class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, AnalyticMatchesCentralDifferences) {
  auto r = check_gradients(static_cast<std::uint64_t>(GetParam()));
  EXPECT_GT(r.entries, 0u);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.description;
}

INSTANTIATE_TEST_SUITE_P(Seeds, GradientCheck, ::testing::Range(1, 31));

TEST(Gradients, GraphsageHasNoVerticalGradient) {
  auto inst = random_instance(23, Mode::graphsage, Activation::relu, Activation::identity, 2);
  const auto nb = Neighborhoods::multiplex(inst.g);
  std::vector<Edge> pos{inst.g.intra_edges().front()};
  std::vector<ReplicaId> neg{0, 1};
  auto gr = gradients(nb, inst.params, Features::dense(inst.x), pos, neg, 2);
  for (const auto& w : gr.gradients) EXPECT_EQ(w.vertical.size(), 0);
}

TEST(Gradients, DeadReluGivesZeroGradient) {
  auto g = random_multiplex(29, {.layers = 2, .entities = 6, .presence = 1.0, .p_intra = 0.5});
  const auto n = g.num_replicas();
  auto p = ModelParams::glorot(Mode::multisage, Activation::relu, {2, 3}, 1);
  p.output_activation = Activation::relu;
  for (auto& w : p.layers) {
    w.horizontal = -w.horizontal.cwiseAbs();
    w.vertical = -w.vertical.cwiseAbs();
    w.self = -w.self.cwiseAbs() - Eigen::MatrixXd::Constant(3, 2, 0.1);
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n), 2, 1.0);
  const auto nb = Neighborhoods::multiplex(g);
  std::vector<Edge> pos{g.intra_edges().front()};
  std::vector<ReplicaId> neg{1};
  auto gr = gradients(nb, p, Features::dense(x), pos, neg, 1);
  EXPECT_EQ(gr.gradients[0].horizontal.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(gr.gradients[0].vertical.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(gr.gradients[0].self.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradients, CacheMismatchThrows) {
  auto inst = random_instance(31, Mode::multisage, Activation::relu, Activation::identity, 2);
  const auto nb = Neighborhoods::multiplex(inst.g);
  std::vector<ReplicaId> targets{0};
  auto cache = forward(nb, inst.params, Features::dense(inst.x), make_plan(nb, Mode::multisage, targets, 2));
  std::vector<Edge> pos{{0, 1}};
  std::vector<ReplicaId> neg{2};
  EXPECT_THROW(loss_gradient(inst.params, Features::dense(inst.x), cache, pos, neg, 1), std::invalid_argument);
  auto other = ModelParams::glorot(Mode::multisage, Activation::relu, {3, 7, 2}, 1);
  auto full = forward(nb, inst.params, Features::dense(inst.x), full_plan(nb, Mode::multisage, 2));
  EXPECT_THROW(loss_gradient(other, Features::dense(inst.x), full, pos, neg, 1), std::invalid_argument);
}

TEST(Score, DotProduct) {
  EmbeddingTable z({0, 1, 2}, (Eigen::MatrixXd(2, 3) << 1, 0, 1, 0, 1, 0).finished(), 3);
  EXPECT_EQ(score_link(z, 0, 1), 0.0);
  EXPECT_EQ(score_link(z, 0, 2), 1.0);
  Rng rng(8);
  auto m = random_matrix(rng, 6, 10);
  std::vector<ReplicaId> nodes{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  EmbeddingTable r(nodes, m, 10);
  for (ReplicaId a = 0; a < 10; ++a) {
    double dot = 0.0;
    for (Eigen::Index i = 0; i < 6; ++i) dot += m(i, a) * m(i, 9 - a);
    EXPECT_NEAR(score_link(r, a, 9 - a), dot, 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Negative sampling

TEST(Sampler, ExcludesSelfAndNeighbors) {
  auto g = random_multiplex(37, {.layers = 2, .entities = 20, .p_intra = 0.4});
  FlattenedView view(g);
  const auto& adj = view.adjacency();
  for (auto dist : {NegativeDistribution::uniform, NegativeDistribution::degree_power}) {
    NegativeSampler sampler(adj, {.q = 5, .distribution = dist});
    Rng rng(1);
    for (ReplicaId n = 0; n < g.num_replicas(); ++n) {
      auto draws = sampler.sample(n, rng);
      ASSERT_EQ(draws.size(), 5u);
      for (auto m : draws) {
        EXPECT_NE(m, n);
        EXPECT_FALSE(adj.contains(n, m));
      }
    }
    EXPECT_EQ(sampler.fallback_count(), 0u);
  }
}

TEST(Sampler, StarCenterFallsBack) {
  std::vector<Edge> star;
  for (ReplicaId i = 1; i < 6; ++i) star.emplace_back(0, i);
  Csr adj(6, star);
  for (auto dist : {NegativeDistribution::uniform, NegativeDistribution::degree_power}) {
    NegativeSampler sampler(adj, {.q = 4, .distribution = dist});
    Rng rng(2);
    auto draws = sampler.sample(0, rng);
    EXPECT_EQ(draws.size(), 4u);
    for (auto m : draws) EXPECT_NE(m, 0u);
    EXPECT_EQ(sampler.fallback_count(), 1u);
    auto leaf = sampler.sample(1, rng);
    for (auto m : leaf) EXPECT_TRUE(m != 0 && m != 1);
    EXPECT_EQ(sampler.fallback_count(), 1u);
  }
}

TEST(Sampler, SeedDeterminism) {
  auto ws = watts_strogatz(100, 4, 0.1, 1);
  Csr adj(ws.num_nodes, ws.edges);
  NegativeSamplerConfig c{.q = 10, .seed = 42};
  EXPECT_EQ(sample_negatives(5, adj, c), sample_negatives(5, adj, c));
  c.seed = 43;
  auto other = sample_negatives(5, adj, c);
  c.seed = 42;
  EXPECT_NE(sample_negatives(5, adj, c), other);
}

namespace {

// Every category count within 3 sigma of its multinomial expectation.
void expect_multinomial(const std::vector<double>& weights, const std::vector<std::size_t>& counts, std::size_t draws) {
  double total = 0.0;
  for (double w : weights) total += w;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double p = weights[i] / total;
    const double mean = static_cast<double>(draws) * p;
    const double sd = std::sqrt(static_cast<double>(draws) * p * (1.0 - p));
    if (p == 0.0) {
      EXPECT_EQ(counts[i], 0u) << i;
    } else {
      EXPECT_LT(std::abs(static_cast<double>(counts[i]) - mean), 3.0 * sd) << "category " << i;
    }
  }
}

}  // namespace

TEST(Sampler, DegreePowerFrequencies) {
  // Two degree classes: hubs 1..3 of degree 5 and leaves of degree 1, plus
  // the query node 0 adjacent to node 19.
  std::vector<Edge> edges{{0, 19}};
  ReplicaId leaf = 4;
  for (ReplicaId hub = 1; hub <= 3; ++hub)
    for (int i = 0; i < 5; ++i) edges.emplace_back(hub, leaf++);
  Csr adj(20, edges);
  NegativeSampler sampler(adj, {.q = 1, .distribution = NegativeDistribution::degree_power, .exponent = 0.75});
  Rng rng(9);
  const std::size_t draws = 100000;
  std::vector<std::size_t> counts(20, 0);
  std::vector<ReplicaId> out;
  for (std::size_t i = 0; i < draws; ++i) {
    out.clear();
    sampler.sample(0, rng, out);
    ++counts[out[0]];
  }
  std::vector<double> weights(20, 0.0);
  for (ReplicaId m = 1; m < 19; ++m) weights[m] = std::pow(static_cast<double>(adj.degree(m)), 0.75);
  expect_multinomial(weights, counts, draws);
}

TEST(Sampler, UniformFrequencies) {
  auto ws = watts_strogatz(30, 4, 0.0, 1);
  Csr adj(ws.num_nodes, ws.edges);
  NegativeSampler sampler(adj, {.q = 1});
  Rng rng(4);
  const std::size_t draws = 100000;
  std::vector<std::size_t> counts(30, 0);
  std::vector<ReplicaId> out;
  for (std::size_t i = 0; i < draws; ++i) {
    out.clear();
    sampler.sample(10, rng, out);
    ++counts[out[0]];
  }
  std::vector<double> weights(30, 1.0);
  weights[10] = 0.0;
  for (auto m : adj.row(10)) weights[m] = 0.0;
  expect_multinomial(weights, counts, draws);
}

TEST(Sampler, RejectsBadConfig) {
  Csr adj(5, std::vector<Edge>{{0, 1}});
  EXPECT_THROW(NegativeSampler(adj, {.q = 0}), std::invalid_argument);
  EXPECT_THROW(NegativeSampler(Csr(1, std::vector<Edge>{}), {.q = 1}), std::invalid_argument);
}
