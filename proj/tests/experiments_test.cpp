#include "multisage/errors.hpp"
#include "multisage/experiments.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace multisage;
using namespace multisage::testing;

namespace {

ProtocolConfig quick_protocol(std::size_t epochs = 5) {
  ProtocolConfig p;
  p.hidden_dims = {8, 8};
  p.train.epochs = epochs;
  p.train.learning_rate = 0.01;
  return p;
}

MultiplexGraph planted(std::size_t layers, std::size_t communities, std::size_t size, std::uint64_t seed) {
  std::istringstream in(planted_edge_list(layers, communities, size, 0.5, seed));
  return parse_multiplex(in, nullptr, CouplingPolicy::derive_shared_label);
}

void expect_same_stats(const std::optional<RunStats>& a, const std::optional<RunStats>& b) {
  ASSERT_EQ(a.has_value(), b.has_value());
  if (a) {
    EXPECT_EQ(a->mean, b->mean);
    EXPECT_EQ(a->std, b->std);
    EXPECT_EQ(a->count, b->count);
  }
}

void expect_same_rows(const ExperimentResult& a, const ExperimentResult& b) {
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto &x = a.rows[i], &y = b.rows[i];
    EXPECT_EQ(x.coordinate, y.coordinate);
    EXPECT_EQ(x.mode, y.mode);
    expect_same_stats(x.auc_intra, y.auc_intra);
    expect_same_stats(x.auc_inter, y.auc_inter);
    EXPECT_EQ(x.delta, y.delta);
    EXPECT_EQ(x.runs, y.runs);
    EXPECT_EQ(x.graph_seed, y.graph_seed);
  }
}

}  // namespace

TEST(Experiments, MultisageRecoversPlantedCouplings) {
  // Ten communities of ten replicas copied on two layers: an entity's
  // replicas share a community, so inter-layer links are predictable from
  // structure alone.
  auto g = planted(2, 10, 10, 3);
  SweepSpec spec{.runs = 2, .modes = {Mode::multisage}, .master_seed = 11, .threads = 0};
  spec.protocol.hidden_dims = {64, 64};
  spec.protocol.train.epochs = 200;
  spec.protocol.train.learning_rate = 0.01;
  auto r = run_benchmark(g, "planted", spec);
  const auto* row = r.find("planted", Mode::multisage);
  ASSERT_NE(row, nullptr);
  ASSERT_TRUE(row->auc_inter);
  EXPECT_GT(row->auc_inter->mean, 0.9);
  for (const auto& run : row->per_run) EXPECT_GT(*run.auc_inter, 0.85);
}

TEST(Experiments, RunOnceIndependentOfModeOrder) {
  auto g = random_multiplex(3, {.layers = 3, .entities = 16});
  auto protocol = quick_protocol();
  std::vector<Mode> ab{Mode::multisage, Mode::graphsage}, ba{Mode::graphsage, Mode::multisage};
  auto x = run_once(g, ab, protocol, 42, 0);
  auto y = run_once(g, ba, protocol, 42, 0);
  ASSERT_EQ(x.size(), 2u);
  EXPECT_EQ(x[0].auc_inter, y[1].auc_inter);
  EXPECT_EQ(x[0].auc_intra, y[1].auc_intra);
  EXPECT_EQ(x[0].final_loss, y[1].final_loss);
  EXPECT_EQ(x[1].auc_inter, y[0].auc_inter);
  EXPECT_EQ(x[1].final_loss, y[0].final_loss);
}

TEST(Experiments, ThreadCountAndShardingDoNotChangeResults) {
  auto g = random_multiplex(5, {.layers = 4, .entities = 14});
  SweepSpec spec{.kind = SweepKind::layer_sweep, .runs = 3, .master_seed = 2};
  spec.protocol = quick_protocol();
  auto serial = run_layer_sweep(g, "toy", spec);
  spec.threads = 4;
  auto parallel = run_layer_sweep(g, "toy", spec);
  expect_same_rows(serial, parallel);

  ExperimentResult merged = serial;
  merged.rows.clear();
  spec.shard_count = 2;
  for (std::size_t s = 0; s < 2; ++s) {
    spec.shard_index = s;
    auto part = run_layer_sweep(g, "toy", spec);
    merged.rows.insert(merged.rows.end(), part.rows.begin(), part.rows.end());
  }
  std::stable_sort(merged.rows.begin(), merged.rows.end(),
                   [](const ResultRow& a, const ResultRow& b) { return *a.coordinate_value < *b.coordinate_value; });
  expect_same_rows(serial, merged);
}

TEST(Experiments, FullLayerSweepPointMatchesBenchmark) {
  // With layers already in descending size order the full prefix is the
  // graph itself, replica for replica.
  std::optional<MultiplexGraph> found;
  for (std::uint64_t seed = 1; !found && seed < 100; ++seed) {
    auto g = random_multiplex(seed, {.layers = 3, .entities = 16});
    const auto order = layers_by_size(g);
    if (std::is_sorted(order.begin(), order.end()) && g.layer_size(0) > g.layer_size(1) &&
        g.layer_size(1) > g.layer_size(2))
      found = std::move(g);
  }
  ASSERT_TRUE(found);
  const auto& g = *found;
  SweepSpec spec{.runs = 2, .master_seed = 9};
  spec.protocol = quick_protocol();
  auto bench = run_benchmark(g, "toy", spec);
  spec.kind = SweepKind::layer_sweep;
  auto sweep = run_layer_sweep(g, "toy", spec);

  const auto deltas = delta(g, layers_by_size(g));
  ASSERT_EQ(sweep.rows.size(), 2 * (g.num_layers() - 1));
  for (const auto& row : sweep.rows) {
    const auto L = static_cast<std::size_t>(*row.coordinate_value);
    EXPECT_EQ(row.coordinate, "L=" + std::to_string(L));
    EXPECT_EQ(row.delta, deltas.points[L - 2].delta);
  }
  for (Mode mode : {Mode::multisage, Mode::graphsage}) {
    const auto* a = bench.find("toy", mode);
    const auto* b = sweep.find("L=" + std::to_string(g.num_layers()), mode);
    ASSERT_TRUE(a && b);
    expect_same_stats(a->auc_inter, b->auc_inter);
    expect_same_stats(a->auc_intra, b->auc_intra);
  }
}

TEST(Experiments, BenchmarkRowsCarryPerRunRecords) {
  auto g = random_multiplex(9, {.layers = 3, .entities = 16});
  SweepSpec spec{.runs = 3, .master_seed = 4};
  spec.protocol = quick_protocol();
  auto r = run_benchmark(g, "toy", spec);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].mode, Mode::multisage);
  EXPECT_EQ(r.rows[1].mode, Mode::graphsage);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.runs, 3u);
    ASSERT_EQ(row.per_run.size(), 3u);
    std::vector<double> inter;
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(row.per_run[i].run, i);
      EXPECT_EQ(row.per_run[i].seed, run_seed(4, i));
      inter.push_back(*row.per_run[i].auc_inter);
    }
    EXPECT_EQ(*row.auc_inter, aggregate_runs(inter));
  }
  EXPECT_EQ(r.config_hash().size(), 16u);
}

TEST(Experiments, SyntheticSweepsLabelCoordinates) {
  SweepSpec spec{.kind = SweepKind::ws_sweep, .runs = 1, .grid = {0.0, 0.5}, .ws_nodes = 200, .ws_k = 4};
  spec.protocol = quick_protocol(2);
  auto ws = run_ws_sweep(spec);
  EXPECT_EQ(ws.dataset, "ws_n200_k4");
  ASSERT_EQ(ws.rows.size(), 2u);
  EXPECT_EQ(ws.rows[0].coordinate, "phi=0");
  EXPECT_EQ(ws.rows[1].coordinate, "phi=0.5");
  EXPECT_EQ(ws.rows[0].mode, Mode::graphsage);
  EXPECT_TRUE(ws.rows[0].graph_seed.has_value());
  EXPECT_NE(ws.rows[0].graph_seed, ws.rows[1].graph_seed);
  EXPECT_TRUE(ws.rows[0].auc_intra.has_value());
  EXPECT_FALSE(ws.rows[0].auc_inter.has_value());

  spec.kind = SweepKind::er_sweep;
  spec.grid = {0.0, 1e-2};
  auto er = run_er_sweep(watts_strogatz(200, 6, 0.05, 1), "base", spec);
  ASSERT_EQ(er.rows.size(), 2u);
  EXPECT_EQ(er.rows[1].coordinate, "rho=0.01");
  EXPECT_EQ(er.rows[1].coordinate_value, 1e-2);
}

TEST(Experiments, Grids) {
  auto rho = default_rho_grid();
  ASSERT_EQ(rho.size(), 11u);
  EXPECT_EQ(rho[0], 0.0);
  EXPECT_NEAR(rho[1], 1e-5, 1e-20);
  EXPECT_NEAR(rho.back(), 1e-1, 1e-15);
  for (std::size_t i = 2; i < rho.size(); ++i) EXPECT_NEAR(std::log10(rho[i] / rho[i - 1]), 4.0 / 9.0, 1e-12);
  auto phi = default_phi_grid();
  ASSERT_EQ(phi.size(), 11u);
  EXPECT_EQ(phi[0], 0.0);
  EXPECT_NEAR(phi[1], 1e-4, 1e-19);
  EXPECT_NEAR(phi.back(), 1.0, 1e-15);
  SweepSpec s{.kind = SweepKind::er_sweep};
  EXPECT_EQ(s.resolved_grid(), rho);
  EXPECT_EQ(s.resolved_modes(), std::vector<Mode>{Mode::graphsage});
  s.kind = SweepKind::benchmark;
  EXPECT_EQ(s.resolved_modes(), (std::vector<Mode>{Mode::multisage, Mode::graphsage}));
}

TEST(Experiments, SpecValidation) {
  EXPECT_THROW(parse_sweep_kind("nope"), ConfigError);
  EXPECT_EQ(parse_sweep_kind("ws_sweep"), SweepKind::ws_sweep);
  EXPECT_THROW((SweepSpec{.runs = 0}.validate()), ConfigError);
  EXPECT_THROW((SweepSpec{.shard_index = 2, .shard_count = 2}.validate()), ConfigError);
  EXPECT_THROW((SweepSpec{.kind = SweepKind::er_sweep, .grid = {-0.1}}.validate()), ConfigError);
  EXPECT_THROW((SweepSpec{.kind = SweepKind::ws_sweep, .grid = {1.5}}.validate()), ConfigError);
  EXPECT_NE(run_seed(1, 0), run_seed(1, 1));
  EXPECT_NE(run_seed(1, 0), run_seed(2, 0));
  EXPECT_NE(split_seed(5), 5u);
}

TEST(Experiments, ConfigHashIsStableAndSensitive) {
  nlohmann::json a = {{"x", 1}, {"y", {1, 2}}};
  nlohmann::json b = {{"y", {1, 2}}, {"x", 1}};
  EXPECT_EQ(config_hash(a), config_hash(b));
  b["x"] = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).find_first_not_of("0123456789abcdef"), std::string::npos);
}

TEST(Experiments, ResultsRoundTrip) {
  auto g = random_multiplex(13, {.layers = 3, .entities = 14});
  SweepSpec spec{.kind = SweepKind::layer_sweep, .runs = 2, .master_seed = 3};
  spec.protocol = quick_protocol(2);
  auto r = run_layer_sweep(g, "toy", spec);

  std::stringstream json;
  write_results(json, r, ResultFormat::json);
  auto back = read_results(json, ResultFormat::json);
  EXPECT_EQ(back.kind, r.kind);
  EXPECT_EQ(back.dataset, r.dataset);
  EXPECT_EQ(back.config, r.config);
  expect_same_rows(r, back);
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].per_run, r.rows[i].per_run);
    EXPECT_EQ(back.rows[i].runtime_s, r.rows[i].runtime_s);
    EXPECT_EQ(back.rows[i].seed, r.rows[i].seed);
  }

  std::stringstream csv;
  write_results(csv, r, ResultFormat::csv);
  const auto text = csv.str();
  EXPECT_NE(text.find("# config_hash " + r.config_hash()), std::string::npos);
  EXPECT_NE(text.find("coordinate,mode,auc_intra_mean,auc_intra_std,auc_inter_mean,auc_inter_std,delta,runs,seed,"
                      "runtime_s"),
            std::string::npos);
  auto summary = read_results(csv, ResultFormat::csv);
  EXPECT_EQ(summary.kind, r.kind);
  EXPECT_EQ(summary.config_hash(), r.config_hash());
  expect_same_rows(r, summary);

  std::istringstream bad("coordinate,mode\nL=2,nope\n");
  EXPECT_THROW(read_results(bad, ResultFormat::csv), DataError);
  EXPECT_THROW(parse_result_format("xml"), ConfigError);
}
