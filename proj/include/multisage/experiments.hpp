#pragma once

#include "multisage/engine.hpp"
#include "multisage/eval.hpp"
#include "multisage/graph.hpp"
#include "multisage/ingest.hpp"
#include "multisage/model.hpp"
#include "multisage/train.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace multisage {

enum class SweepKind { benchmark, layer_sweep, er_sweep, ws_sweep };

std::string_view to_string(SweepKind k);
SweepKind parse_sweep_kind(std::string_view s);

/// Everything one train/evaluate run needs besides the graph and seeds.
struct ProtocolConfig {
  Activation activation = Activation::relu;
  Activation output_activation = Activation::identity;
  /// d_1..d_K; the input dimension is the replica count (one-hot features).
  std::vector<std::size_t> hidden_dims{128, 128};
  TrainConfig train;
  NegativeSamplerConfig sampler;
  SplitConfig split;

  void validate() const;
};

struct SweepSpec {
  SweepKind kind = SweepKind::benchmark;
  std::size_t runs = 20;
  /// Empty selects the default: both modes for datasets, graphsage for
  /// synthetic sweeps.
  std::vector<Mode> modes;
  /// ρ values (er_sweep) or φ values (ws_sweep); empty selects the default grid.
  std::vector<double> grid;
  std::size_t ws_nodes = 10000;
  std::size_t ws_k = 4;
  std::uint64_t master_seed = 0;
  /// Worker threads; 0 means hardware concurrency.
  std::size_t threads = 1;
  /// Only coordinates with index % shard_count == shard_index are run.
  std::size_t shard_index = 0;
  std::size_t shard_count = 1;
  ProtocolConfig protocol;

  void validate() const;
  [[nodiscard]] std::vector<Mode> resolved_modes() const;
  [[nodiscard]] std::vector<double> resolved_grid() const;
};

/// {0} followed by `count` log-spaced values in [lo, hi].
std::vector<double> log_grid(double lo, double hi, std::size_t count);
std::vector<double> default_rho_grid();
std::vector<double> default_phi_grid();

struct RunRecord {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::optional<double> auc_intra;
  std::optional<double> auc_inter;
  double final_loss = 0.0;
  double runtime_s = 0.0;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct ResultRow {
  std::string coordinate;
  std::optional<double> coordinate_value;
  Mode mode = Mode::multisage;
  std::optional<RunStats> auc_intra;
  std::optional<RunStats> auc_inter;
  std::optional<double> delta;
  std::size_t runs = 0;
  /// Master seed the per-run seeds derive from.
  std::uint64_t seed = 0;
  /// Seed of the generated graph (synthetic sweeps only).
  std::optional<std::uint64_t> graph_seed;
  /// Sum of the per-run wall times.
  double runtime_s = 0.0;
  std::vector<RunRecord> per_run;
};

/// FNV-1a over the canonical (key-sorted) dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

struct ExperimentResult {
  SweepKind kind = SweepKind::benchmark;
  std::string dataset;
  std::vector<ResultRow> rows;
  /// Resolved configuration; embedded in every emitted file.
  nlohmann::json config;

  [[nodiscard]] std::string config_hash() const;
  [[nodiscard]] const ResultRow* find(std::string_view coordinate, Mode mode) const;
};

/// Seed of run `run` under `master`. Independent of mode and sweep
/// coordinate, so all modes and all prefixes of a sweep share splits.
std::uint64_t run_seed(std::uint64_t master, std::size_t run);

struct ModelRun {
  TrainResult trained;
  EvalResult eval;
  double runtime_s = 0.0;
};

/// Trains `mode` on training_graph(g, split) and evaluates on the split.
/// Initial weights, epoch streams and negatives derive from `seed`.
ModelRun train_and_evaluate(const MultiplexGraph& g, const EvalSplit& split, Mode mode,
                            const ProtocolConfig& protocol, std::uint64_t seed);

/// Split seed of a run seeded with `seed`.
std::uint64_t split_seed(std::uint64_t seed);

/// One split, one training run per mode, one evaluation per mode.
std::vector<RunRecord> run_once(const MultiplexGraph& g, std::span<const Mode> modes, const ProtocolConfig& protocol,
                                std::uint64_t seed, std::size_t run_index);

ExperimentResult run_benchmark(const MultiplexGraph& g, const std::string& dataset, const SweepSpec& spec);
ExperimentResult run_layer_sweep(const MultiplexGraph& g, const std::string& dataset, const SweepSpec& spec);
ExperimentResult run_er_sweep(const SimpleGraph& base_layer, const std::string& dataset, const SweepSpec& spec);
ExperimentResult run_ws_sweep(const SweepSpec& spec);

enum class ResultFormat { csv, json };

ResultFormat parse_result_format(std::string_view s);

/// CSV columns: coordinate, mode, auc_intra_mean, auc_intra_std,
/// auc_inter_mean, auc_inter_std, delta, runs, seed, runtime_s. Leading
/// '#' lines hold the provenance block.
void write_results(std::ostream& out, const ExperimentResult& result, ResultFormat format);
ExperimentResult read_results(std::istream& in, ResultFormat format);
void emit_results(const ExperimentResult& result, ResultFormat format, const std::filesystem::path& path);
ExperimentResult load_results(const std::filesystem::path& path, ResultFormat format);

}  // namespace multisage
