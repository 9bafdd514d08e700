#pragma once

#include "multisage/experiments.hpp"
#include "multisage/ingest.hpp"
#include "multisage/log.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace multisage {

inline constexpr int kConfigSchemaVersion = 1;

struct DatasetSpec {
  std::string name;
  std::filesystem::path edges;
  std::optional<std::filesystem::path> couplings;
  CouplingPolicy coupling_policy = CouplingPolicy::derive_shared_label;
};

/// Synthetic clustered base layer for ER sweeps when no dataset is given:
/// a Watts–Strogatz graph.
struct SurrogateSpec {
  std::size_t nodes = 5000;
  std::size_t k = 6;
  double phi = 0.05;
};

/// Declarative run document. Sections: data_dir, datasets, model, train,
/// negatives, split, sweep, output, seed, log_level.
struct RunConfig {
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> data_dir;
  std::vector<DatasetSpec> datasets;
  /// Mode of single training runs (cmd train).
  Mode mode = Mode::multisage;
  /// Sweep settings; sweep.protocol carries model/train/negatives/split.
  SweepSpec sweep;
  std::optional<SurrogateSpec> er_surrogate;
  std::filesystem::path output_dir = "results";
  ResultFormat format = ResultFormat::csv;
  log::Level log_level = log::Level::warn;

  [[nodiscard]] const ProtocolConfig& protocol() const { return sweep.protocol; }
};

/// Parses and validates a config document. Unknown keys, wrong types and
/// out-of-range values throw ConfigError.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

/// Fully resolved document (every field present); parse_run_config(to_json(c))
/// reproduces c.
nlohmann::json to_json(const RunConfig& config);
nlohmann::json to_json(const SweepSpec& spec);
nlohmann::json to_json(const ProtocolConfig& protocol);

/// Relative paths resolve against data_dir, then $MULTISAGE_DATA_DIR, then
/// the working directory.
std::filesystem::path resolve_data_path(const RunConfig& config, const std::filesystem::path& p);

inline constexpr const char* kDataDirEnv = "MULTISAGE_DATA_DIR";

}  // namespace multisage
