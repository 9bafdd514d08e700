#pragma once

#include "multisage/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace multisage {

/// Model checkpoint: parameters plus the output-normalisation flag used in
/// training. The text layout is documented in docs/formats.md.
struct Checkpoint {
  ModelParams params;
  bool l2_normalize_output = true;
  /// Free-form single-line provenance (resolved config); may be empty.
  std::string provenance;
};

inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Checkpoint& ck);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace multisage
