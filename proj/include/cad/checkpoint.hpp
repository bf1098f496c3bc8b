// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "cad/embed.hpp"
#include "cad/model.hpp"
#include "json.hpp"

namespace cad::model {

inline constexpr int kCheckpointFormatVersion = 1;

/// Canonical "key=value" lines for the model widths.
std::string canonical_config(const ModelConfig& config);
/// FNV-1a of canonical_config, as 16 hex digits.
std::string config_hash(const ModelConfig& config);

struct Checkpoint {
  ModelParams params;
  embed::Vocabulary vocab;
  nlohmann::ordered_json run_config;  // opaque to this module, stored verbatim
};

/// Writes `manifest` (JSON: format version, model config and its hash,
/// vocabulary, run config, tensor table) and a sibling blob with the same
/// stem and a .bin extension holding row-major little-endian float64 data.
/// Output bytes depend only on the arguments.
void save_checkpoint(const std::filesystem::path& manifest, const ModelParams& params, const embed::Vocabulary& vocab,
                     const nlohmann::ordered_json& run_config = nlohmann::ordered_json::object());

/// Throws VersionError on an unknown format version, a config hash that does
/// not match the stored config, or a tensor table that does not match the
/// architecture; DataError on unreadable or truncated files.
Checkpoint load_checkpoint(const std::filesystem::path& manifest);

std::filesystem::path blob_path(const std::filesystem::path& manifest);

}  // namespace cad::model
