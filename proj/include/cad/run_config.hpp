// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "cad/model.hpp"
#include "cad/train.hpp"
#include "json.hpp"

namespace cad::cli {

/// Everything a run depends on: model widths, training settings, file paths.
/// Parsed from flat `key = value` text with `#` comments. Any key can be
/// overridden by the environment variable CAD_<KEY> (upper case).
struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path output_dir;
  std::filesystem::path word_vectors;  // empty: random word vectors
  std::filesystem::path features;      // empty: zero-filled feature channels
  std::string log_level = "info";
  model::ModelConfig model;
  train::TrainConfig train;

  using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

  /// Relative paths in `text` resolve against `base_dir`; relative paths from
  /// the environment resolve against the working directory. Unknown keys,
  /// malformed values and a missing corpus or output_dir throw ConfigError.
  static RunConfig parse(const std::string& text, const std::filesystem::path& base_dir, const EnvLookup& env);
  /// Reads the file and consults the process environment.
  static RunConfig load(const std::filesystem::path& path);

  /// Every referenced input path must exist; throws ConfigError naming it.
  void validate_paths() const;

  /// All keys in a fixed order, one "key = value" per line.
  std::string canonical() const;
  /// FNV-1a over the keys that influence results (everything except
  /// output_dir and log_level), 16 hex digits.
  std::string hash() const;
  /// The result-affecting keys plus the hash.
  nlohmann::ordered_json to_json() const;
};

/// Process environment lookup used by RunConfig::load.
std::optional<std::string> process_env(const std::string& name);

}  // namespace cad::cli
