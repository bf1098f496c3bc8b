// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace cad::corpus {

/// Integer codes are part of the checkpoint format; do not reorder.
enum class EmotionLabel : std::uint8_t {
  Neutral = 0,
  Joy = 1,
  Sadness = 2,
  Fear = 3,
  Anger = 4,
  Surprise = 5,
  Disgust = 6,
  NonNeutral = 7,
};

inline constexpr std::size_t kNumLabels = 8;
inline constexpr std::array<EmotionLabel, kNumLabels> kAllLabels = {
    EmotionLabel::Neutral, EmotionLabel::Joy,      EmotionLabel::Sadness, EmotionLabel::Fear,
    EmotionLabel::Anger,   EmotionLabel::Surprise, EmotionLabel::Disgust, EmotionLabel::NonNeutral};

constexpr std::size_t code(EmotionLabel l) { return static_cast<std::size_t>(l); }
EmotionLabel label_from_code(std::size_t code);

/// Lowercase corpus spelling: "neutral", ..., "non-neutral".
std::string_view label_name(EmotionLabel l);
/// Three-letter table abbreviation: "Neu", "Joy", ...
std::string_view label_abbrev(EmotionLabel l);
/// Case-insensitive. Throws DataError on unknown strings.
EmotionLabel parse_label(std::string_view s);

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";

struct Utterance {
  std::string speaker;
  std::string raw_text;
  std::vector<std::string> tokens;  // never empty; see empty_after_normalization
  EmotionLabel gold = EmotionLabel::Neutral;
  bool labeled = true;
  bool empty_after_normalization = false;
  std::size_t index_in_dialogue = 0;
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> utterances;
};

enum class SplitName { Train, Validation, Test };
std::string_view split_name(SplitName s);
SplitName parse_split(std::string_view s);

using LabelHistogram = std::array<std::size_t, kNumLabels>;

struct DatasetSplit {
  SplitName name = SplitName::Train;
  std::vector<Dialogue> dialogues;

  std::size_t utterance_count() const;
  LabelHistogram histogram() const;
};

using Corpus = std::map<SplitName, DatasetSplit>;

/// Lowercases, drops emoticons and punctuation except `!` and `?` (which
/// become standalone tokens), and splits on whitespace.
std::vector<std::string> normalize_text(std::string_view raw);

/// Builds an utterance from raw fields, applying normalization. An utterance
/// that normalizes to nothing carries the single token `<unk>`.
Utterance make_utterance(std::string speaker, std::string raw_text, std::size_t index);

struct PaddedTokens {
  std::vector<std::string> tokens;
  std::size_t valid_len = 0;
};

/// Keeps the first max_len tokens, pads the tail with `<pad>`.
PaddedTokens pad_or_truncate(std::span<const std::string> tokens, std::size_t max_len = 50);

/// Parses the EmotionLines layout: an array of dialogues, each an array of
/// {"speaker", "utterance", "emotion"} objects. Dialogue ids are
/// "<id_prefix>-<position>". With require_labels false, a missing "emotion"
/// leaves the utterance unlabeled.
std::vector<Dialogue> parse_dialogues(const nlohmann::json& doc, std::string_view id_prefix,
                                      bool require_labels = true);
std::vector<Dialogue> read_dialogue_file(const std::filesystem::path& path, std::string_view id_prefix,
                                         bool require_labels = true);

/// Split a file belongs to, from its name: *train* -> train, *dev*/*val* ->
/// validation, *test* -> test. Anything else is nullopt.
std::optional<SplitName> split_for_filename(const std::filesystem::path& path);

/// Loads a corpus from a directory of per-split JSON files or from a single
/// file (one split, inferred from the filename, train by default).
Corpus load_corpus(const std::filesystem::path& path);

/// Inverse of parse_dialogues for the raw fields.
nlohmann::json serialize_split(const DatasetSplit& split);

}  // namespace cad::corpus
