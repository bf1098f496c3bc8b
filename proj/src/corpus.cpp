// SPDX-License-Identifier: Apache-2.0
#include "cad/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cad/errors.hpp"

namespace cad::corpus {
namespace {

constexpr std::array<std::string_view, kNumLabels> kNames = {"neutral", "joy",      "sadness", "fear",
                                                             "anger",   "surprise", "disgust", "non-neutral"};
constexpr std::array<std::string_view, kNumLabels> kAbbrevs = {"Neu", "Joy", "Sad", "Fea",
                                                               "Ang", "Sur", "Dis", "Non"};

constexpr std::array<std::string_view, 9> kEmoticons = {":)", ":(", ":-)", ":-(", ":d", ";)", ":p", ":/", "<3"};

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = ascii_lower(c);
  return out;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_ascii_punct(unsigned char c) {
  return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) || (c >= 0x5b && c <= 0x60) || (c >= 0x7b && c <= 0x7e);
}

// Non-ASCII code points treated as punctuation: C1 controls (cp1252
// quotes mis-decoded as Latin-1 show up here), Latin-1 punctuation and
// symbols, and the General Punctuation block.
bool is_unicode_punct(char32_t cp) {
  if (cp >= 0x80 && cp <= 0x9f) return true;
  if (cp >= 0xa0 && cp <= 0xbf) return true;
  if (cp == 0xd7 || cp == 0xf7) return true;
  if (cp >= 0x2000 && cp <= 0x206f) return true;
  if (cp >= 0x3000 && cp <= 0x303f) return true;
  if (cp == 0xfeff) return true;
  return false;
}

// Decodes one UTF-8 sequence starting at s[i]. Invalid bytes decode as
// themselves with length 1.
std::pair<char32_t, std::size_t> decode_utf8(std::string_view s, std::size_t i) {
  auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xc0) == 0x80;
  };
  auto bits = [&](std::size_t k) { return static_cast<char32_t>(static_cast<unsigned char>(s[i + k]) & 0x3f); };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xe0) == 0xc0 && cont(1)) return {((b0 & 0x1f) << 6) | bits(1), 2};
  if ((b0 & 0xf0) == 0xe0 && cont(1) && cont(2)) return {((b0 & 0x0f) << 12) | (bits(1) << 6) | bits(2), 3};
  if ((b0 & 0xf8) == 0xf0 && cont(1) && cont(2) && cont(3))
    return {((b0 & 0x07) << 18) | (bits(1) << 12) | (bits(2) << 6) | bits(3), 4};
  return {b0, 1};
}

std::string dialogue_context(std::string_view id, std::size_t utt) {
  return "dialogue " + std::string(id) + ", utterance " + std::to_string(utt);
}

}  // namespace

EmotionLabel label_from_code(std::size_t c) {
  if (c >= kNumLabels) throw DataError("label code " + std::to_string(c) + " out of range");
  return static_cast<EmotionLabel>(c);
}

std::string_view label_name(EmotionLabel l) { return kNames[code(l)]; }
std::string_view label_abbrev(EmotionLabel l) { return kAbbrevs[code(l)]; }

EmotionLabel parse_label(std::string_view s) {
  std::string key = lower(s);
  for (std::size_t i = 0; i < kNumLabels; ++i)
    if (kNames[i] == key) return static_cast<EmotionLabel>(i);
  throw DataError("unknown emotion label '" + std::string(s) + "'");
}

std::string_view split_name(SplitName s) {
  switch (s) {
    case SplitName::Train: return "train";
    case SplitName::Validation: return "validation";
    case SplitName::Test: return "test";
  }
  return "?";
}

SplitName parse_split(std::string_view s) {
  std::string key = lower(s);
  if (key == "train") return SplitName::Train;
  if (key == "validation" || key == "dev" || key == "valid") return SplitName::Validation;
  if (key == "test") return SplitName::Test;
  throw ConfigError("unknown split '" + std::string(s) + "' (expected train, validation or test)");
}

std::size_t DatasetSplit::utterance_count() const {
  std::size_t n = 0;
  for (const auto& d : dialogues) n += d.utterances.size();
  return n;
}

LabelHistogram DatasetSplit::histogram() const {
  LabelHistogram h{};
  for (const auto& d : dialogues)
    for (const auto& u : d.utterances)
      if (u.labeled) ++h[code(u.gold)];
  return h;
}

std::vector<std::string> normalize_text(std::string_view raw) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    while (pos < raw.size() && is_space(raw[pos])) ++pos;
    std::size_t end = pos;
    while (end < raw.size() && !is_space(raw[end])) ++end;
    if (end == pos) break;
    std::string_view word = raw.substr(pos, end - pos);
    pos = end;

    std::string lowered = lower(word);
    if (std::find(kEmoticons.begin(), kEmoticons.end(), lowered) != kEmoticons.end()) continue;

    std::string current;
    auto flush = [&] {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    };
    for (std::size_t i = 0; i < lowered.size();) {
      auto [cp, len] = decode_utf8(lowered, i);
      if (cp == '!' || cp == '?') {
        flush();
        tokens.emplace_back(1, static_cast<char>(cp));
      } else if (cp < 0x80 ? !is_ascii_punct(static_cast<unsigned char>(cp)) : !is_unicode_punct(cp)) {
        current.append(lowered, i, len);
      }
      i += len;
    }
    flush();
  }
  return tokens;
}

Utterance make_utterance(std::string speaker, std::string raw_text, std::size_t index) {
  Utterance u;
  u.speaker = std::move(speaker);
  u.tokens = normalize_text(raw_text);
  u.raw_text = std::move(raw_text);
  u.index_in_dialogue = index;
  if (u.tokens.empty()) {
    u.tokens.emplace_back(kUnkToken);
    u.empty_after_normalization = true;
  }
  return u;
}

PaddedTokens pad_or_truncate(std::span<const std::string> tokens, std::size_t max_len) {
  if (max_len == 0) throw ConfigError("max_len must be at least 1");
  PaddedTokens out;
  out.valid_len = std::min(tokens.size(), max_len);
  out.tokens.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(out.valid_len));
  out.tokens.resize(max_len, std::string(kPadToken));
  return out;
}

std::vector<Dialogue> parse_dialogues(const nlohmann::json& doc, std::string_view id_prefix, bool require_labels) {
  if (!doc.is_array()) throw DataError("corpus root must be an array of dialogues");
  std::vector<Dialogue> dialogues;
  dialogues.reserve(doc.size());
  for (std::size_t d = 0; d < doc.size(); ++d) {
    Dialogue dialogue;
    dialogue.id = std::string(id_prefix) + "-" + std::to_string(d);
    const auto& turns = doc[d];
    if (!turns.is_array()) throw DataError("dialogue " + dialogue.id + " is not an array of utterances");
    if (turns.empty()) throw DataError("dialogue " + dialogue.id + " has no utterances");
    for (std::size_t i = 0; i < turns.size(); ++i) {
      const auto& rec = turns[i];
      if (!rec.is_object()) throw DataError("malformed record at " + dialogue_context(dialogue.id, i));
      auto text = rec.find("utterance");
      if (text == rec.end() || !text->is_string())
        throw DataError("missing or non-string \"utterance\" at " + dialogue_context(dialogue.id, i));
      std::string speaker;
      if (auto sp = rec.find("speaker"); sp != rec.end()) {
        if (!sp->is_string()) throw DataError("non-string \"speaker\" at " + dialogue_context(dialogue.id, i));
        speaker = sp->get<std::string>();
      }
      Utterance u = make_utterance(std::move(speaker), text->get<std::string>(), i);
      auto emo = rec.find("emotion");
      if (emo == rec.end() || emo->is_null()) {
        if (require_labels) throw DataError("missing \"emotion\" at " + dialogue_context(dialogue.id, i));
        u.labeled = false;
      } else {
        if (!emo->is_string()) throw DataError("non-string \"emotion\" at " + dialogue_context(dialogue.id, i));
        try {
          u.gold = parse_label(emo->get<std::string>());
        } catch (const DataError& e) {
          throw DataError(std::string("label error at ") + dialogue_context(dialogue.id, i) + ": unknown emotion '" +
                          emo->get<std::string>() + "'");
        }
      }
      dialogue.utterances.push_back(std::move(u));
    }
    dialogues.push_back(std::move(dialogue));
  }
  return dialogues;
}

std::vector<Dialogue> read_dialogue_file(const std::filesystem::path& path, std::string_view id_prefix,
                                         bool require_labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("invalid JSON in " + path.string() + ": " + e.what());
  }
  return parse_dialogues(doc, id_prefix, require_labels);
}

std::optional<SplitName> split_for_filename(const std::filesystem::path& path) {
  std::string stem = lower(path.stem().string());
  if (stem.find("train") != std::string::npos) return SplitName::Train;
  if (stem.find("dev") != std::string::npos || stem.find("val") != std::string::npos) return SplitName::Validation;
  if (stem.find("test") != std::string::npos) return SplitName::Test;
  return std::nullopt;
}

Corpus load_corpus(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw DataError("corpus path does not exist: " + path.string());

  std::vector<std::pair<SplitName, fs::path>> files;
  if (fs::is_directory(path)) {
    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".json") entries.push_back(e.path());
    std::sort(entries.begin(), entries.end());
    for (const auto& p : entries)
      if (auto s = split_for_filename(p)) files.emplace_back(*s, p);
    if (files.empty()) throw DataError("no train/dev/test JSON files found in " + path.string());
  } else {
    files.emplace_back(split_for_filename(path).value_or(SplitName::Train), path);
  }

  Corpus corpus;
  for (const auto& [name, file] : files) {
    if (corpus.count(name))
      throw DataError("split '" + std::string(split_name(name)) + "' provided twice (" + file.string() + ")");
    DatasetSplit split;
    split.name = name;
    split.dialogues = read_dialogue_file(file, split_name(name));
    corpus.emplace(name, std::move(split));
  }
  return corpus;
}

nlohmann::json serialize_split(const DatasetSplit& split) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& d : split.dialogues) {
    nlohmann::json turns = nlohmann::json::array();
    for (const auto& u : d.utterances) {
      nlohmann::json rec = {{"speaker", u.speaker}, {"utterance", u.raw_text}};
      if (u.labeled) rec["emotion"] = std::string(label_name(u.gold));
      turns.push_back(std::move(rec));
    }
    doc.push_back(std::move(turns));
  }
  return doc;
}

}  // namespace cad::corpus
