// SPDX-License-Identifier: Apache-2.0
#include "cad/embed.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "cad/errors.hpp"
#include "cad/log.hpp"
#include "cad/numkit/ops.hpp"
#include "json.hpp"

namespace cad::embed {

using numkit::Tensor;
using numkit::Var;

Vocabulary::Vocabulary() {
  add(std::string(corpus::kPadToken));
  add(std::string(corpus::kUnkToken));
}

void Vocabulary::add(std::string token) {
  auto [it, inserted] = index_.emplace(token, tokens_.size());
  if (!inserted) throw DataError("duplicate vocabulary token '" + token + "'");
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[kPad] != corpus::kPadToken || tokens[kUnk] != corpus::kUnkToken)
    throw DataError("vocabulary must start with <pad>, <unk>");
  Vocabulary v;
  for (std::size_t i = 2; i < tokens.size(); ++i) v.add(std::move(tokens[i]));
  return v;
}

std::size_t Vocabulary::index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

Vocabulary build_vocab(const corpus::DatasetSplit& train) {
  if (train.dialogues.empty()) throw ConfigError("cannot build a vocabulary from an empty train split");
  std::set<std::string> distinct;
  for (const auto& d : train.dialogues)
    for (const auto& u : d.utterances)
      for (const auto& t : u.tokens) distinct.insert(t);
  std::vector<std::string> tokens = {std::string(corpus::kPadToken), std::string(corpus::kUnkToken)};
  for (const auto& t : distinct)
    if (t != corpus::kPadToken && t != corpus::kUnkToken) tokens.push_back(t);
  return Vocabulary::from_tokens(std::move(tokens));
}

WordEmbeddingTable random_word_vectors(const Vocabulary& vocab, std::size_t dim, Rng& rng) {
  if (dim == 0) throw ConfigError("word embedding dimension must be positive");
  WordEmbeddingTable table;
  table.matrix = Tensor({vocab.size(), dim});
  for (std::size_t r = 1; r < vocab.size(); ++r)
    for (double& v : table.matrix.row(r)) v = uniform(rng, -0.05, 0.05);
  return table;
}

WordEmbeddingTable load_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t dim,
                                     Rng& rng) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open word-vector file " + path.string());
  WordEmbeddingTable table = random_word_vectors(vocab, dim, rng);
  std::vector<bool> seen(vocab.size(), false);

  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    values.clear();
    std::string field;
    bool numeric = true;
    while (fields >> field) {
      double v = 0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || ptr != field.data() + field.size()) {
        numeric = false;
        break;
      }
      values.push_back(v);
    }
    if (line_no == 1 && numeric && values.size() == 1 &&
        token.find_first_not_of("0123456789") == std::string::npos)
      continue;  // "<count> <dim>" header
    if (!numeric)
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": non-numeric value '" + field + "'");
    if (values.size() != dim)
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                      " values for '" + token + "', got " + std::to_string(values.size()));
    std::size_t idx = vocab.index(token);
    if (idx == Vocabulary::kUnk && token != corpus::kUnkToken) continue;
    if (idx == Vocabulary::kPad || seen[idx]) continue;
    seen[idx] = true;
    std::copy(values.begin(), values.end(), table.matrix.row(idx).begin());
    if (idx >= 2) ++table.covered;
  }
  const std::size_t regular = vocab.size() - 2;
  table.coverage = regular ? static_cast<double>(table.covered) / static_cast<double>(regular) : 0.0;
  return table;
}

FeatureStore::FeatureStore(std::size_t word_dim, std::size_t utterance_dim)
    : word_dim_(word_dim), utterance_dim_(utterance_dim) {}

FeatureStore::FeatureStore(const FeatureStore& other)
    : word_dim_(other.word_dim_),
      utterance_dim_(other.utterance_dim_),
      words_(other.words_),
      utterances_(other.utterances_) {}

void FeatureStore::add_word(const std::string& dialogue, std::size_t utterance, std::size_t token,
                            std::vector<double> v) {
  if (v.size() != word_dim_)
    throw DimensionError("word feature for " + dialogue + "/" + std::to_string(utterance) + "/" +
                         std::to_string(token) + " has " + std::to_string(v.size()) + " values, expected " +
                         std::to_string(word_dim_));
  words_[{dialogue, utterance, token}] = std::move(v);
}

void FeatureStore::add_utterance(const std::string& dialogue, std::size_t utterance, std::vector<double> v) {
  if (v.size() != utterance_dim_)
    throw DimensionError("utterance feature for " + dialogue + "/" + std::to_string(utterance) + " has " +
                         std::to_string(v.size()) + " values, expected " + std::to_string(utterance_dim_));
  utterances_[{dialogue, utterance}] = std::move(v);
}

const std::vector<double>* FeatureStore::word(const std::string& dialogue, std::size_t utterance,
                                              std::size_t token) const {
  auto it = words_.find({dialogue, utterance, token});
  return it == words_.end() ? nullptr : &it->second;
}

const std::vector<double>* FeatureStore::utterance(const std::string& dialogue, std::size_t utterance) const {
  auto it = utterances_.find({dialogue, utterance});
  return it == utterances_.end() ? nullptr : &it->second;
}

void FeatureStore::note_degraded(std::string_view channel) const {
  auto& flag = channel == "word" ? warned_word_ : warned_utterance_;
  if (!flag.exchange(true))
    log::warn("degraded mode: no " + std::string(channel) + "-level features loaded, channel is zero-filled");
}

void FeatureStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature store " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
      std::string dialogue = rec.at("dialogue").is_string() ? rec.at("dialogue").get<std::string>()
                                                            : rec.at("dialogue").dump();
      auto utt = rec.at("utterance").get<std::size_t>();
      auto kind = rec.at("kind").get<std::string>();
      auto vec = rec.at("vector").get<std::vector<double>>();
      if (kind == "word") {
        add_word(dialogue, utt, rec.at("token").get<std::size_t>(), std::move(vec));
      } else if (kind == "utterance") {
        add_utterance(dialogue, utt, std::move(vec));
      } else {
        throw DataError(where + ": unknown feature kind '" + kind + "'");
      }
    } catch (const DimensionError& e) {
      throw DimensionError(where + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": malformed feature record: " + e.what());
    }
  }
}

EncodedUtterance encode_utterance_tokens(const corpus::Utterance& u, const std::string& dialogue_id,
                                         const Vocabulary& vocab, std::size_t max_tokens) {
  auto padded = corpus::pad_or_truncate(u.tokens, max_tokens);
  EncodedUtterance e;
  e.dialogue_id = dialogue_id;
  e.index = u.index_in_dialogue;
  e.valid_len = padded.valid_len;
  e.token_ids.resize(max_tokens, Vocabulary::kPad);
  for (std::size_t t = 0; t < padded.valid_len; ++t) e.token_ids[t] = vocab.index(padded.tokens[t]);
  return e;
}

Var fuse_word_inputs(numkit::Graph& g, Var table, const EncodedUtterance& utt, const FeatureStore& store) {
  Var words = numkit::gather_rows(table, utt.token_ids);
  const std::size_t cd = store.word_dim();
  if (cd == 0) return words;
  if (store.word_count() == 0) store.note_degraded("word");
  const std::size_t T = utt.token_ids.size();
  Tensor ctx({T, cd});
  for (std::size_t t = 0; t < std::min(utt.valid_len, T); ++t) {
    if (utt.token_ids[t] == Vocabulary::kPad) continue;
    if (const auto* v = store.word(utt.dialogue_id, utt.index, t)) std::copy(v->begin(), v->end(), ctx.row(t).begin());
  }
  return numkit::concat_cols(words, g.constant(std::move(ctx)));
}

Tensor fuse_utterance_values(const Tensor& encoding, std::span<const double> feature, std::size_t feature_dim) {
  if (encoding.rank() != 1) throw DimensionError("utterance encoding must be a vector, got " + numkit::shape_str(encoding.shape()));
  if (!feature.empty() && feature.size() != feature_dim)
    throw DimensionError("utterance feature has " + std::to_string(feature.size()) + " values, expected " +
                         std::to_string(feature_dim));
  std::vector<double> out(encoding.data().begin(), encoding.data().end());
  out.resize(encoding.size() + feature_dim, 0.0);
  std::copy(feature.begin(), feature.end(), out.begin() + static_cast<std::ptrdiff_t>(encoding.size()));
  const std::size_t n = out.size();
  return Tensor({n}, std::move(out));
}

Var fuse_utterance_inputs(Var encoding, const std::string& dialogue_id, std::size_t utterance,
                          const FeatureStore& store) {
  const std::size_t ud = store.utterance_dim();
  if (ud == 0) return encoding;
  if (store.utterance_count() == 0) store.note_degraded("utterance");
  Tensor feature({ud});
  if (const auto* v = store.utterance(dialogue_id, utterance)) std::copy(v->begin(), v->end(), feature.data().begin());
  Var parts[] = {encoding, encoding.graph()->constant(std::move(feature))};
  return numkit::concat(parts);
}

}  // namespace cad::embed
