// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "cad/corpus.hpp"
#include "cad/numkit/graph.hpp"
#include "cad/numkit/tensor.hpp"
#include "cad/rng.hpp"

namespace cad::embed {

/// Token to row index. Index 0 is `<pad>`, index 1 is `<unk>`.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;

  Vocabulary();
  /// Rebuilds a vocabulary from its token list (index order), e.g. from a
  /// checkpoint. Throws DataError if the reserved entries are wrong or a
  /// token repeats.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  /// kUnk for tokens not in the vocabulary.
  std::size_t index(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t i) const { return tokens_.at(i); }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Vocabulary over the train split's tokens, inserted in sorted order so
/// indices do not depend on corpus order. Throws ConfigError on an empty split.
Vocabulary build_vocab(const corpus::DatasetSplit& train);

struct WordEmbeddingTable {
  numkit::Tensor matrix;      // V x dim, row 0 all zeros
  std::size_t covered = 0;    // non-reserved tokens found in the file
  double coverage = 0.0;      // covered / (V - 2)
};

/// Random table: every non-pad row uniform(-0.05, 0.05).
WordEmbeddingTable random_word_vectors(const Vocabulary& vocab, std::size_t dim, Rng& rng);

/// Reads "token v1 ... v_dim" lines. Rows for tokens in the file take the file
/// values; the rest keep their random initialization. A leading
/// "<count> <dim>" header line is skipped. Throws DataError naming the line
/// when a row has the wrong number of values.
WordEmbeddingTable load_word_vectors(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t dim,
                                     Rng& rng);

/// Precomputed contextual features: per word (keyed by dialogue id,
/// utterance index, token index) and per utterance.
class FeatureStore {
 public:
  FeatureStore(std::size_t word_dim = 1024, std::size_t utterance_dim = 2304);
  FeatureStore(const FeatureStore& other);
  FeatureStore& operator=(const FeatureStore&) = delete;

  /// Loads JSON-lines records
  /// {"dialogue", "utterance", "kind": "word"|"utterance", "token", "vector"}.
  /// Throws DimensionError (with file and line) on a wrong vector length and
  /// DataError on malformed lines.
  void load(const std::filesystem::path& path);

  void add_word(const std::string& dialogue, std::size_t utterance, std::size_t token, std::vector<double> v);
  void add_utterance(const std::string& dialogue, std::size_t utterance, std::vector<double> v);

  const std::vector<double>* word(const std::string& dialogue, std::size_t utterance, std::size_t token) const;
  const std::vector<double>* utterance(const std::string& dialogue, std::size_t utterance) const;

  std::size_t word_dim() const noexcept { return word_dim_; }
  std::size_t utterance_dim() const noexcept { return utterance_dim_; }
  std::size_t word_count() const noexcept { return words_.size(); }
  std::size_t utterance_count() const noexcept { return utterances_.size(); }

  /// Logs once per store that a channel is zero-filled.
  void note_degraded(std::string_view channel) const;

 private:
  using WordKey = std::tuple<std::string, std::size_t, std::size_t>;
  using UttKey = std::pair<std::string, std::size_t>;

  std::size_t word_dim_;
  std::size_t utterance_dim_;
  std::map<WordKey, std::vector<double>> words_;
  std::map<UttKey, std::vector<double>> utterances_;
  mutable std::atomic<bool> warned_word_{false};
  mutable std::atomic<bool> warned_utterance_{false};
};

/// An utterance mapped to vocabulary rows and padded to a fixed length.
struct EncodedUtterance {
  std::string dialogue_id;
  std::size_t index = 0;
  std::vector<std::size_t> token_ids;  // length max_tokens, pad id beyond valid_len
  std::size_t valid_len = 0;
};

EncodedUtterance encode_utterance_tokens(const corpus::Utterance& u, const std::string& dialogue_id,
                                         const Vocabulary& vocab, std::size_t max_tokens);

/// Rows t = [embedding(token_t) | contextual(token_t)], shape
/// [max_tokens x (table dim + store word dim)]. Padded rows are zero
/// whenever their ids are the pad id. A missing contextual vector is zeros.
numkit::Var fuse_word_inputs(numkit::Graph& g, numkit::Var table, const EncodedUtterance& utt,
                             const FeatureStore& store);

/// [encoding | utterance feature], zeros for a missing feature.
numkit::Var fuse_utterance_inputs(numkit::Var encoding, const std::string& dialogue_id, std::size_t utterance,
                                  const FeatureStore& store);

/// Value-only form of the utterance fusion.
numkit::Tensor fuse_utterance_values(const numkit::Tensor& encoding, std::span<const double> feature,
                                     std::size_t feature_dim);

}  // namespace cad::embed
