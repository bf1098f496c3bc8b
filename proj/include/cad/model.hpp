// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cad/corpus.hpp"
#include "cad/embed.hpp"
#include "cad/numkit/graph.hpp"
#include "cad/numkit/ops.hpp"
#include "cad/rng.hpp"

namespace cad::model {

using numkit::Mode;
using numkit::Parameter;
using numkit::Tensor;
using numkit::Var;

/// Layer widths. Defaults are the full-size configuration; tests and the
/// synthetic fixtures shrink them.
struct ModelConfig {
  std::size_t word_dim = 300;
  std::size_t context_dim = 1024;            // per-word contextual features
  std::size_t utterance_feature_dim = 2304;  // per-utterance features
  std::size_t hidden_dim = 300;              // per GRU direction, both levels
  std::size_t encoding_dim = 300;            // projected utterance encoding
  std::size_t num_classes = corpus::kNumLabels;
  std::size_t max_tokens = 50;
  double dropout = 0.5;

  std::size_t lower_input_dim() const { return word_dim + context_dim; }
  std::size_t upper_input_dim() const { return encoding_dim + utterance_feature_dim; }
  /// Throws ConfigError on zero widths or a dropout outside [0, 1).
  void validate() const;
};

/// z = sigmoid(W_z x + U_z h + b_z)
/// r = sigmoid(W_r x + U_r h + b_r)
/// c = tanh(W_h x + U_h (r * h) + b_h)
/// h' = (1 - z) * h + z * c
struct GRUCellParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Parameter W_z, W_r, W_h;
  Parameter U_z, U_r, U_h;
  Parameter b_z, b_r, b_h;

  /// Matrices uniform(-1/sqrt(hidden), 1/sqrt(hidden)), biases zero.
  static GRUCellParams initialize(const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim, Rng& rng);
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
};

struct ModelParams {
  ModelConfig config;
  Parameter embedding;  // V x word_dim, row 0 (pad) stays zero
  GRUCellParams lower_fwd, lower_bwd;
  Parameter proj_W, proj_b;  // encoding_dim x 2*hidden
  GRUCellParams upper_fwd, upper_bwd;
  Parameter head_W, head_b;  // num_classes x 2*hidden

  /// All weights, in a fixed order used for checkpoints and the optimizer.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;

  /// Fresh weights. The embedding table is taken as given when supplied
  /// (it must be V x word_dim), otherwise drawn uniform(-0.05, 0.05).
  static ModelParams initialize(const ModelConfig& config, std::size_t vocab_size, Rng& rng,
                                const Tensor* embedding = nullptr);
};

/// Closed-form parameter count for a configuration and vocabulary size.
std::size_t parameter_count(const ModelConfig& config, std::size_t vocab_size);

/// GRU weights bound into one graph.
struct BoundCell {
  Var W_z, W_r, W_h, U_z, U_r, U_h, b_z, b_r, b_h;
};
BoundCell bind(numkit::Graph& g, GRUCellParams& cell);
/// Read-only binding: no gradients, params untouched.
BoundCell bind(numkit::Graph& g, const GRUCellParams& cell);

struct BoundModel {
  numkit::Graph* graph = nullptr;
  const ModelConfig* config = nullptr;
  Var embedding;
  BoundCell lower_fwd, lower_bwd, upper_fwd, upper_bwd;
  Var proj_W, proj_b, head_W, head_b;
};
BoundModel bind(numkit::Graph& g, ModelParams& params);
BoundModel bind(numkit::Graph& g, const ModelParams& params);

Var gru_step(const BoundCell& cell, Var x, Var h_prev);

/// Bidirectional GRU over rows [0, valid_len) of X[T x d_in], both
/// directions from a zero state. Row t is [h_fwd_t | h_bwd_t]; rows at and
/// beyond valid_len are zero and X's rows there are never read.
Var bigru(const BoundCell& fwd, const BoundCell& bwd, Var X, std::size_t valid_len);

/// Dropout on the fused rows (train mode), biGRU, max-pool over the valid
/// rows, then tanh(proj_W pool + proj_b). Returns [encoding_dim].
Var encode_utterance(const BoundModel& m, Var fused, std::size_t valid_len, Mode mode, Rng& rng);

/// Dropout on each fused utterance vector (train mode), biGRU over the whole
/// dialogue, then the linear head per position. Returns logits [N x classes].
Var encode_dialogue(const BoundModel& m, std::span<const Var> utterance_inputs, Mode mode, Rng& rng);

/// A dialogue mapped onto vocabulary rows, ready for repeated forward passes.
struct PreparedDialogue {
  std::string id;
  std::vector<embed::EncodedUtterance> utterances;
  std::vector<corpus::EmotionLabel> gold;
  std::vector<bool> labeled;
};

PreparedDialogue prepare(const corpus::Dialogue& d, const embed::Vocabulary& vocab, std::size_t max_tokens);
std::vector<PreparedDialogue> prepare(const corpus::DatasetSplit& split, const embed::Vocabulary& vocab,
                                      std::size_t max_tokens);

struct DialogueForward {
  Var encodings;  // N x encoding_dim
  Var logits;     // N x num_classes
};

/// Full hierarchical forward pass over one dialogue.
DialogueForward forward(const BoundModel& m, const PreparedDialogue& d, const embed::FeatureStore& store, Mode mode,
                        Rng& rng);

struct Prediction {
  corpus::EmotionLabel label = corpus::EmotionLabel::Neutral;
  std::vector<double> probabilities;
};

/// Inference-mode labels and class distributions, one per utterance.
/// Ties in the argmax go to the lowest label code.
std::vector<Prediction> predict(const ModelParams& params, const PreparedDialogue& d, const embed::FeatureStore& store);

/// Index of the largest probability, lowest index on ties.
std::size_t argmax(std::span<const double> v);

}  // namespace cad::model
