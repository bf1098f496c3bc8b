// SPDX-License-Identifier: Apache-2.0
#include "cad/model.hpp"

#include <cmath>

#include "cad/errors.hpp"

namespace cad::model {

namespace nk = numkit;

void ModelConfig::validate() const {
  if (word_dim == 0 || hidden_dim == 0 || encoding_dim == 0 || num_classes == 0 || max_tokens == 0)
    throw ConfigError("model widths and max_tokens must be positive");
  if (num_classes != corpus::kNumLabels)
    throw ConfigError("num_classes must be " + std::to_string(corpus::kNumLabels));
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
}

namespace {

Tensor uniform_tensor(nk::Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = uniform(rng, -bound, bound);
  return t;
}

}  // namespace

GRUCellParams GRUCellParams::initialize(const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim,
                                        Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  GRUCellParams c;
  c.input_dim = input_dim;
  c.hidden_dim = hidden_dim;
  c.W_z = Parameter(prefix + ".W_z", uniform_tensor({hidden_dim, input_dim}, bound, rng));
  c.W_r = Parameter(prefix + ".W_r", uniform_tensor({hidden_dim, input_dim}, bound, rng));
  c.W_h = Parameter(prefix + ".W_h", uniform_tensor({hidden_dim, input_dim}, bound, rng));
  c.U_z = Parameter(prefix + ".U_z", uniform_tensor({hidden_dim, hidden_dim}, bound, rng));
  c.U_r = Parameter(prefix + ".U_r", uniform_tensor({hidden_dim, hidden_dim}, bound, rng));
  c.U_h = Parameter(prefix + ".U_h", uniform_tensor({hidden_dim, hidden_dim}, bound, rng));
  c.b_z = Parameter(prefix + ".b_z", Tensor({hidden_dim}));
  c.b_r = Parameter(prefix + ".b_r", Tensor({hidden_dim}));
  c.b_h = Parameter(prefix + ".b_h", Tensor({hidden_dim}));
  return c;
}

std::vector<Parameter*> GRUCellParams::parameters() {
  return {&W_z, &W_r, &W_h, &U_z, &U_r, &U_h, &b_z, &b_r, &b_h};
}

std::vector<const Parameter*> GRUCellParams::parameters() const {
  return {&W_z, &W_r, &W_h, &U_z, &U_r, &U_h, &b_z, &b_r, &b_h};
}

std::vector<Parameter*> ModelParams::parameters() {
  std::vector<Parameter*> out = {&embedding};
  for (GRUCellParams* cell : {&lower_fwd, &lower_bwd}) {
    auto p = cell->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  out.push_back(&proj_W);
  out.push_back(&proj_b);
  for (GRUCellParams* cell : {&upper_fwd, &upper_bwd}) {
    auto p = cell->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  out.push_back(&head_W);
  out.push_back(&head_b);
  return out;
}

std::vector<const Parameter*> ModelParams::parameters() const {
  auto mutable_view = const_cast<ModelParams*>(this)->parameters();
  return {mutable_view.begin(), mutable_view.end()};
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->value().size();
  return n;
}

std::size_t parameter_count(const ModelConfig& c, std::size_t vocab_size) {
  auto cell = [](std::size_t in, std::size_t h) { return 3 * (h * in + h * h + h); };
  return vocab_size * c.word_dim + 2 * cell(c.lower_input_dim(), c.hidden_dim) +
         c.encoding_dim * (2 * c.hidden_dim + 1) + 2 * cell(c.upper_input_dim(), c.hidden_dim) +
         c.num_classes * (2 * c.hidden_dim + 1);
}

ModelParams ModelParams::initialize(const ModelConfig& config, std::size_t vocab_size, Rng& rng,
                                    const Tensor* embedding) {
  config.validate();
  if (vocab_size < 2) throw ConfigError("vocabulary must contain at least <pad> and <unk>");
  ModelParams p;
  p.config = config;
  if (embedding) {
    if (embedding->shape() != nk::Shape{vocab_size, config.word_dim})
      throw DimensionError("embedding table " + nk::shape_str(embedding->shape()) + " does not match vocabulary " +
                           std::to_string(vocab_size) + " x " + std::to_string(config.word_dim));
    p.embedding = Parameter("embedding", *embedding);
  } else {
    Tensor table({vocab_size, config.word_dim});
    for (std::size_t r = 1; r < vocab_size; ++r)
      for (double& v : table.row(r)) v = uniform(rng, -0.05, 0.05);
    p.embedding = Parameter("embedding", std::move(table));
  }
  for (double& v : p.embedding.value().row(0)) v = 0.0;

  const std::size_t h = config.hidden_dim;
  p.lower_fwd = GRUCellParams::initialize("lower_fwd", config.lower_input_dim(), h, rng);
  p.lower_bwd = GRUCellParams::initialize("lower_bwd", config.lower_input_dim(), h, rng);
  const double proj_bound = 1.0 / std::sqrt(static_cast<double>(2 * h));
  p.proj_W = Parameter("proj_W", uniform_tensor({config.encoding_dim, 2 * h}, proj_bound, rng));
  p.proj_b = Parameter("proj_b", Tensor({config.encoding_dim}));
  p.upper_fwd = GRUCellParams::initialize("upper_fwd", config.upper_input_dim(), h, rng);
  p.upper_bwd = GRUCellParams::initialize("upper_bwd", config.upper_input_dim(), h, rng);
  p.head_W = Parameter("head_W", uniform_tensor({config.num_classes, 2 * h}, proj_bound, rng));
  p.head_b = Parameter("head_b", Tensor({config.num_classes}));
  return p;
}

BoundCell bind(nk::Graph& g, GRUCellParams& c) {
  return {g.param(c.W_z), g.param(c.W_r), g.param(c.W_h), g.param(c.U_z), g.param(c.U_r),
          g.param(c.U_h), g.param(c.b_z), g.param(c.b_r), g.param(c.b_h)};
}

BoundCell bind(nk::Graph& g, const GRUCellParams& c) {
  auto r = [&](const Parameter& p) { return g.reference(p.value()); };
  return {r(c.W_z), r(c.W_r), r(c.W_h), r(c.U_z), r(c.U_r), r(c.U_h), r(c.b_z), r(c.b_r), r(c.b_h)};
}

BoundModel bind(nk::Graph& g, ModelParams& p) {
  BoundModel m;
  m.graph = &g;
  m.config = &p.config;
  m.embedding = g.param(p.embedding);
  m.lower_fwd = bind(g, p.lower_fwd);
  m.lower_bwd = bind(g, p.lower_bwd);
  m.proj_W = g.param(p.proj_W);
  m.proj_b = g.param(p.proj_b);
  m.upper_fwd = bind(g, p.upper_fwd);
  m.upper_bwd = bind(g, p.upper_bwd);
  m.head_W = g.param(p.head_W);
  m.head_b = g.param(p.head_b);
  return m;
}

BoundModel bind(nk::Graph& g, const ModelParams& p) {
  BoundModel m;
  m.graph = &g;
  m.config = &p.config;
  m.embedding = g.reference(p.embedding.value());
  m.lower_fwd = bind(g, p.lower_fwd);
  m.lower_bwd = bind(g, p.lower_bwd);
  m.proj_W = g.reference(p.proj_W.value());
  m.proj_b = g.reference(p.proj_b.value());
  m.upper_fwd = bind(g, p.upper_fwd);
  m.upper_bwd = bind(g, p.upper_bwd);
  m.head_W = g.reference(p.head_W.value());
  m.head_b = g.reference(p.head_b.value());
  return m;
}

Var gru_step(const BoundCell& c, Var x, Var h_prev) {
  Var z = nk::sigmoid(nk::add(nk::affine(x, c.W_z, c.b_z), nk::matvec(c.U_z, h_prev)));
  Var r = nk::sigmoid(nk::add(nk::affine(x, c.W_r, c.b_r), nk::matvec(c.U_r, h_prev)));
  Var candidate = nk::tanh(nk::add(nk::affine(x, c.W_h, c.b_h), nk::matvec(c.U_h, nk::mul(r, h_prev))));
  return nk::add(nk::mul(nk::one_minus(z), h_prev), nk::mul(z, candidate));
}

Var bigru(const BoundCell& fwd, const BoundCell& bwd, Var X, std::size_t valid_len) {
  if (X.value().rank() != 2) throw DimensionError("bigru: input must be a matrix, got " + nk::shape_str(X.shape()));
  const std::size_t T = X.value().rows();
  if (valid_len == 0) throw DimensionError("bigru: empty sequence (valid_len = 0)");
  if (valid_len > T) throw DimensionError("bigru: valid_len exceeds sequence length");
  const std::size_t h = fwd.U_z.value().rows();
  if (X.value().cols() != fwd.W_z.value().cols())
    throw DimensionError("bigru: input width " + std::to_string(X.value().cols()) + " but cell expects " +
                         std::to_string(fwd.W_z.value().cols()));
  nk::Graph& g = *X.graph();

  std::vector<Var> inputs;
  inputs.reserve(valid_len);
  for (std::size_t t = 0; t < valid_len; ++t) inputs.push_back(nk::row(X, t));

  std::vector<Var> forward_states(valid_len), backward_states(valid_len);
  Var state = g.constant(Tensor({h}));
  for (std::size_t t = 0; t < valid_len; ++t) forward_states[t] = state = gru_step(fwd, inputs[t], state);
  state = g.constant(Tensor({h}));
  for (std::size_t t = valid_len; t-- > 0;) backward_states[t] = state = gru_step(bwd, inputs[t], state);

  std::vector<Var> rows;
  rows.reserve(T);
  for (std::size_t t = 0; t < valid_len; ++t) {
    Var pair[] = {forward_states[t], backward_states[t]};
    rows.push_back(nk::concat(pair));
  }
  if (valid_len < T) {
    Var zero = g.constant(Tensor({2 * h}));
    rows.resize(T, zero);
  }
  return nk::stack_rows(rows);
}

Var encode_utterance(const BoundModel& m, Var fused, std::size_t valid_len, Mode mode, Rng& rng) {
  const ModelConfig& c = *m.config;
  if (fused.value().rank() != 2 || fused.value().cols() != c.lower_input_dim())
    throw DimensionError("utterance input " + nk::shape_str(fused.shape()) + " is not [T x " +
                         std::to_string(c.lower_input_dim()) + "]");
  Var x = nk::dropout(fused, c.dropout, mode, rng);
  Var states = bigru(m.lower_fwd, m.lower_bwd, x, valid_len);
  Var pooled = nk::maxpool_time(states, valid_len);
  return nk::tanh(nk::affine(pooled, m.proj_W, m.proj_b));
}

Var encode_dialogue(const BoundModel& m, std::span<const Var> utterance_inputs, Mode mode, Rng& rng) {
  const ModelConfig& c = *m.config;
  if (utterance_inputs.empty()) throw DimensionError("encode_dialogue: empty dialogue");
  std::vector<Var> inputs;
  inputs.reserve(utterance_inputs.size());
  for (const Var& u : utterance_inputs) {
    if (u.value().rank() != 1 || u.value().size() != c.upper_input_dim())
      throw DimensionError("dialogue input " + nk::shape_str(u.shape()) + " is not [" +
                           std::to_string(c.upper_input_dim()) + "]");
    inputs.push_back(nk::dropout(u, c.dropout, mode, rng));
  }
  const std::size_t N = inputs.size();
  Var states = bigru(m.upper_fwd, m.upper_bwd, nk::stack_rows(inputs), N);
  std::vector<Var> logits;
  logits.reserve(N);
  for (std::size_t i = 0; i < N; ++i) logits.push_back(nk::affine(nk::row(states, i), m.head_W, m.head_b));
  return nk::stack_rows(logits);
}

PreparedDialogue prepare(const corpus::Dialogue& d, const embed::Vocabulary& vocab, std::size_t max_tokens) {
  PreparedDialogue p;
  p.id = d.id;
  for (const auto& u : d.utterances) {
    p.utterances.push_back(embed::encode_utterance_tokens(u, d.id, vocab, max_tokens));
    p.gold.push_back(u.gold);
    p.labeled.push_back(u.labeled);
  }
  return p;
}

std::vector<PreparedDialogue> prepare(const corpus::DatasetSplit& split, const embed::Vocabulary& vocab,
                                      std::size_t max_tokens) {
  std::vector<PreparedDialogue> out;
  out.reserve(split.dialogues.size());
  for (const auto& d : split.dialogues) out.push_back(prepare(d, vocab, max_tokens));
  return out;
}

DialogueForward forward(const BoundModel& m, const PreparedDialogue& d, const embed::FeatureStore& store, Mode mode,
                        Rng& rng) {
  const ModelConfig& c = *m.config;
  if (d.utterances.empty()) throw DimensionError("dialogue " + d.id + " has no utterances");
  if (store.word_dim() != c.context_dim || store.utterance_dim() != c.utterance_feature_dim)
    throw DimensionError("feature store widths (" + std::to_string(store.word_dim()) + ", " +
                         std::to_string(store.utterance_dim()) + ") do not match the model (" +
                         std::to_string(c.context_dim) + ", " + std::to_string(c.utterance_feature_dim) + ")");
  std::vector<Var> encodings, fused_utterances;
  for (const auto& u : d.utterances) {
    Var words = embed::fuse_word_inputs(*m.graph, m.embedding, u, store);
    Var enc = encode_utterance(m, words, u.valid_len, mode, rng);
    encodings.push_back(enc);
    fused_utterances.push_back(embed::fuse_utterance_inputs(enc, u.dialogue_id, u.index, store));
  }
  DialogueForward out;
  out.encodings = nk::stack_rows(encodings);
  out.logits = encode_dialogue(m, fused_utterances, mode, rng);
  return out;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

std::vector<Prediction> predict(const ModelParams& params, const PreparedDialogue& d,
                                const embed::FeatureStore& store) {
  nk::Graph g;
  BoundModel m = bind(g, params);
  Rng unused(0);
  DialogueForward f = forward(m, d, store, Mode::Infer, unused);
  const Tensor& logits = f.logits.value();
  std::vector<Prediction> out;
  out.reserve(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    Tensor probs = nk::softmax_value(logits.row(i));
    Prediction p;
    p.probabilities.assign(probs.data().begin(), probs.data().end());
    p.label = corpus::label_from_code(argmax(p.probabilities));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace cad::model
