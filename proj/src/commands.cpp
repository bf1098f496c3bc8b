// SPDX-License-Identifier: Apache-2.0
#include "cad/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "cad/checkpoint.hpp"
#include "cad/corpus.hpp"
#include "cad/embed.hpp"
#include "cad/log.hpp"
#include "cad/model.hpp"
#include "cad/run_config.hpp"
#include "cad/train.hpp"

namespace cad::cli {

namespace fs = std::filesystem;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Data:
    case ErrorKind::Dimension: return 3;
    case ErrorKind::Numeric: return 4;
    case ErrorKind::Version: return 5;
    case ErrorKind::Contract: return 1;
  }
  return 1;
}

int guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return 0;
  } catch (const Error& e) {
    err << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

std::string with_thousands(std::size_t n) {
  std::string digits = std::to_string(n), out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

double plain_accuracy(const eval::EvalReport& r) {
  if (r.evaluated == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t c = 0; c < corpus::kNumLabels; ++c)
    if (r.active[c]) correct += r.confusion.counts()[c][c];
  return static_cast<double>(correct) / static_cast<double>(r.evaluated);
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void write_report(const fs::path& dir, const std::string& stem, const eval::EvalReport& report) {
  write_text(dir / (stem + ".json"), eval::to_json(report).dump(2) + "\n");
  write_text(dir / (stem + ".txt"), eval::render_text(report));
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

embed::FeatureStore load_store(const model::ModelConfig& cfg, const fs::path& features) {
  embed::FeatureStore store(cfg.context_dim, cfg.utterance_feature_dim);
  if (!features.empty()) {
    if (!fs::exists(features)) throw ConfigError("features not found: " + features.string());
    store.load(features);
  }
  return store;
}

const corpus::DatasetSplit& require_split(const corpus::Corpus& c, corpus::SplitName name, const fs::path& path) {
  auto it = c.find(name);
  if (it == c.end() || it->second.dialogues.empty())
    throw DataError(path.string() + ": no " + std::string(corpus::split_name(name)) + " split");
  return it->second;
}

std::string json_string_field(const nlohmann::ordered_json& j, const char* key) {
  auto it = j.find(key);
  return (it != j.end() && it->is_string()) ? it->get<std::string>() : std::string();
}

}  // namespace

void cmd_train(const fs::path& config_path, std::ostream& out) {
  RunConfig cfg = RunConfig::load(config_path);
  log::set_level(*log::parse_level(cfg.log_level));
  cfg.validate_paths();

  corpus::Corpus corpus = corpus::load_corpus(cfg.corpus);
  const auto& train_split = require_split(corpus, corpus::SplitName::Train, cfg.corpus);
  const auto& val_split = require_split(corpus, corpus::SplitName::Validation, cfg.corpus);

  embed::Vocabulary vocab = embed::build_vocab(train_split);
  Rng embed_rng(derive_seed(cfg.train.seed, "embedding"));
  embed::WordEmbeddingTable table =
      cfg.word_vectors.empty() ? embed::random_word_vectors(vocab, cfg.model.word_dim, embed_rng)
                               : embed::load_word_vectors(cfg.word_vectors, vocab, cfg.model.word_dim, embed_rng);
  if (!cfg.word_vectors.empty())
    log::info("word vectors cover " + std::to_string(table.covered) + " of " + std::to_string(vocab.size() - 2) +
              " tokens");
  embed::FeatureStore store = load_store(cfg.model, cfg.features);

  Rng init_rng(derive_seed(cfg.train.seed, "init"));
  model::ModelParams init = model::ModelParams::initialize(cfg.model, vocab.size(), init_rng, &table.matrix);
  auto train = model::prepare(train_split, vocab, cfg.model.max_tokens);
  auto val = model::prepare(val_split, vocab, cfg.model.max_tokens);
  train::ClassWeights weights = train::compute_class_weights(train::histogram(train), cfg.train.active_classes);

  fs::create_directories(cfg.output_dir);
  write_text(cfg.output_dir / "run_config.txt", cfg.canonical() + "# config_hash = " + cfg.hash() + "\n");
  std::ofstream log_file(cfg.output_dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
  if (!log_file) throw DataError("cannot write " + (cfg.output_dir / "train_log.jsonl").string());

  log::info("training on " + std::to_string(train.size()) + " dialogues, " + std::to_string(init.parameter_count()) +
            " parameters, config " + cfg.hash());
  train::TrainResult result =
      train::train_loop(std::move(init), train, val, store, cfg.train, weights, [&](const train::EpochRecord& r, const model::ModelParams&) {
        log_file << train::to_json_line(r) << '\n';
        log_file.flush();
        log::info("epoch " + std::to_string(r.epoch) + " loss " + std::to_string(r.loss) + " val WA " +
                  pct(r.val_wa) + " UWA " + pct(r.val_uwa));
      });

  model::save_checkpoint(cfg.output_dir / "checkpoint.json", result.best, vocab, cfg.to_json());
  if (result.diverged) throw NumericError(result.divergence + "; best parameters saved");

  eval::EvalReport val_report = eval::evaluate(result.best, val, store, cfg.train.active_classes);
  write_report(cfg.output_dir, "validation_report", val_report);
  eval::EvalReport train_report = eval::evaluate(result.best, train, store, cfg.train.active_classes);

  out << "epochs run: " << result.log.size();
  if (result.best_epoch) out << "  best epoch: " << *result.best_epoch;
  out << "\nvalidation WA " << pct(val_report.wa) << "  UWA " << pct(val_report.uwa) << '\n';
  out << "train accuracy: " << pct(plain_accuracy(train_report)) << '\n';
  out << "checkpoint: " << (cfg.output_dir / "checkpoint.json").string() << '\n';
}

void cmd_evaluate(const EvaluateOptions& opt, std::ostream& out) {
  model::Checkpoint ck = model::load_checkpoint(opt.checkpoint);
  if (!opt.config.empty()) {
    RunConfig cfg = RunConfig::load(opt.config);
    if (model::config_hash(cfg.model) != model::config_hash(ck.params.config))
      throw VersionError("checkpoint model config " + model::config_hash(ck.params.config) +
                         " does not match " + opt.config.string() + " (" + model::config_hash(cfg.model) + ")");
  }
  const corpus::SplitName split = corpus::parse_split(opt.split);
  if (!fs::exists(opt.corpus)) throw ConfigError("corpus not found: " + opt.corpus.string());
  corpus::Corpus corpus = corpus::load_corpus(opt.corpus);
  const auto& data = require_split(corpus, split, opt.corpus);

  fs::path features = opt.features.empty() ? fs::path(json_string_field(ck.run_config, "features")) : opt.features;
  embed::FeatureStore store = load_store(ck.params.config, features);
  std::string active_csv = json_string_field(ck.run_config, "active_classes");
  eval::ActiveSet active = active_csv.empty() ? eval::default_active_classes() : eval::parse_active_classes(active_csv);

  auto prepared = model::prepare(data, ck.vocab, ck.params.config.max_tokens);
  eval::EvalReport report = eval::evaluate(ck.params, prepared, store, active);
  fs::path dir = opt.output_dir.empty() ? opt.checkpoint.parent_path() : opt.output_dir;
  if (dir.empty()) dir = ".";
  fs::create_directories(dir);
  write_report(dir, std::string(corpus::split_name(split)) + "_report", report);
  out << eval::render_text(report);
}

void cmd_predict(const PredictOptions& opt, std::ostream& out) {
  model::Checkpoint ck = model::load_checkpoint(opt.checkpoint);
  if (!fs::exists(opt.input)) throw ConfigError("input not found: " + opt.input.string());
  std::vector<corpus::Dialogue> dialogues = corpus::read_dialogue_file(opt.input, "input", false);
  if (dialogues.empty()) throw DataError(opt.input.string() + ": no dialogues");
  embed::FeatureStore store = load_store(ck.params.config, opt.features);

  // Everything is rendered first so a failure leaves no partial output.
  std::string buffer;
  for (const auto& d : dialogues) {
    if (d.utterances.empty()) throw DataError(opt.input.string() + ": dialogue " + d.id + " has no utterances");
    auto prepared = model::prepare(d, ck.vocab, ck.params.config.max_tokens);
    auto predictions = model::predict(ck.params, prepared, store);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      const auto& u = d.utterances[i];
      nlohmann::ordered_json rec;
      rec["dialogue"] = d.id;
      rec["utterance"] = i;
      rec["speaker"] = u.speaker;
      rec["utterance_text"] = u.raw_text;
      rec["predicted"] = corpus::label_name(predictions[i].label);
      if (u.labeled) rec["gold"] = corpus::label_name(u.gold);
      nlohmann::ordered_json probs = nlohmann::ordered_json::object();
      for (std::size_t c = 0; c < corpus::kNumLabels; ++c)
        probs[std::string(corpus::label_name(corpus::label_from_code(c)))] = predictions[i].probabilities[c];
      rec["probabilities"] = std::move(probs);
      buffer += rec.dump() + "\n";
    }
  }
  if (opt.output.empty()) {
    out << buffer;
  } else {
    if (opt.output.has_parent_path()) fs::create_directories(opt.output.parent_path());
    write_text(opt.output, buffer);
  }
}

void cmd_inspect(const fs::path& path, std::ostream& out) {
  if (!fs::exists(path)) throw ConfigError("corpus not found: " + path.string());
  corpus::Corpus corpus = corpus::load_corpus(path);
  char cell[64];
  std::snprintf(cell, sizeof cell, "%-12s %-24s", "split", "dialogues (utterances)");
  out << cell;
  for (auto l : corpus::kAllLabels) {
    std::snprintf(cell, sizeof cell, "%9s", std::string(corpus::label_abbrev(l)).c_str());
    out << cell;
  }
  out << '\n';
  std::size_t total_d = 0, total_u = 0;
  corpus::LabelHistogram total_h{};
  auto row = [&](const std::string& name, std::size_t d, std::size_t u, const corpus::LabelHistogram& h) {
    std::snprintf(cell, sizeof cell, "%-12s %-24s", name.c_str(),
                  (with_thousands(d) + " (" + with_thousands(u) + ")").c_str());
    out << cell;
    for (std::size_t c = 0; c < corpus::kNumLabels; ++c) {
      std::snprintf(cell, sizeof cell, "%9s", with_thousands(h[c]).c_str());
      out << cell;
    }
    out << '\n';
  };
  for (const auto& [name, split] : corpus) {
    auto h = split.histogram();
    row(std::string(corpus::split_name(name)), split.dialogues.size(), split.utterance_count(), h);
    total_d += split.dialogues.size();
    total_u += split.utterance_count();
    for (std::size_t c = 0; c < corpus::kNumLabels; ++c) total_h[c] += h[c];
  }
  row("total", total_d, total_u, total_h);
}

}  // namespace cad::cli
