// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

#include "cad/errors.hpp"
#include "cad/eval.hpp"

namespace cad::cli {

/// 0 success, 2 config, 3 data, 4 numeric divergence, 5 version mismatch,
/// 1 for anything else.
int exit_code(ErrorKind kind);

/// Runs `body`, printing any cad::Error to `err` and mapping it to an exit
/// code. Other exceptions exit with 1.
int guarded(const std::function<void()>& body, std::ostream& err);

/// Trains from a config file. Writes checkpoint.json/.bin, train_log.jsonl,
/// validation_report.json/.txt and run_config.txt into output_dir. Throws
/// NumericError after saving the best parameters if training diverged.
void cmd_train(const std::filesystem::path& config, std::ostream& out);

struct EvaluateOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path corpus;
  std::string split = "test";
  std::filesystem::path output_dir;  // default: the checkpoint's directory
  std::filesystem::path features;    // default: the one recorded at training
  std::filesystem::path config;      // optional: must describe the same model
};
/// Writes <split>_report.json and <split>_report.txt and prints the text report.
void cmd_evaluate(const EvaluateOptions& opt, std::ostream& out);

struct PredictOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path input;
  std::filesystem::path output;    // empty: write to `out`
  std::filesystem::path features;  // empty: zero-filled feature channels
};
/// One JSON line per utterance, in input order.
void cmd_predict(const PredictOptions& opt, std::ostream& out);

/// Dialogue and utterance counts plus the label histogram per split.
void cmd_inspect(const std::filesystem::path& corpus, std::ostream& out);

/// Share of evaluated utterances predicted correctly.
double plain_accuracy(const eval::EvalReport& report);

/// 10561 -> "10,561".
std::string with_thousands(std::size_t n);

}  // namespace cad::cli
