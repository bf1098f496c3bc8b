// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "CLI11.hpp"
#include "cad/commands.hpp"

int main(int argc, char** argv) {
  using namespace cad::cli;
  CLI::App app{"Hierarchical biGRU emotion classifier for dialogues"};
  app.require_subcommand(1);

  std::string config;
  auto* train = app.add_subcommand("train", "Train a model from a key=value config file");
  train->add_option("--config", config, "Run configuration")->required();

  EvaluateOptions eval_opt;
  std::string split = "test";
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on one corpus split");
  evaluate->add_option("--checkpoint", eval_opt.checkpoint, "checkpoint.json written by train")->required();
  evaluate->add_option("--corpus", eval_opt.corpus, "Corpus directory or file")->required();
  evaluate->add_option("--split", split, "train, validation or test")->check(
      CLI::IsMember({"train", "validation", "dev", "test"}));
  evaluate->add_option("--output", eval_opt.output_dir, "Directory for the report files");
  evaluate->add_option("--features", eval_opt.features, "Feature store overriding the one used in training");
  evaluate->add_option("--config", eval_opt.config, "Config that must describe the checkpoint's model");

  PredictOptions predict_opt;
  auto* predict = app.add_subcommand("predict", "Label every utterance of a dialogue file");
  predict->add_option("--checkpoint", predict_opt.checkpoint, "checkpoint.json written by train")->required();
  predict->add_option("--input", predict_opt.input, "Dialogue JSON file")->required();
  predict->add_option("--output", predict_opt.output, "JSON-lines output file (default: stdout)");
  predict->add_option("--features", predict_opt.features, "Feature store for the input dialogues");

  std::string corpus;
  auto* inspect = app.add_subcommand("inspect", "Split sizes and label counts of a corpus");
  inspect->add_option("--corpus", corpus, "Corpus directory or file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  return guarded(
      [&] {
        if (*train) {
          cmd_train(config, std::cout);
        } else if (*evaluate) {
          eval_opt.split = split;
          cmd_evaluate(eval_opt, std::cout);
        } else if (*predict) {
          cmd_predict(predict_opt, std::cout);
        } else if (*inspect) {
          cmd_inspect(corpus, std::cout);
        }
      },
      std::cerr);
}
