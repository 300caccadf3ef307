// Copyright (c) 2026 mvsv authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// mvsv: synthetic audio-visual speaker-verification pipeline.
//   gen-data  generate a seeded synthetic dataset (and optional trial list)
//   train     train one topology and write a checkpoint + CSV log
//   eval      score trials with one or more checkpoints, fuse, report EER
//   verify    score a single enrol/test pair against a threshold
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 capability error,
// 5 numerical abort, 1 anything else.

#include <iostream>

#include "CLI11.hpp"
#include "mvsv/runner.h"

namespace {

// Options shared by every subcommand.
void add_common(CLI::App* cmd, std::string* config_path, std::vector<std::string>* overrides,
                int* threads) {
  cmd->add_option("--config", *config_path, "Run configuration file (section.key = value lines)");
  cmd->add_option("--set", *overrides, "Override a config key, e.g. --set train.lr=0.01")
      ->take_all();
  cmd->add_option("--threads", *threads, "Worker threads (outputs are identical for any value)");
}

int run(int argc, char** argv) {
  CLI::App app{"Audio-visual speaker verification on synthetic paired data"};
  app.require_subcommand(1);

  mvsv::GenDataArgs gen;
  CLI::App* cmd_gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  add_common(cmd_gen, &gen.config_path, &gen.overrides, &gen.threads);
  cmd_gen->add_option("--out", gen.out, "Dataset output path (default: paths.dataset)");
  cmd_gen->add_option("--trials", gen.trials_out, "Also write a trial list covering all conditions");

  mvsv::TrainArgs train;
  CLI::App* cmd_train = app.add_subcommand("train", "Train a topology");
  add_common(cmd_train, &train.config_path, &train.overrides, &train.threads);
  cmd_train->add_option("--data", train.data, "Dataset path (default: paths.dataset)");
  cmd_train->add_option("--topology", train.topology,
                        "unimodal-a | unimodal-v | midfusion | multiview");
  cmd_train->add_option("--out", train.out, "Checkpoint output path")->required();
  cmd_train->add_option("--resume", train.resume, "Continue training from this checkpoint");
  cmd_train->add_option("--log", train.log, "CSV loss log path (default: <out>.log)");

  mvsv::EvalArgs eval;
  CLI::App* cmd_eval = app.add_subcommand("eval", "Score trials and report EER");
  add_common(cmd_eval, &eval.config_path, &eval.overrides, &eval.threads);
  cmd_eval->add_option("--data", eval.data, "Dataset path (default: paths.dataset)");
  cmd_eval->add_option("--checkpoints", eval.checkpoints, "Systems as tag=path pairs")
      ->required()
      ->take_all();
  cmd_eval->add_option("--trials", eval.trials, "Trial file (default: sample from the dataset)");
  cmd_eval->add_option("--conditions", eval.conditions,
                       "Conditions to score (AA VV AVAV AV_X A_AV V_AV)")
      ->take_all();
  cmd_eval->add_option("--fuse", eval.fuse, "Fusion recipes, e.g. a+v or a+v+av or mv.AA+mv.VV")
      ->take_all();
  cmd_eval->add_option("--scores-dir", eval.scores_dir, "Score file directory (default: paths.scores_dir)");
  cmd_eval->add_option("--report", eval.report, "Report basename (default: paths.report)");

  mvsv::VerifyArgs verify;
  CLI::App* cmd_verify = app.add_subcommand("verify", "Score one enrol/test pair");
  cmd_verify->add_option("--checkpoint", verify.checkpoint, "Trained checkpoint")->required();
  cmd_verify->add_option("--data", verify.data, "Dataset holding the samples")->required();
  cmd_verify->add_option("--enrol", verify.enrol_id, "Enrol utterance id")->required();
  cmd_verify->add_option("--test", verify.test_id, "Test utterance id")->required();
  cmd_verify->add_option("--condition", verify.condition, "Trial condition (default AA)");
  cmd_verify->add_option("--threshold", verify.threshold, "Accept threshold (default 0.5)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // flag misuse is a config error
  }

  if (cmd_gen->parsed()) mvsv::cmd_gen_data(gen, std::cout);
  if (cmd_train->parsed()) mvsv::cmd_train(train, std::cout);
  if (cmd_eval->parsed()) mvsv::cmd_eval(eval, std::cout);
  if (cmd_verify->parsed()) mvsv::cmd_verify(verify, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const mvsv::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const mvsv::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const mvsv::CapabilityError& e) {
    std::cerr << "capability error: " << e.what() << "\n";
    return 4;
  } catch (const mvsv::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
