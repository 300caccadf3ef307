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
// Command implementations behind the mvsv binary. Kept flag-parser-free so
// tests can drive full pipelines in-process and capture their output.

#ifndef MVSV_RUNNER_H_
#define MVSV_RUNNER_H_

#include <ostream>
#include <string>
#include <vector>

#include "mvsv/config.h"

namespace mvsv {

// Shared --config/--set/--threads handling; empty config_path = defaults.
RunConfig load_run_config(const std::string& config_path,
                          const std::vector<std::string>& overrides, int threads_flag = 0);

struct GenDataArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;        // 0: take run.threads from config
  std::string out;        // dataset path; empty: paths.dataset
  std::string trials_out; // when set, writes a 6-condition trial file
};
void cmd_gen_data(const GenDataArgs& args, std::ostream& out);

struct TrainArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;
  std::string data;      // dataset path; empty: paths.dataset
  std::string topology;  // unimodal-a | unimodal-v | midfusion | multiview
  std::string out;       // checkpoint path (required)
  std::string resume;    // checkpoint to continue from
  std::string log;       // CSV log path; empty: <out>.log
};
void cmd_train(const TrainArgs& args, std::ostream& out);

struct EvalArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  int threads = 0;
  std::string data;
  std::vector<std::string> checkpoints;  // tag=path
  std::string trials;                    // trial file; empty: sample from the dataset
  std::vector<std::string> conditions;   // empty: every condition some system supports
  std::vector<std::string> fuse;         // recipes tag[.COND]+tag[.COND]...
  std::string scores_dir;                // empty: paths.scores_dir
  std::string report;                    // empty: paths.report
};
void cmd_eval(const EvalArgs& args, std::ostream& out);

struct VerifyArgs {
  std::string checkpoint;
  std::string data;
  int enrol_id = -1;
  int test_id = -1;
  std::string condition = "AA";
  double threshold = 0.5;
};
void cmd_verify(const VerifyArgs& args, std::ostream& out);

// Rebuilds the model a checkpoint was trained as, from its config echo, and
// loads the weights. Used by eval/verify and exposed for tests.
Model model_from_checkpoint(const std::string& path);

}  // namespace mvsv

#endif  // MVSV_RUNNER_H_
