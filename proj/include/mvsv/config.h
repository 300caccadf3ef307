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
// Run configuration: a flat, strict `section.key = value` text format with
// documented defaults for every key. Unknown keys and duplicate keys are
// errors, never silently ignored. The full key set (with final values) can
// be re-emitted as text; checkpoints embed that echo so a model can be
// rebuilt from the checkpoint alone.

#ifndef MVSV_CONFIG_H_
#define MVSV_CONFIG_H_

#include <set>
#include <string>
#include <vector>

#include "mvsv/data.h"
#include "mvsv/model.h"
#include "mvsv/trainer.h"

namespace mvsv {

struct RunConfig {
  // [run] global seed and worker count. Unset per-stage seeds derive from
  // run.seed on finalize, so one number reproduces the whole pipeline.
  uint64_t seed = 7;
  int threads = 1;

  // [synth] synthetic-data generator; synth.seed defaults to run.seed.
  SynthConfig synth;

  // [audio]/[video] encoder stacks; input geometry follows [synth].
  std::vector<int> audio_channels = {8, 16, 32};
  std::vector<int> audio_kernels = {3, 3, 3};
  std::vector<int> audio_strides = {2, 2, 2};
  int audio_encoding_dim = 64;
  int audio_attn_dim = 32;
  std::vector<int> video_channels = {8, 16};
  std::vector<int> video_kernels = {3, 3};
  std::vector<int> video_strides = {2, 2};
  int video_encoding_dim = 128;

  // [model] head/topology knobs shared by all four topologies.
  int proj_dim = 64;        // multiview shared-space width
  int hidden_dim = 128;
  double dropout = 0.2;
  bool batchnorm = true;    // auto-disabled for multiview unless forced
  double arc_scale = 30.0;
  double arc_margin = 0.2;
  int num_classes = 0;      // 0: taken from the dataset at training time
  uint64_t model_seed = 0;  // 0 here means "derive"; resolved in finalize()

  // [train]
  TrainConfig train;

  // [trials]
  uint64_t trials_seed = 0;

  // [eval] empty conditions = every condition some system supports.
  std::vector<Cond> conditions;
  std::vector<std::string> fusions;  // recipes like "a+v" or "mv.AA+mv.VV"

  // [paths] command-line flags override these.
  std::string dataset_path = "data/synth.mvsv";
  std::string scores_dir = "scores";
  std::string report_path = "report";

  // Keys that appeared explicitly (file or --set); drives seed derivation
  // and the multiview batchnorm conflict check.
  std::set<std::string> explicit_keys;
  bool was_set(const std::string& key) const { return explicit_keys.count(key) != 0; }
};

// Applies `section.key = value` lines to cfg. Lines are trimmed; empty lines
// and '#' comments are skipped. Duplicate keys within one parse are errors.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source);

// Single "key = value" (or "key=value") override; later calls win.
void apply_config_override(RunConfig& cfg, const std::string& assignment);

RunConfig load_config(const std::string& path);

// Resolves derived seeds, propagates synth geometry into the encoders and
// validates every section. Idempotent.
void finalize_config(RunConfig& cfg);

// Full echo of every key with its final value; parsing it back yields an
// equivalent config with every key explicit.
std::string config_to_text(const RunConfig& cfg);

// Topology/encoder assembly honoring the multiview batchnorm rule: multiview
// drops batchnorm silently unless model.batchnorm was explicitly forced on,
// which is a configuration conflict.
EncoderConfig audio_encoder_from(const RunConfig& cfg);
EncoderConfig video_encoder_from(const RunConfig& cfg);
Topology topology_from_config(const RunConfig& cfg, TopologyKind kind, int num_classes);
Model model_from_config(const RunConfig& cfg, TopologyKind kind, int num_classes);

// TrainConfig with the resolved train seed and lambdas.
TrainConfig train_config_from(const RunConfig& cfg);

}  // namespace mvsv

#endif  // MVSV_CONFIG_H_
