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
// Mini-batch SGD with plateau learning-rate decay, and the MVSC checkpoint
// format. Training is fully deterministic: per-epoch shuffle and dropout
// streams are derived from (seed, epoch), so resuming from a checkpoint at
// an epoch boundary replays the uninterrupted trajectory bit for bit.

#ifndef MVSV_TRAINER_H_
#define MVSV_TRAINER_H_

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "mvsv/data.h"
#include "mvsv/model.h"

namespace mvsv {

struct TrainConfig {
  double lr = 0.001;           // initial learning rate
  double momentum = 0.0;       // plain SGD by default
  double plateau_factor = 0.95;
  int plateau_patience = 2;    // epochs without improvement before decay
  double improve_eps = 1e-5;   // minimum val-loss improvement that counts
  int batch_size = 32;
  int max_epochs = 20;
  int t_crop = 100;            // audio frames per training sample
  double lambda_a = 1.0;       // multiview loss weights
  double lambda_v = 1.0;
  uint64_t seed = 0;

  void validate() const {
    if (lr <= 0.0) throw ConfigError("train.lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train.momentum must be in [0, 1)");
    if (plateau_factor <= 0.0 || plateau_factor >= 1.0)
      throw ConfigError("train.plateau_factor must be in (0, 1)");
    if (plateau_patience < 1) throw ConfigError("train.plateau_patience must be >= 1");
    if (improve_eps < 0.0) throw ConfigError("train.improve_eps must be nonnegative");
    if (batch_size < 2) throw ConfigError("train.batch_size must be >= 2");
    if (max_epochs < 0) throw ConfigError("train.max_epochs must be nonnegative");
    if (t_crop < 1) throw ConfigError("train.t_crop must be >= 1");
    if (lambda_a < 0.0 || lambda_v < 0.0) throw ConfigError("train lambdas must be nonnegative");
  }
};

// Mutable training position; serialized into checkpoints so a resumed run
// continues the same trajectory.
struct TrainState {
  int epoch = 0;  // completed epochs
  double lr = 0.0;  // 0 means "take cfg.lr"
  double best_val = std::numeric_limits<double>::infinity();
  int since_improve = 0;
  std::map<std::string, Tensor<float>> momentum_buf;  // empty unless momentum > 0
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;  // rate used during this epoch
};

struct TrainResult {
  TrainState state;
  std::vector<EpochLog> log;
};

// First t_crop rows of the audio, cycling from the start when the utterance
// is shorter than the crop.
Tensor<float> crop_audio(const Tensor<float>& audio, int t_crop);

// Loss of one batch under the model's current mode. Unimodal and midfusion
// use the single margin-logit set; multiview combines both with the lambdas.
Tensor<float> batch_loss(Model& model, const std::vector<AVSample>& batch,
                         const std::vector<int>& labels, const TrainConfig& cfg, Rng& rng,
                         Tape<float>* tape);

// Runs epochs state.epoch .. cfg.max_epochs-1. Validation loss is computed
// in infer mode after each epoch. When log_path is nonempty, a CSV log
// (epoch,train_loss,val_loss,lr) is created at epoch 0 and appended to on
// resume. Aborts with NumericalError on a non-finite loss.
TrainResult train(Model& model, const std::vector<AVSample>& train_set,
                  const std::vector<AVSample>& val_set, const TrainConfig& cfg,
                  TrainState state = TrainState{}, const std::string& log_path = "");

// MVSC checkpoint: header, then every parameter, state buffer and momentum
// buffer as a named float32 tensor table.
void save_checkpoint(const std::string& path, const Model& model, const TrainState& state,
                     const std::string& config_echo);

struct CheckpointHeader {
  std::string topology_tag;
  std::string config_echo;
  TrainState state;  // momentum_buf not populated here
};

// Header only: enough to rebuild the Model via the config echo.
CheckpointHeader read_checkpoint_header(const std::string& path);

// Restores parameters, state and optimizer buffers into a model that was
// built with the same configuration. Mismatched topology or parameter
// names/shapes are configuration errors.
CheckpointHeader load_checkpoint(const std::string& path, Model& model);

}  // namespace mvsv

#endif  // MVSV_TRAINER_H_
