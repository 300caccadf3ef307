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

#include "mvsv/trainer.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "mvsv/io.h"
#include "mvsv/losses.h"
#include "mvsv/ops.h"

namespace mvsv {

namespace {

constexpr char kCkptMagic[4] = {'M', 'V', 'S', 'C'};
constexpr uint32_t kCkptVersion = 1;

// Tensor roles in the checkpoint table.
constexpr uint8_t kRoleParam = 0;
constexpr uint8_t kRoleState = 1;
constexpr uint8_t kRoleMomentum = 2;

// Per-epoch stream ids; offset so they never collide with data-generation
// streams derived from the same seed.
constexpr uint64_t kShuffleStreamBase = 1000;
constexpr uint64_t kDropoutStreamBase = 2000;

std::string fmt_g9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// Mean per-sample loss of a list of samples, processed in contiguous batches.
// Used for validation; the model's current mode decides dropout/BN behavior.
double mean_loss(Model& model, const std::vector<AVSample>& set, const TrainConfig& cfg,
                 Rng& rng) {
  double total = 0.0;
  size_t done = 0;
  while (done < set.size()) {
    const size_t n = std::min<size_t>(cfg.batch_size, set.size() - done);
    std::vector<AVSample> batch(set.begin() + done, set.begin() + done + n);
    std::vector<int> labels;
    labels.reserve(n);
    for (const auto& s : batch) labels.push_back(s.speaker_id);
    Tensor<float> loss = batch_loss(model, batch, labels, cfg, rng, nullptr);
    total += static_cast<double>(loss.item()) * static_cast<double>(n);
    done += n;
  }
  return set.empty() ? 0.0 : total / static_cast<double>(set.size());
}

void check_contiguous_labels(const std::vector<AVSample>& train_set, int num_classes) {
  std::set<int> seen;
  for (const auto& s : train_set) {
    if (s.speaker_id < 0 || s.speaker_id >= num_classes)
      throw DataError("train: speaker id " + std::to_string(s.speaker_id) +
                      " outside [0, " + std::to_string(num_classes) + ")");
    seen.insert(s.speaker_id);
  }
  if (static_cast<int>(seen.size()) != num_classes)
    throw DataError("train: training split covers " + std::to_string(seen.size()) +
                    " of " + std::to_string(num_classes) +
                    " classes; labels must be contiguous speaker indices");
}

void write_tensor_entry(ByteWriter& w, const std::string& name, uint8_t role,
                        const Tensor<float>& t) {
  w.u64(name.size());
  w.str(name);
  w.u8(role);
  w.u32(static_cast<uint32_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) w.u32(static_cast<uint32_t>(t.dim(i)));
  w.f32_array(t.values().data(), t.values().size());
}

struct TensorEntry {
  std::string name;
  uint8_t role = 0;
  Shape shape;
  std::vector<float> values;
};

TensorEntry read_tensor_entry(ByteReader& r) {
  TensorEntry e;
  const uint64_t name_len = r.u64();
  e.name = r.str(name_len);
  e.role = r.u8();
  const uint32_t rank = r.u32();
  if (rank > 8) throw DataError("checkpoint: implausible tensor rank " + std::to_string(rank));
  int64_t numel = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    e.shape.push_back(static_cast<int64_t>(r.u32()));
    numel *= e.shape.back();
  }
  e.values.resize(numel);
  r.f32_array(e.values.data(), e.values.size());
  return e;
}

// Shared front half of header/full loads.
CheckpointHeader parse_header(ByteReader& r, const std::string& path) {
  const std::string magic = r.str(4);
  if (magic != std::string(kCkptMagic, 4))
    throw DataError("not a checkpoint file (bad magic): " + path);
  const uint32_t version = r.u32();
  if (version != kCkptVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
  CheckpointHeader h;
  const uint64_t tag_len = r.u64();
  h.topology_tag = r.str(tag_len);
  const uint64_t echo_len = r.u64();
  h.config_echo = r.str(echo_len);
  h.state.epoch = static_cast<int>(r.u32());
  h.state.lr = r.f64();
  h.state.best_val = r.f64();
  h.state.since_improve = static_cast<int>(r.u32());
  return h;
}

}  // namespace

Tensor<float> crop_audio(const Tensor<float>& audio, int t_crop) {
  audio.require_rank(2, "crop_audio");
  if (t_crop < 1) throw ConfigError("crop_audio: t_crop must be >= 1");
  const int64_t t = audio.dim(0), d = audio.dim(1);
  if (t == 0) throw DataError("crop_audio: empty utterance");
  Tensor<float> out({t_crop, d});
  for (int64_t i = 0; i < t_crop; ++i) {
    const float* src = audio.values().data() + (i % t) * d;
    std::copy(src, src + d, out.data() + i * d);
  }
  return out;
}

Tensor<float> batch_loss(Model& model, const std::vector<AVSample>& batch,
                         const std::vector<int>& labels, const TrainConfig& cfg, Rng& rng,
                         Tape<float>* tape) {
  // Audio is cropped/cycled to a fixed length so samples batch uniformly;
  // video is already fixed-length per dataset contract.
  std::vector<AVSample> fixed = batch;
  if (has_audio_branch(model.topology.kind))
    for (auto& s : fixed) s.audio = crop_audio(s.audio, cfg.t_crop);

  ForwardResult<float> fwd = forward_train(model, fixed, labels, rng, tape);
  if (fwd.logits.size() == 1) return cross_entropy_mean(fwd.logits[0], labels, tape);
  Tensor<float> la = cross_entropy_mean(fwd.logits[0], labels, tape);
  Tensor<float> lv = cross_entropy_mean(fwd.logits[1], labels, tape);
  return multitask_loss(la, lv, cfg.lambda_a, cfg.lambda_v, tape);
}

TrainResult train(Model& model, const std::vector<AVSample>& train_set,
                  const std::vector<AVSample>& val_set, const TrainConfig& cfg, TrainState state,
                  const std::string& log_path) {
  cfg.validate();
  if (train_set.empty()) throw DataError("train: empty training set");
  if (val_set.empty()) throw DataError("train: empty validation set");
  check_contiguous_labels(train_set, model.topology.head.num_classes);
  if (state.lr == 0.0) state.lr = cfg.lr;

  std::ofstream log_file;
  if (!log_path.empty()) {
    // Fresh runs start a new CSV; resumed runs append to the existing one.
    const bool fresh = state.epoch == 0;
    log_file.open(log_path, fresh ? std::ios::trunc : std::ios::app);
    if (!log_file) throw DataError("cannot open log file for writing: " + log_path);
    if (fresh) log_file << "epoch,train_loss,val_loss,lr\n";
  }

  TrainResult result;
  result.state = std::move(state);
  TrainState& st = result.state;

  std::vector<size_t> order(train_set.size());

  for (int e = st.epoch; e < cfg.max_epochs; ++e) {
    const double epoch_lr = st.lr;
    Rng shuffle_rng = Rng::stream(cfg.seed, kShuffleStreamBase + static_cast<uint64_t>(e));
    Rng dropout_rng = Rng::stream(cfg.seed, kDropoutStreamBase + static_cast<uint64_t>(e));
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_rng.shuffle(order);

    model.mode = Mode::kTrain;
    double loss_sum = 0.0;
    size_t seen = 0;
    size_t pos = 0;
    int batch_index = 0;
    while (pos < order.size()) {
      size_t n = std::min<size_t>(cfg.batch_size, order.size() - pos);
      if (n == 1) break;  // a trailing singleton cannot feed train-mode batchnorm
      std::vector<AVSample> batch;
      std::vector<int> labels;
      batch.reserve(n);
      labels.reserve(n);
      for (size_t i = 0; i < n; ++i) {
        const AVSample& s = train_set[order[pos + i]];
        batch.push_back(s);
        labels.push_back(s.speaker_id);
      }

      Tape<float> tape;
      Tensor<float> loss = batch_loss(model, batch, labels, cfg, dropout_rng, &tape);
      const double lval = static_cast<double>(loss.item());
      if (!std::isfinite(lval))
        throw NumericalError("non-finite training loss at epoch " + std::to_string(e + 1) +
                             ", batch " + std::to_string(batch_index));

      for (const auto& name : model.param_names) model.params.at(name).zero_grad();
      backward(loss, tape);

      const float flr = static_cast<float>(epoch_lr);
      for (const auto& name : model.param_names) {
        Tensor<float>& p = model.params.at(name);
        if (!p.has_grad()) continue;
        const std::vector<float>& g = p.grad();
        std::vector<float>& v = p.values();
        if (cfg.momentum > 0.0) {
          auto it = st.momentum_buf.find(name);
          if (it == st.momentum_buf.end())
            it = st.momentum_buf.emplace(name, Tensor<float>(p.shape())).first;
          std::vector<float>& buf = it->second.values();
          const float mu = static_cast<float>(cfg.momentum);
          for (size_t i = 0; i < v.size(); ++i) {
            buf[i] = mu * buf[i] + g[i];
            v[i] -= flr * buf[i];
          }
        } else {
          for (size_t i = 0; i < v.size(); ++i) v[i] -= flr * g[i];
        }
      }

      loss_sum += lval * static_cast<double>(n);
      seen += n;
      pos += n;
      ++batch_index;
    }

    model.mode = Mode::kInfer;
    Rng val_rng(0);  // unused: infer-mode dropout draws nothing
    const double val_loss = mean_loss(model, val_set, cfg, val_rng);
    if (!std::isfinite(val_loss))
      throw NumericalError("non-finite validation loss at epoch " + std::to_string(e + 1));
    model.mode = Mode::kTrain;

    EpochLog row;
    row.epoch = e + 1;
    row.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    row.val_loss = val_loss;
    row.lr = epoch_lr;
    result.log.push_back(row);
    if (log_file)
      log_file << row.epoch << ',' << fmt_g9(row.train_loss) << ',' << fmt_g9(row.val_loss) << ','
               << fmt_g9(row.lr) << '\n'
               << std::flush;

    // Plateau schedule on validation loss.
    if (st.best_val - val_loss > cfg.improve_eps) {
      st.best_val = val_loss;
      st.since_improve = 0;
    } else {
      ++st.since_improve;
      if (st.since_improve >= cfg.plateau_patience) {
        st.lr *= cfg.plateau_factor;
        st.since_improve = 0;
      }
    }
    st.epoch = e + 1;
  }
  return result;
}

void save_checkpoint(const std::string& path, const Model& model, const TrainState& state,
                     const std::string& config_echo) {
  ByteWriter w;
  w.str(std::string(kCkptMagic, 4));
  w.u32(kCkptVersion);
  const std::string tag = topology_name(model.topology.kind);
  w.u64(tag.size());
  w.str(tag);
  w.u64(config_echo.size());
  w.str(config_echo);
  w.u32(static_cast<uint32_t>(state.epoch));
  w.f64(state.lr);
  w.f64(state.best_val);
  w.u32(static_cast<uint32_t>(state.since_improve));

  uint64_t count = model.param_names.size() + model.state_names.size();
  for (const auto& name : model.param_names)
    if (state.momentum_buf.count(name)) ++count;
  w.u64(count);
  for (const auto& name : model.param_names)
    write_tensor_entry(w, name, kRoleParam, model.params.at(name));
  for (const auto& name : model.state_names)
    write_tensor_entry(w, name, kRoleState, model.state.at(name));
  for (const auto& name : model.param_names) {
    auto it = state.momentum_buf.find(name);
    if (it != state.momentum_buf.end()) write_tensor_entry(w, name, kRoleMomentum, it->second);
  }
  write_file(path, w.data());
}

CheckpointHeader read_checkpoint_header(const std::string& path) {
  const std::string bytes = read_file(path);
  ByteReader r(bytes.data(), bytes.size(), path);
  return parse_header(r, path);
}

CheckpointHeader load_checkpoint(const std::string& path, Model& model) {
  const std::string bytes = read_file(path);
  ByteReader r(bytes.data(), bytes.size(), path);
  CheckpointHeader h = parse_header(r, path);

  const std::string want = topology_name(model.topology.kind);
  if (h.topology_tag != want)
    throw ConfigError("topology mismatch: checkpoint '" + path + "' holds '" + h.topology_tag +
                      "', model expects '" + want + "'");

  std::set<std::string> loaded_params;
  const uint64_t count = r.u64();
  for (uint64_t i = 0; i < count; ++i) {
    TensorEntry e = read_tensor_entry(r);
    Tensor<float>* dst = nullptr;
    switch (e.role) {
      case kRoleParam: {
        auto it = model.params.find(e.name);
        if (it == model.params.end())
          throw ConfigError("checkpoint parameter '" + e.name + "' not present in model");
        dst = &it->second;
        loaded_params.insert(e.name);
        break;
      }
      case kRoleState: {
        auto it = model.state.find(e.name);
        if (it == model.state.end())
          throw ConfigError("checkpoint state buffer '" + e.name + "' not present in model");
        dst = &it->second;
        break;
      }
      case kRoleMomentum: {
        auto it = model.params.find(e.name);
        if (it == model.params.end())
          throw ConfigError("checkpoint momentum buffer '" + e.name + "' has no matching parameter");
        if (e.shape != it->second.shape())
          throw ConfigError("checkpoint momentum buffer '" + e.name + "' shape mismatch");
        Tensor<float> buf(e.shape);
        buf.values() = e.values;
        h.state.momentum_buf.emplace(e.name, std::move(buf));
        continue;
      }
      default:
        throw DataError("checkpoint: unknown tensor role " + std::to_string(e.role));
    }
    if (e.shape != dst->shape())
      throw ConfigError("checkpoint tensor '" + e.name + "' shape " + shape_str(e.shape) +
                        " does not match model shape " + shape_str(dst->shape()));
    dst->values() = e.values;
  }
  if (r.remaining() != 0) throw DataError("checkpoint has trailing bytes: " + path);
  for (const auto& name : model.param_names)
    if (!loaded_params.count(name))
      throw ConfigError("checkpoint is missing parameter '" + name + "'");
  return h;
}

}  // namespace mvsv
