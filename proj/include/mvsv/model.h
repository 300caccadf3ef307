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
// Network topologies for audio-visual speaker verification:
//
//   unimodal-a   audio encoder -> classifier head
//   unimodal-v   video encoder -> classifier head
//   midfusion    both encoders, encodings concatenated -> one head
//   multiview    both encoders, linear projections into one shared space,
//                one shared head applied to each modality separately
//
// Encoders are small VGG-ish conv stacks. The audio branch pools over time
// with additive self-attention; the video branch with a plain temporal mean.
// The head is FC -> ReLU -> [BN] -> dropout -> arc-margin class weights; the
// multiview head carries no batchnorm so both modalities see the exact same
// affine map at train and test time.

#ifndef MVSV_MODEL_H_
#define MVSV_MODEL_H_

#include <map>
#include <string>
#include <vector>

#include "mvsv/data.h"
#include "mvsv/losses.h"
#include "mvsv/ops.h"
#include "mvsv/pooling.h"
#include "mvsv/rng.h"
#include "mvsv/tensor.h"

namespace mvsv {

enum class Modality { kAudio, kVideo };

struct ConvBlock {
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
};

struct EncoderConfig {
  Modality modality = Modality::kAudio;
  std::vector<ConvBlock> conv_blocks;
  int encoding_dim = 64;
  // Audio branch only.
  int attn_dim = 32;
  int in_mels = 64;
  // Video branch only.
  int in_channels = 3;
  int in_size = 16;  // square frames

  void validate() const {
    if (conv_blocks.empty()) throw ConfigError("encoder needs at least one conv block");
    for (const ConvBlock& b : conv_blocks)
      if (b.out_channels <= 0 || b.kernel <= 0 || b.stride <= 0)
        throw ConfigError("conv block fields must be positive");
    if (encoding_dim <= 0) throw ConfigError("encoding_dim must be positive");
    if (modality == Modality::kAudio) {
      if (in_mels <= 0) throw ConfigError("in_mels must be positive");
      if (attn_dim <= 0) throw ConfigError("attn_dim must be positive");
    } else {
      if (in_channels <= 0 || in_size <= 0)
        throw ConfigError("video input geometry must be positive");
    }
  }
};

inline int conv_out_dim(int in, int kernel, int stride) { return (in - kernel) / stride + 1; }

// Desk-scale presets; paper-mirror dimensions live in config files only.
inline EncoderConfig desk_audio_encoder() {
  EncoderConfig cfg;
  cfg.modality = Modality::kAudio;
  cfg.conv_blocks = {{8, 3, 2}, {16, 3, 2}, {32, 3, 2}};
  cfg.encoding_dim = 64;
  cfg.attn_dim = 32;
  cfg.in_mels = 64;
  return cfg;
}

inline EncoderConfig desk_video_encoder() {
  EncoderConfig cfg;
  cfg.modality = Modality::kVideo;
  cfg.conv_blocks = {{8, 3, 2}, {16, 3, 2}};
  cfg.encoding_dim = 128;
  cfg.in_channels = 3;
  cfg.in_size = 16;
  return cfg;
}

enum class TopologyKind { kUnimodalA, kUnimodalV, kMidFusion, kMultiView };

inline std::string topology_name(TopologyKind k) {
  switch (k) {
    case TopologyKind::kUnimodalA: return "unimodal-a";
    case TopologyKind::kUnimodalV: return "unimodal-v";
    case TopologyKind::kMidFusion: return "midfusion";
    case TopologyKind::kMultiView: return "multiview";
  }
  return "?";
}

inline TopologyKind topology_from(const std::string& s) {
  if (s == "unimodal-a") return TopologyKind::kUnimodalA;
  if (s == "unimodal-v") return TopologyKind::kUnimodalV;
  if (s == "midfusion") return TopologyKind::kMidFusion;
  if (s == "multiview") return TopologyKind::kMultiView;
  throw ConfigError("unknown topology '" + s +
                    "' (expected unimodal-a, unimodal-v, midfusion or multiview)");
}

inline bool has_audio_branch(TopologyKind k) { return k != TopologyKind::kUnimodalV; }
inline bool has_video_branch(TopologyKind k) { return k != TopologyKind::kUnimodalA; }

struct HeadConfig {
  int hidden_dim = 128;
  double dropout_p = 0.2;
  bool use_batchnorm = true;
  int num_classes = 0;

  void validate() const {
    if (hidden_dim <= 0) throw ConfigError("head hidden_dim must be positive");
    if (dropout_p < 0.0 || dropout_p >= 1.0) throw ConfigError("head dropout_p must be in [0, 1)");
    if (num_classes <= 0) throw ConfigError("head num_classes must be positive");
  }
};

struct Topology {
  TopologyKind kind = TopologyKind::kUnimodalA;
  int proj_dim = 0;  // multiview shared-space dim
  HeadConfig head;
  ArcConfig arc;
  double lambda_a = 1.0;
  double lambda_v = 1.0;

  void validate() const {
    head.validate();
    arc.validate();
    if (kind == TopologyKind::kMultiView) {
      if (proj_dim <= 0) throw ConfigError("multiview requires proj_dim > 0");
      if (head.use_batchnorm)
        throw ConfigError("multiview head must not use batchnorm (shared-classifier contract)");
      if (lambda_a < 0.0 || lambda_v < 0.0) throw ConfigError("lambdas must be nonnegative");
    }
  }
};

template <typename S>
struct BasicModel {
  Topology topology;
  EncoderConfig audio_cfg;
  EncoderConfig video_cfg;
  Mode mode = Mode::kTrain;

  std::vector<std::string> param_names;  // registration order; drives SGD and serialization
  std::map<std::string, Tensor<S>> params;
  std::vector<std::string> state_names;  // non-trained buffers (BN running stats)
  std::map<std::string, Tensor<S>> state;

  const Tensor<S>& param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw Error("model has no parameter '" + name + "'");
    return it->second;
  }
  Tensor<S>& state_at(const std::string& name) {
    auto it = state.find(name);
    if (it == state.end()) throw Error("model has no state buffer '" + name + "'");
    return it->second;
  }
  int64_t num_params() const {
    int64_t n = 0;
    for (const auto& name : param_names) n += params.at(name).size();
    return n;
  }
};

using Model = BasicModel<float>;

namespace detail {

// Width of the per-timestep feature row after the audio conv stack
// (channels x surviving mel width), and the flattened per-frame dim after
// the video conv stack. Both are independent of the time axis.
inline int64_t audio_step_features(const EncoderConfig& cfg) {
  int w = cfg.in_mels;
  for (const ConvBlock& b : cfg.conv_blocks) {
    if (b.kernel > w)
      throw ConfigError("audio conv block kernel " + std::to_string(b.kernel) +
                        " exceeds remaining mel width " + std::to_string(w));
    w = conv_out_dim(w, b.kernel, b.stride);
  }
  return static_cast<int64_t>(cfg.conv_blocks.back().out_channels) * w;
}

inline int64_t video_frame_features(const EncoderConfig& cfg) {
  int w = cfg.in_size;
  for (const ConvBlock& b : cfg.conv_blocks) {
    if (b.kernel > w)
      throw ConfigError("video conv block kernel " + std::to_string(b.kernel) +
                        " exceeds remaining frame size " + std::to_string(w));
    w = conv_out_dim(w, b.kernel, b.stride);
  }
  return static_cast<int64_t>(cfg.conv_blocks.back().out_channels) * w * w;
}

}  // namespace detail

// Deterministic construction: parameters registered in a fixed order, each
// filled from one seeded stream. Weights are fan-in-scaled uniform
// U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases zero; BN gamma one, beta zero.
template <typename S>
BasicModel<S> build_model(const Topology& topology, const EncoderConfig& audio_cfg,
                          const EncoderConfig& video_cfg, uint64_t seed) {
  topology.validate();
  const TopologyKind kind = topology.kind;
  if (has_audio_branch(kind)) audio_cfg.validate();
  if (has_video_branch(kind)) video_cfg.validate();

  BasicModel<S> m;
  m.topology = topology;
  m.audio_cfg = audio_cfg;
  m.video_cfg = video_cfg;

  Rng rng = Rng::stream(seed, 1);
  auto add_uniform = [&](const std::string& name, Shape shape, int64_t fan_in) {
    Tensor<S> t(shape, /*requires_grad=*/true);
    const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int64_t i = 0; i < t.size(); ++i)
      t.data()[i] = static_cast<S>(rng.uniform() * 2.0 * a - a);
    m.param_names.push_back(name);
    m.params.emplace(name, std::move(t));
  };
  auto add_const = [&](const std::string& name, Shape shape, S v) {
    Tensor<S> t = Tensor<S>::full(std::move(shape), v, /*requires_grad=*/true);
    m.param_names.push_back(name);
    m.params.emplace(name, std::move(t));
  };
  auto add_state = [&](const std::string& name, Shape shape, S v) {
    m.state_names.push_back(name);
    m.state.emplace(name, Tensor<S>::full(std::move(shape), v));
  };

  int64_t enc_a = 0, enc_v = 0;
  if (has_audio_branch(kind)) {
    int in_ch = 1;
    for (size_t i = 0; i < audio_cfg.conv_blocks.size(); ++i) {
      const ConvBlock& b = audio_cfg.conv_blocks[i];
      add_uniform("enc_a.conv" + std::to_string(i) + ".k",
                  {b.out_channels, in_ch, b.kernel, b.kernel},
                  static_cast<int64_t>(in_ch) * b.kernel * b.kernel);
      in_ch = b.out_channels;
    }
    const int64_t step = detail::audio_step_features(audio_cfg);
    enc_a = audio_cfg.encoding_dim;
    add_uniform("enc_a.proj.W", {step, enc_a}, step);
    add_const("enc_a.proj.b", {enc_a}, S(0));
    add_uniform("enc_a.att.W", {enc_a, audio_cfg.attn_dim}, enc_a);
    add_const("enc_a.att.b", {audio_cfg.attn_dim}, S(0));
    add_uniform("enc_a.att.v", {audio_cfg.attn_dim, 1}, audio_cfg.attn_dim);
  }
  if (has_video_branch(kind)) {
    int in_ch = video_cfg.in_channels;
    for (size_t i = 0; i < video_cfg.conv_blocks.size(); ++i) {
      const ConvBlock& b = video_cfg.conv_blocks[i];
      add_uniform("enc_v.conv" + std::to_string(i) + ".k",
                  {b.out_channels, in_ch, b.kernel, b.kernel},
                  static_cast<int64_t>(in_ch) * b.kernel * b.kernel);
      in_ch = b.out_channels;
    }
    const int64_t flat = detail::video_frame_features(video_cfg);
    enc_v = video_cfg.encoding_dim;
    add_uniform("enc_v.proj.W", {flat, enc_v}, flat);
    add_const("enc_v.proj.b", {enc_v}, S(0));
  }

  int64_t head_in = 0;
  switch (kind) {
    case TopologyKind::kUnimodalA: head_in = enc_a; break;
    case TopologyKind::kUnimodalV: head_in = enc_v; break;
    case TopologyKind::kMidFusion: head_in = enc_a + enc_v; break;
    case TopologyKind::kMultiView: {
      add_uniform("proj_a.W", {enc_a, topology.proj_dim}, enc_a);
      add_const("proj_a.b", {topology.proj_dim}, S(0));
      add_uniform("proj_v.W", {enc_v, topology.proj_dim}, enc_v);
      add_const("proj_v.b", {topology.proj_dim}, S(0));
      head_in = topology.proj_dim;
      break;
    }
  }

  const int64_t hidden = topology.head.hidden_dim;
  add_uniform("head.fc1.W", {head_in, hidden}, head_in);
  add_const("head.fc1.b", {hidden}, S(0));
  if (topology.head.use_batchnorm) {
    add_const("head.bn.gamma", {hidden}, S(1));
    add_const("head.bn.beta", {hidden}, S(0));
    add_state("head.bn.running_mean", {hidden}, S(0));
    add_state("head.bn.running_var", {hidden}, S(1));
  }
  add_uniform("head.arc.W", {topology.head.num_classes, hidden}, hidden);
  return m;
}

// audio: T x n_mels -> 1 x encoding_dim
template <typename S>
Tensor<S> encode_audio(const BasicModel<S>& m, const Tensor<S>& audio, Tape<S>* tape = nullptr) {
  audio.require_rank(2, "encode_audio input");
  const EncoderConfig& cfg = m.audio_cfg;
  if (audio.dim(1) != cfg.in_mels)
    throw DimensionError("encode_audio: expected " + std::to_string(cfg.in_mels) +
                         " mel bins, got " + shape_str(audio.shape()));
  Tensor<S> x = reshape(audio, {1, 1, audio.dim(0), audio.dim(1)}, tape);
  for (size_t i = 0; i < cfg.conv_blocks.size(); ++i)
    x = relu(conv2d(x, m.param("enc_a.conv" + std::to_string(i) + ".k"),
                    cfg.conv_blocks[i].stride, tape),
             tape);
  Tensor<S> seq = time_sequence(x, tape);
  seq = linear(seq, m.param("enc_a.proj.W"), m.param("enc_a.proj.b"), tape);
  return attentive_pool(seq, m.param("enc_a.att.W"), m.param("enc_a.att.b"),
                        m.param("enc_a.att.v"), tape);
}

// video: T_v x C x H x W -> 1 x encoding_dim
template <typename S>
Tensor<S> encode_video(const BasicModel<S>& m, const Tensor<S>& video, Tape<S>* tape = nullptr) {
  video.require_rank(4, "encode_video input");
  const EncoderConfig& cfg = m.video_cfg;
  if (video.dim(1) != cfg.in_channels || video.dim(2) != cfg.in_size ||
      video.dim(3) != cfg.in_size)
    throw DimensionError("encode_video: expected frames of " + std::to_string(cfg.in_channels) +
                         "x" + std::to_string(cfg.in_size) + "x" + std::to_string(cfg.in_size) +
                         ", got " + shape_str(video.shape()));
  Tensor<S> x = video;
  for (size_t i = 0; i < cfg.conv_blocks.size(); ++i)
    x = relu(conv2d(x, m.param("enc_v.conv" + std::to_string(i) + ".k"),
                    cfg.conv_blocks[i].stride, tape),
             tape);
  Tensor<S> seq = reshape(x, {video.dim(0), x.size() / video.dim(0)}, tape);
  seq = linear(seq, m.param("enc_v.proj.W"), m.param("enc_v.proj.b"), tape);
  return temporal_pool(seq, tape);
}

// Verification embedding: pooled encoder output for unimodal / midfusion
// branches, post-projection vector for multiview. Always forward-only.
template <typename S>
Tensor<S> embed(const BasicModel<S>& m, const BasicAVSample<S>& sample, Modality mod) {
  Tensor<S> e;
  if (mod == Modality::kAudio) {
    if (!has_audio_branch(m.topology.kind))
      throw CapabilityError("topology " + topology_name(m.topology.kind) +
                            " has no audio branch");
    if (!sample.audio.defined()) throw DataError("sample carries no audio");
    e = encode_audio(m, sample.audio);
    if (m.topology.kind == TopologyKind::kMultiView)
      e = linear(e, m.param("proj_a.W"), m.param("proj_a.b"));
  } else {
    if (!has_video_branch(m.topology.kind))
      throw CapabilityError("topology " + topology_name(m.topology.kind) +
                            " has no video branch");
    if (!sample.video.defined()) throw DataError("sample carries no video");
    e = encode_video(m, sample.video);
    if (m.topology.kind == TopologyKind::kMultiView)
      e = linear(e, m.param("proj_v.W"), m.param("proj_v.b"));
  }
  return reshape(e, {e.dim(1)});
}

// FC -> ReLU -> [BN] -> dropout -> arc-margin logits against the class rows.
template <typename S>
Tensor<S> head_forward(BasicModel<S>& m, const Tensor<S>& x, const std::vector<int>& labels,
                       Rng& rng, Tape<S>* tape) {
  Tensor<S> h = relu(linear(x, m.param("head.fc1.W"), m.param("head.fc1.b"), tape), tape);
  if (m.topology.head.use_batchnorm)
    h = batchnorm(h, m.param("head.bn.gamma"), m.param("head.bn.beta"),
                  m.state_at("head.bn.running_mean"), m.state_at("head.bn.running_var"), m.mode,
                  tape);
  h = dropout(h, m.topology.head.dropout_p, m.mode, rng, tape);
  Tensor<S> cos = matmul_nt(l2_normalize(h, tape), l2_normalize(m.param("head.arc.W"), tape), tape);
  return arc_margin_logits(cos, labels, m.topology.arc.scale, m.topology.arc.margin, tape);
}

template <typename S>
struct ForwardResult {
  std::vector<std::string> tags;     // "a", "v" or "av", aligned with logits
  std::vector<Tensor<S>> logits;     // batch x num_classes margin logits
};

// One training forward pass. Multiview yields two logit sets produced by the
// identical head parameter tensors; everything else yields one.
template <typename S>
ForwardResult<S> forward_train(BasicModel<S>& m, const std::vector<BasicAVSample<S>>& batch,
                               const std::vector<int>& labels, Rng& rng, Tape<S>* tape) {
  if (batch.empty()) throw DimensionError("forward_train: empty batch");
  if (labels.size() != batch.size())
    throw DimensionError("forward_train: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(batch.size()) + " samples");
  const int k = m.topology.head.num_classes;
  for (int y : labels)
    if (y < 0 || y >= k)
      throw DimensionError("forward_train: label " + std::to_string(y) + " out of range [0, " +
                           std::to_string(k) + ")");

  auto stack_audio = [&]() {
    std::vector<Tensor<S>> rows;
    rows.reserve(batch.size());
    for (const auto& s : batch) rows.push_back(encode_audio(m, s.audio, tape));
    return stack_rows(rows, tape);
  };
  auto stack_video = [&]() {
    std::vector<Tensor<S>> rows;
    rows.reserve(batch.size());
    for (const auto& s : batch) rows.push_back(encode_video(m, s.video, tape));
    return stack_rows(rows, tape);
  };

  ForwardResult<S> out;
  switch (m.topology.kind) {
    case TopologyKind::kUnimodalA:
      out.tags = {"a"};
      out.logits = {head_forward(m, stack_audio(), labels, rng, tape)};
      break;
    case TopologyKind::kUnimodalV:
      out.tags = {"v"};
      out.logits = {head_forward(m, stack_video(), labels, rng, tape)};
      break;
    case TopologyKind::kMidFusion: {
      Tensor<S> e = concat<S>({stack_audio(), stack_video()}, tape);
      out.tags = {"av"};
      out.logits = {head_forward(m, e, labels, rng, tape)};
      break;
    }
    case TopologyKind::kMultiView: {
      Tensor<S> pa = linear(stack_audio(), m.param("proj_a.W"), m.param("proj_a.b"), tape);
      Tensor<S> pv = linear(stack_video(), m.param("proj_v.W"), m.param("proj_v.b"), tape);
      out.tags = {"a", "v"};
      out.logits = {head_forward(m, pa, labels, rng, tape),
                    head_forward(m, pv, labels, rng, tape)};
      break;
    }
  }
  return out;
}

}  // namespace mvsv

#endif  // MVSV_MODEL_H_
