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

#include "mvsv/config.h"

#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

#include "mvsv/io.h"
#include "mvsv/rng.h"

namespace mvsv {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// Strict scalar parsers: the whole value must be consumed.

int64_t parse_int(const std::string& key, const std::string& v) {
  if (v.empty()) throw ConfigError(key + ": empty integer value");
  char* end = nullptr;
  errno = 0;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (errno != 0 || end != v.c_str() + v.size())
    throw ConfigError(key + ": '" + v + "' is not an integer");
  return x;
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v[0] == '-') throw ConfigError(key + ": '" + v + "' is not a nonnegative integer");
  char* end = nullptr;
  errno = 0;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (errno != 0 || end != v.c_str() + v.size())
    throw ConfigError(key + ": '" + v + "' is not a nonnegative integer");
  return x;
}

double parse_double(const std::string& key, const std::string& v) {
  if (v.empty()) throw ConfigError(key + ": empty numeric value");
  char* end = nullptr;
  errno = 0;
  const double x = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size()) throw ConfigError(key + ": '" + v + "' is not a number");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean (true|false)");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  size_t start = 0;
  while (true) {
    size_t comma = v.find(',', start);
    out.push_back(trim(v.substr(start, comma == std::string::npos ? comma : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const std::string& item : split_list(v))
    out.push_back(static_cast<int>(parse_int(key, item)));
  if (out.empty()) throw ConfigError(key + ": list must not be empty");
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_int_list(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

// One handler per key; the table is the single source of truth for the key
// inventory, so unknown keys fail by construction.
const std::map<std::string, Setter>& setter_table() {
  static const std::map<std::string, Setter> kTable = {
      {"run.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); }},
      {"run.threads",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.threads = static_cast<int>(parse_int(k, v));
         if (c.threads < 1) throw ConfigError("run.threads must be >= 1");
       }},

      {"synth.num_speakers", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.num_speakers = static_cast<int>(parse_int(k, v)); }},
      {"synth.videos_per_speaker", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.videos_per_speaker = static_cast<int>(parse_int(k, v)); }},
      {"synth.utts_per_video", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.utts_per_video = static_cast<int>(parse_int(k, v)); }},
      {"synth.latent_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.latent_dim = static_cast<int>(parse_int(k, v)); }},
      {"synth.n_mels", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.n_mels = static_cast<int>(parse_int(k, v)); }},
      {"synth.t_min", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.t_min = static_cast<int>(parse_int(k, v)); }},
      {"synth.t_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.t_max = static_cast<int>(parse_int(k, v)); }},
      {"synth.video_frames", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.video_frames = static_cast<int>(parse_int(k, v)); }},
      {"synth.video_channels", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.video_channels = static_cast<int>(parse_int(k, v)); }},
      {"synth.video_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.video_size = static_cast<int>(parse_int(k, v)); }},
      {"synth.sigma_audio", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.sigma_audio = parse_double(k, v); }},
      {"synth.sigma_video", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.sigma_video = parse_double(k, v); }},
      {"synth.sigma_session", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.sigma_session = parse_double(k, v); }},
      {"synth.missing_face_prob", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.missing_face_prob = parse_double(k, v); }},
      {"synth.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.synth.seed = parse_u64(k, v); }},

      {"audio.conv_channels", [](RunConfig& c, const std::string& k, const std::string& v) { c.audio_channels = parse_int_list(k, v); }},
      {"audio.conv_kernels", [](RunConfig& c, const std::string& k, const std::string& v) { c.audio_kernels = parse_int_list(k, v); }},
      {"audio.conv_strides", [](RunConfig& c, const std::string& k, const std::string& v) { c.audio_strides = parse_int_list(k, v); }},
      {"audio.encoding_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.audio_encoding_dim = static_cast<int>(parse_int(k, v)); }},
      {"audio.attn_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.audio_attn_dim = static_cast<int>(parse_int(k, v)); }},
      {"video.conv_channels", [](RunConfig& c, const std::string& k, const std::string& v) { c.video_channels = parse_int_list(k, v); }},
      {"video.conv_kernels", [](RunConfig& c, const std::string& k, const std::string& v) { c.video_kernels = parse_int_list(k, v); }},
      {"video.conv_strides", [](RunConfig& c, const std::string& k, const std::string& v) { c.video_strides = parse_int_list(k, v); }},
      {"video.encoding_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.video_encoding_dim = static_cast<int>(parse_int(k, v)); }},

      {"model.proj_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.proj_dim = static_cast<int>(parse_int(k, v)); }},
      {"model.hidden_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.hidden_dim = static_cast<int>(parse_int(k, v)); }},
      {"model.dropout", [](RunConfig& c, const std::string& k, const std::string& v) { c.dropout = parse_double(k, v); }},
      {"model.batchnorm", [](RunConfig& c, const std::string& k, const std::string& v) { c.batchnorm = parse_bool(k, v); }},
      {"model.arc_scale", [](RunConfig& c, const std::string& k, const std::string& v) { c.arc_scale = parse_double(k, v); }},
      {"model.arc_margin", [](RunConfig& c, const std::string& k, const std::string& v) { c.arc_margin = parse_double(k, v); }},
      {"model.num_classes", [](RunConfig& c, const std::string& k, const std::string& v) { c.num_classes = static_cast<int>(parse_int(k, v)); }},
      {"model.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.model_seed = parse_u64(k, v); }},

      {"train.lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lr = parse_double(k, v); }},
      {"train.momentum", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.momentum = parse_double(k, v); }},
      {"train.plateau_factor", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.plateau_factor = parse_double(k, v); }},
      {"train.plateau_patience", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.plateau_patience = static_cast<int>(parse_int(k, v)); }},
      {"train.improve_eps", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.improve_eps = parse_double(k, v); }},
      {"train.batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = static_cast<int>(parse_int(k, v)); }},
      {"train.max_epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.max_epochs = static_cast<int>(parse_int(k, v)); }},
      {"train.t_crop", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.t_crop = static_cast<int>(parse_int(k, v)); }},
      {"train.lambda_a", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lambda_a = parse_double(k, v); }},
      {"train.lambda_v", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lambda_v = parse_double(k, v); }},
      {"train.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.seed = parse_u64(k, v); }},

      {"trials.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.trials_seed = parse_u64(k, v); }},

      {"eval.conditions",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.conditions.clear();
         for (const std::string& item : split_list(v)) {
           try {
             c.conditions.push_back(cond_from(item));
           } catch (const DataError& e) {
             throw ConfigError(k + ": " + e.what());
           }
         }
       }},
      {"eval.fusions", [](RunConfig& c, const std::string& k, const std::string& v) { (void)k; c.fusions = split_list(v); }},

      {"paths.dataset", [](RunConfig& c, const std::string& k, const std::string& v) { (void)k; c.dataset_path = v; }},
      {"paths.scores_dir", [](RunConfig& c, const std::string& k, const std::string& v) { (void)k; c.scores_dir = v; }},
      {"paths.report", [](RunConfig& c, const std::string& k, const std::string& v) { (void)k; c.report_path = v; }},
  };
  return kTable;
}

void apply_one(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = setter_table();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(cfg, key, value);
  cfg.explicit_keys.insert(key);
}

}  // namespace

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) +
                        ": expected 'section.key = value', got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    if (!seen.insert(key).second)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    try {
      apply_one(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_override(RunConfig& cfg, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  if (key.empty()) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  apply_one(cfg, key, value);
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  apply_config_text(cfg, read_file(path), path);
  return cfg;
}

void finalize_config(RunConfig& cfg) {
  if (!cfg.was_set("synth.seed")) cfg.synth.seed = cfg.seed;
  if (!cfg.was_set("model.seed")) cfg.model_seed = mix_seed(cfg.seed, 11);
  if (!cfg.was_set("train.seed")) cfg.train.seed = mix_seed(cfg.seed, 22);
  if (!cfg.was_set("trials.seed")) cfg.trials_seed = mix_seed(cfg.seed, 33);

  cfg.synth.validate();
  cfg.train.validate();
  audio_encoder_from(cfg).validate();
  video_encoder_from(cfg).validate();
  if (cfg.hidden_dim <= 0) throw ConfigError("model.hidden_dim must be positive");
  if (cfg.num_classes < 0) throw ConfigError("model.num_classes must be nonnegative");
  ArcConfig arc;
  arc.scale = cfg.arc_scale;
  arc.margin = cfg.arc_margin;
  arc.validate();
}

std::string config_to_text(const RunConfig& cfg) {
  std::ostringstream o;
  o << "run.seed = " << cfg.seed << '\n';
  o << "run.threads = " << cfg.threads << '\n';
  o << "synth.num_speakers = " << cfg.synth.num_speakers << '\n';
  o << "synth.videos_per_speaker = " << cfg.synth.videos_per_speaker << '\n';
  o << "synth.utts_per_video = " << cfg.synth.utts_per_video << '\n';
  o << "synth.latent_dim = " << cfg.synth.latent_dim << '\n';
  o << "synth.n_mels = " << cfg.synth.n_mels << '\n';
  o << "synth.t_min = " << cfg.synth.t_min << '\n';
  o << "synth.t_max = " << cfg.synth.t_max << '\n';
  o << "synth.video_frames = " << cfg.synth.video_frames << '\n';
  o << "synth.video_channels = " << cfg.synth.video_channels << '\n';
  o << "synth.video_size = " << cfg.synth.video_size << '\n';
  o << "synth.sigma_audio = " << fmt_double(cfg.synth.sigma_audio) << '\n';
  o << "synth.sigma_video = " << fmt_double(cfg.synth.sigma_video) << '\n';
  o << "synth.sigma_session = " << fmt_double(cfg.synth.sigma_session) << '\n';
  o << "synth.missing_face_prob = " << fmt_double(cfg.synth.missing_face_prob) << '\n';
  o << "synth.seed = " << cfg.synth.seed << '\n';
  o << "audio.conv_channels = " << fmt_int_list(cfg.audio_channels) << '\n';
  o << "audio.conv_kernels = " << fmt_int_list(cfg.audio_kernels) << '\n';
  o << "audio.conv_strides = " << fmt_int_list(cfg.audio_strides) << '\n';
  o << "audio.encoding_dim = " << cfg.audio_encoding_dim << '\n';
  o << "audio.attn_dim = " << cfg.audio_attn_dim << '\n';
  o << "video.conv_channels = " << fmt_int_list(cfg.video_channels) << '\n';
  o << "video.conv_kernels = " << fmt_int_list(cfg.video_kernels) << '\n';
  o << "video.conv_strides = " << fmt_int_list(cfg.video_strides) << '\n';
  o << "video.encoding_dim = " << cfg.video_encoding_dim << '\n';
  o << "model.proj_dim = " << cfg.proj_dim << '\n';
  o << "model.hidden_dim = " << cfg.hidden_dim << '\n';
  o << "model.dropout = " << fmt_double(cfg.dropout) << '\n';
  o << "model.batchnorm = " << (cfg.batchnorm ? "true" : "false") << '\n';
  o << "model.arc_scale = " << fmt_double(cfg.arc_scale) << '\n';
  o << "model.arc_margin = " << fmt_double(cfg.arc_margin) << '\n';
  o << "model.num_classes = " << cfg.num_classes << '\n';
  o << "model.seed = " << cfg.model_seed << '\n';
  o << "train.lr = " << fmt_double(cfg.train.lr) << '\n';
  o << "train.momentum = " << fmt_double(cfg.train.momentum) << '\n';
  o << "train.plateau_factor = " << fmt_double(cfg.train.plateau_factor) << '\n';
  o << "train.plateau_patience = " << cfg.train.plateau_patience << '\n';
  o << "train.improve_eps = " << fmt_double(cfg.train.improve_eps) << '\n';
  o << "train.batch_size = " << cfg.train.batch_size << '\n';
  o << "train.max_epochs = " << cfg.train.max_epochs << '\n';
  o << "train.t_crop = " << cfg.train.t_crop << '\n';
  o << "train.lambda_a = " << fmt_double(cfg.train.lambda_a) << '\n';
  o << "train.lambda_v = " << fmt_double(cfg.train.lambda_v) << '\n';
  o << "train.seed = " << cfg.train.seed << '\n';
  o << "trials.seed = " << cfg.trials_seed << '\n';
  std::string conds;
  for (size_t i = 0; i < cfg.conditions.size(); ++i) {
    if (i) conds += ',';
    conds += cond_name(cfg.conditions[i]);
  }
  o << "eval.conditions = " << conds << '\n';
  std::string fus;
  for (size_t i = 0; i < cfg.fusions.size(); ++i) {
    if (i) fus += ',';
    fus += cfg.fusions[i];
  }
  o << "eval.fusions = " << fus << '\n';
  o << "paths.dataset = " << cfg.dataset_path << '\n';
  o << "paths.scores_dir = " << cfg.scores_dir << '\n';
  o << "paths.report = " << cfg.report_path << '\n';
  return o.str();
}

EncoderConfig audio_encoder_from(const RunConfig& cfg) {
  if (cfg.audio_channels.size() != cfg.audio_kernels.size() ||
      cfg.audio_channels.size() != cfg.audio_strides.size())
    throw ConfigError("audio.conv_channels/kernels/strides must have equal lengths");
  EncoderConfig e;
  e.modality = Modality::kAudio;
  for (size_t i = 0; i < cfg.audio_channels.size(); ++i)
    e.conv_blocks.push_back({cfg.audio_channels[i], cfg.audio_kernels[i], cfg.audio_strides[i]});
  e.encoding_dim = cfg.audio_encoding_dim;
  e.attn_dim = cfg.audio_attn_dim;
  e.in_mels = cfg.synth.n_mels;
  return e;
}

EncoderConfig video_encoder_from(const RunConfig& cfg) {
  if (cfg.video_channels.size() != cfg.video_kernels.size() ||
      cfg.video_channels.size() != cfg.video_strides.size())
    throw ConfigError("video.conv_channels/kernels/strides must have equal lengths");
  EncoderConfig e;
  e.modality = Modality::kVideo;
  for (size_t i = 0; i < cfg.video_channels.size(); ++i)
    e.conv_blocks.push_back({cfg.video_channels[i], cfg.video_kernels[i], cfg.video_strides[i]});
  e.encoding_dim = cfg.video_encoding_dim;
  e.in_channels = cfg.synth.video_channels;
  e.in_size = cfg.synth.video_size;
  return e;
}

Topology topology_from_config(const RunConfig& cfg, TopologyKind kind, int num_classes) {
  Topology t;
  t.kind = kind;
  t.proj_dim = cfg.proj_dim;
  t.head.hidden_dim = cfg.hidden_dim;
  t.head.dropout_p = cfg.dropout;
  t.head.num_classes = num_classes;
  if (kind == TopologyKind::kMultiView) {
    if (cfg.was_set("model.batchnorm") && cfg.batchnorm)
      throw ConfigError(
          "model.batchnorm = true conflicts with the multiview topology "
          "(the shared classifier head runs without batchnorm)");
    t.head.use_batchnorm = false;
  } else {
    t.head.use_batchnorm = cfg.batchnorm;
  }
  t.arc.scale = cfg.arc_scale;
  t.arc.margin = cfg.arc_margin;
  t.lambda_a = cfg.train.lambda_a;
  t.lambda_v = cfg.train.lambda_v;
  return t;
}

Model model_from_config(const RunConfig& cfg, TopologyKind kind, int num_classes) {
  const Topology topo = topology_from_config(cfg, kind, num_classes);
  return build_model<float>(topo, audio_encoder_from(cfg), video_encoder_from(cfg),
                            cfg.model_seed);
}

TrainConfig train_config_from(const RunConfig& cfg) { return cfg.train; }

}  // namespace mvsv
