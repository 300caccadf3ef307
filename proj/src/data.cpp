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

#include "mvsv/data.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include "mvsv/io.h"
#include "mvsv/parallel.h"
#include "mvsv/rng.h"

namespace mvsv {

namespace {

constexpr uint32_t kDatasetVersion = 1;

// RNG stream layout: stream 0 holds the global identity maps, stream 1+s is
// speaker s. Per speaker the draw order is: z (k gaussians), then per
// utterance: frame count, missing-face coin, session offset (n_mels), audio
// noise (t_a * n_mels), video noise (skipped when the face is missing).

std::string fmt_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int64_t parse_int(const std::string& tok, const std::string& what) {
  if (tok.empty()) throw DataError("manifest: empty integer for " + what);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(tok.c_str(), &end, 10);
  if (errno != 0 || end != tok.c_str() + tok.size())
    throw DataError("manifest: bad integer '" + tok + "' for " + what);
  return v;
}

uint64_t parse_u64(const std::string& tok, const std::string& what) {
  if (tok.empty() || tok[0] == '-') throw DataError("manifest: bad unsigned '" + tok + "' for " + what);
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
  if (errno != 0 || end != tok.c_str() + tok.size())
    throw DataError("manifest: bad unsigned '" + tok + "' for " + what);
  return v;
}

double parse_double(const std::string& tok, const std::string& what) {
  if (tok.empty()) throw DataError("manifest: empty real for " + what);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(tok.c_str(), &end);
  if (errno != 0 || end != tok.c_str() + tok.size())
    throw DataError("manifest: bad real '" + tok + "' for " + what);
  return v;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace

Dataset gen_synthetic(const SynthConfig& cfg, int threads) {
  cfg.validate();
  const int k = cfg.latent_dim;
  const int pix = cfg.pixels_per_frame();

  Rng global = Rng::stream(cfg.seed, 0);
  std::vector<double> map_a(static_cast<size_t>(cfg.n_mels) * k);
  std::vector<double> map_v(static_cast<size_t>(pix) * k);
  for (double& x : map_a) x = global.gauss();
  for (double& x : map_v) x = global.gauss();

  std::vector<std::vector<AVSample>> per_speaker(static_cast<size_t>(cfg.num_speakers));
  parallel_for(cfg.num_speakers, threads, [&](int64_t si) {
    const int s = static_cast<int>(si);
    Rng rng = Rng::stream(cfg.seed, 1 + static_cast<uint64_t>(s));
    std::vector<double> z(static_cast<size_t>(k));
    for (double& x : z) x = rng.gauss();

    std::vector<double> mean_a(static_cast<size_t>(cfg.n_mels));
    for (int i = 0; i < cfg.n_mels; ++i) {
      double acc = 0.0;
      for (int j = 0; j < k; ++j) acc += map_a[static_cast<size_t>(i) * k + j] * z[j];
      mean_a[i] = std::tanh(acc);
    }
    std::vector<double> mean_v(static_cast<size_t>(pix));
    for (int p = 0; p < pix; ++p) {
      double acc = 0.0;
      for (int j = 0; j < k; ++j) acc += map_v[static_cast<size_t>(p) * k + j] * z[j];
      mean_v[p] = std::tanh(acc);
    }

    auto& out = per_speaker[static_cast<size_t>(s)];
    out.reserve(static_cast<size_t>(cfg.utts_per_speaker()));
    std::vector<double> offset(static_cast<size_t>(cfg.n_mels));
    for (int v = 0; v < cfg.videos_per_speaker; ++v)
      for (int u = 0; u < cfg.utts_per_video; ++u) {
        AVSample smp;
        smp.speaker_id = s;
        smp.video_id = v;
        smp.utterance_id = (s * cfg.videos_per_speaker + v) * cfg.utts_per_video + u;
        const int t_a =
            cfg.t_min + static_cast<int>(rng.uniform_int(
                            static_cast<uint64_t>(cfg.t_max - cfg.t_min) + 1));
        smp.missing_face = rng.uniform() < cfg.missing_face_prob;
        for (double& x : offset) x = cfg.sigma_session * rng.gauss();

        Tensor<float> audio({t_a, cfg.n_mels});
        for (int t = 0; t < t_a; ++t)
          for (int i = 0; i < cfg.n_mels; ++i)
            audio.data()[static_cast<int64_t>(t) * cfg.n_mels + i] =
                static_cast<float>(mean_a[i] + offset[i] + cfg.sigma_audio * rng.gauss());
        smp.audio = audio;

        if (smp.missing_face) {
          smp.video = Tensor<float>({1, cfg.video_channels, cfg.video_size, cfg.video_size});
        } else {
          Tensor<float> video(
              {cfg.video_frames, cfg.video_channels, cfg.video_size, cfg.video_size});
          for (int f = 0; f < cfg.video_frames; ++f)
            for (int p = 0; p < pix; ++p)
              video.data()[static_cast<int64_t>(f) * pix + p] =
                  static_cast<float>(mean_v[p] + cfg.sigma_video * rng.gauss());
          smp.video = video;
        }
        out.push_back(std::move(smp));
      }
  });

  Dataset ds;
  ds.manifest.num_speakers = cfg.num_speakers;
  ds.manifest.n_mels = cfg.n_mels;
  ds.manifest.video_channels = cfg.video_channels;
  ds.manifest.video_size = cfg.video_size;
  ds.manifest.config = cfg;
  ds.manifest.utts.reserve(static_cast<size_t>(cfg.total_utts()));
  ds.samples.reserve(static_cast<size_t>(cfg.total_utts()));
  uint64_t off = 0;
  for (auto& chunk : per_speaker)
    for (auto& smp : chunk) {
      UttRecord r;
      r.speaker_id = smp.speaker_id;
      r.video_id = smp.video_id;
      r.utterance_id = smp.utterance_id;
      r.t_a = static_cast<int>(smp.audio.dim(0));
      r.t_v = static_cast<int>(smp.video.dim(0));
      r.missing_face = smp.missing_face;
      r.audio_offset = off;
      off += static_cast<uint64_t>(smp.audio.size()) * 4;
      r.video_offset = off;
      off += static_cast<uint64_t>(smp.video.size()) * 4;
      ds.manifest.utts.push_back(r);
      ds.samples.push_back(std::move(smp));
    }
  return ds;
}

std::string manifest_to_text(const DatasetManifest& m) {
  std::ostringstream ss;
  ss << "num_speakers = " << m.num_speakers << "\n";
  ss << "n_mels = " << m.n_mels << "\n";
  ss << "video_channels = " << m.video_channels << "\n";
  ss << "video_size = " << m.video_size << "\n";
  ss << "num_utts = " << m.utts.size() << "\n";
  const SynthConfig& c = m.config;
  ss << "cfg.num_speakers = " << c.num_speakers << "\n";
  ss << "cfg.videos_per_speaker = " << c.videos_per_speaker << "\n";
  ss << "cfg.utts_per_video = " << c.utts_per_video << "\n";
  ss << "cfg.latent_dim = " << c.latent_dim << "\n";
  ss << "cfg.n_mels = " << c.n_mels << "\n";
  ss << "cfg.t_min = " << c.t_min << "\n";
  ss << "cfg.t_max = " << c.t_max << "\n";
  ss << "cfg.video_frames = " << c.video_frames << "\n";
  ss << "cfg.video_channels = " << c.video_channels << "\n";
  ss << "cfg.video_size = " << c.video_size << "\n";
  ss << "cfg.sigma_audio = " << fmt_double(c.sigma_audio) << "\n";
  ss << "cfg.sigma_video = " << fmt_double(c.sigma_video) << "\n";
  ss << "cfg.sigma_session = " << fmt_double(c.sigma_session) << "\n";
  ss << "cfg.missing_face_prob = " << fmt_double(c.missing_face_prob) << "\n";
  ss << "cfg.seed = " << c.seed << "\n";
  for (const UttRecord& r : m.utts)
    ss << "utt = " << r.speaker_id << " " << r.video_id << " " << r.utterance_id << " " << r.t_a
       << " " << r.t_v << " " << (r.missing_face ? 1 : 0) << " " << r.audio_offset << " "
       << r.video_offset << "\n";
  return ss.str();
}

DatasetManifest manifest_from_text(const std::string& text) {
  DatasetManifest m;
  size_t declared_utts = 0;
  bool saw_utt_count = false;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) throw DataError("manifest: malformed line '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "num_speakers") m.num_speakers = static_cast<int>(parse_int(value, key));
    else if (key == "n_mels") m.n_mels = static_cast<int>(parse_int(value, key));
    else if (key == "video_channels") m.video_channels = static_cast<int>(parse_int(value, key));
    else if (key == "video_size") m.video_size = static_cast<int>(parse_int(value, key));
    else if (key == "num_utts") {
      declared_utts = static_cast<size_t>(parse_int(value, key));
      saw_utt_count = true;
    } else if (key == "cfg.num_speakers") m.config.num_speakers = static_cast<int>(parse_int(value, key));
    else if (key == "cfg.videos_per_speaker") m.config.videos_per_speaker = static_cast<int>(parse_int(value, key));
    else if (key == "cfg.utts_per_video") m.config.utts_per_video = static_cast<int>(parse_int(value, key));
    else if (key == "cfg.latent_dim") m.config.latent_dim = static_cast<int>(parse_int(value, key));
    else if (key == "cfg.n_mels") m.config.n_mels = static_cast<int>(parse_int(value, key));
    else if (key == "cfg.t_min") m.config.t_min = static_cast<int>(parse_int(value, key));
    else if (key == "cfg.t_max") m.config.t_max = static_cast<int>(parse_int(value, key));
    else if (key == "cfg.video_frames") m.config.video_frames = static_cast<int>(parse_int(value, key));
    else if (key == "cfg.video_channels") m.config.video_channels = static_cast<int>(parse_int(value, key));
    else if (key == "cfg.video_size") m.config.video_size = static_cast<int>(parse_int(value, key));
    else if (key == "cfg.sigma_audio") m.config.sigma_audio = parse_double(value, key);
    else if (key == "cfg.sigma_video") m.config.sigma_video = parse_double(value, key);
    else if (key == "cfg.sigma_session") m.config.sigma_session = parse_double(value, key);
    else if (key == "cfg.missing_face_prob") m.config.missing_face_prob = parse_double(value, key);
    else if (key == "cfg.seed") m.config.seed = parse_u64(value, key);
    else if (key == "utt") {
      const std::vector<std::string> f = split_ws(value);
      if (f.size() != 8) throw DataError("manifest: utt record needs 8 fields, got '" + value + "'");
      UttRecord r;
      r.speaker_id = static_cast<int>(parse_int(f[0], "utt.speaker"));
      r.video_id = static_cast<int>(parse_int(f[1], "utt.video"));
      r.utterance_id = static_cast<int>(parse_int(f[2], "utt.id"));
      r.t_a = static_cast<int>(parse_int(f[3], "utt.t_a"));
      r.t_v = static_cast<int>(parse_int(f[4], "utt.t_v"));
      r.missing_face = parse_int(f[5], "utt.missing") != 0;
      r.audio_offset = parse_u64(f[6], "utt.audio_offset");
      r.video_offset = parse_u64(f[7], "utt.video_offset");
      m.utts.push_back(r);
    } else {
      throw DataError("manifest: unknown key '" + key + "'");
    }
  }
  if (saw_utt_count && declared_utts != m.utts.size())
    throw DataError("manifest: declared " + std::to_string(declared_utts) + " utterances, found " +
                    std::to_string(m.utts.size()));
  return m;
}

void save_dataset(const std::string& path, const Dataset& ds) {
  if (ds.samples.size() != ds.manifest.utts.size())
    throw DataError("dataset: manifest lists " + std::to_string(ds.manifest.utts.size()) +
                    " utterances but " + std::to_string(ds.samples.size()) + " samples present");
  ByteWriter w;
  w.bytes("MVSV", 4);
  w.u32(kDatasetVersion);
  const std::string manifest = manifest_to_text(ds.manifest);
  w.u64(manifest.size());
  w.str(manifest);
  uint64_t off = 0;
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const AVSample& s = ds.samples[i];
    const UttRecord& r = ds.manifest.utts[i];
    if (r.audio_offset != off)
      throw DataError("dataset: audio offset mismatch for utterance " +
                      std::to_string(r.utterance_id));
    w.f32_array(s.audio.data(), static_cast<size_t>(s.audio.size()));
    off += static_cast<uint64_t>(s.audio.size()) * 4;
    if (r.video_offset != off)
      throw DataError("dataset: video offset mismatch for utterance " +
                      std::to_string(r.utterance_id));
    w.f32_array(s.video.data(), static_cast<size_t>(s.video.size()));
    off += static_cast<uint64_t>(s.video.size()) * 4;
  }
  write_file(path, w.data());
}

Dataset load_dataset(const std::string& path) {
  const std::string bytes = read_file(path);
  ByteReader r(bytes.data(), bytes.size(), "dataset '" + path + "'");
  const std::string magic = r.str(4);
  if (magic != "MVSV")
    throw DataError("dataset '" + path + "': bad magic '" + magic + "' (expected MVSV)");
  const uint32_t version = r.u32();
  if (version != kDatasetVersion)
    throw DataError("dataset '" + path + "': unsupported format version " +
                    std::to_string(version) + " (expected " + std::to_string(kDatasetVersion) +
                    ")");
  const uint64_t mlen = r.u64();
  if (mlen > r.remaining())
    throw DataError("dataset '" + path + "': truncated manifest (need " + std::to_string(mlen) +
                    " bytes, have " + std::to_string(r.remaining()) + ")");
  Dataset ds;
  ds.manifest = manifest_from_text(r.str(static_cast<size_t>(mlen)));
  const size_t payload_start = r.pos();
  const uint64_t payload_size = bytes.size() - payload_start;

  ds.samples.reserve(ds.manifest.utts.size());
  const int pix_c = ds.manifest.video_channels, pix_s = ds.manifest.video_size;
  for (const UttRecord& rec : ds.manifest.utts) {
    if (rec.t_a < 1 || rec.t_v < 1)
      throw DataError("dataset '" + path + "': invalid frame counts for utterance " +
                      std::to_string(rec.utterance_id));
    const uint64_t audio_bytes = static_cast<uint64_t>(rec.t_a) * ds.manifest.n_mels * 4;
    const uint64_t video_bytes = static_cast<uint64_t>(rec.t_v) * pix_c * pix_s * pix_s * 4;
    if (rec.audio_offset + audio_bytes > payload_size ||
        rec.video_offset + video_bytes > payload_size)
      throw DataError("dataset '" + path + "': truncated payload at utterance " +
                      std::to_string(rec.utterance_id));
    AVSample s;
    s.speaker_id = rec.speaker_id;
    s.video_id = rec.video_id;
    s.utterance_id = rec.utterance_id;
    s.missing_face = rec.missing_face;
    Tensor<float> audio({rec.t_a, ds.manifest.n_mels});
    r.seek(payload_start + static_cast<size_t>(rec.audio_offset));
    r.f32_array(audio.data(), static_cast<size_t>(audio.size()));
    s.audio = audio;
    Tensor<float> video({rec.t_v, pix_c, pix_s, pix_s});
    r.seek(payload_start + static_cast<size_t>(rec.video_offset));
    r.f32_array(video.data(), static_cast<size_t>(video.size()));
    s.video = video;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::pair<std::vector<int>, std::vector<int>> split_train_val(const DatasetManifest& m) {
  std::map<int, int> max_video;  // speaker -> highest video id
  std::map<int, int> min_video;
  for (const UttRecord& r : m.utts) {
    auto it = max_video.find(r.speaker_id);
    if (it == max_video.end()) {
      max_video[r.speaker_id] = r.video_id;
      min_video[r.speaker_id] = r.video_id;
    } else {
      it->second = std::max(it->second, r.video_id);
      min_video[r.speaker_id] = std::min(min_video[r.speaker_id], r.video_id);
    }
  }
  for (const auto& [spk, hi] : max_video)
    if (hi == min_video[spk])
      throw DataError("split_train_val: speaker " + std::to_string(spk) +
                      " has a single video; need at least 2 for the hold-out split");
  std::vector<int> train, val;
  for (const UttRecord& r : m.utts) {
    if (r.video_id == max_video[r.speaker_id]) val.push_back(r.utterance_id);
    else train.push_back(r.utterance_id);
  }
  return {std::move(train), std::move(val)};
}

std::string cond_name(Cond c) {
  switch (c) {
    case Cond::kAA: return "AA";
    case Cond::kVV: return "VV";
    case Cond::kAVAV: return "AVAV";
    case Cond::kAVX: return "AV_X";
    case Cond::kAAV: return "A_AV";
    case Cond::kVAV: return "V_AV";
  }
  return "?";
}

Cond cond_from(const std::string& s) {
  for (Cond c : all_conditions())
    if (cond_name(c) == s) return c;
  throw DataError("unknown trial condition '" + s +
                  "' (expected AA, VV, AVAV, AV_X, A_AV or V_AV)");
}

std::vector<TrialPair> sample_trials(const std::vector<UttRecord>& test_utts, uint64_t seed,
                                     Cond condition) {
  // Speaker roster in sorted order; utterances per speaker in list order.
  std::map<int, std::vector<int>> by_speaker;
  for (const UttRecord& r : test_utts) by_speaker[r.speaker_id].push_back(r.utterance_id);
  if (by_speaker.size() < 2)
    throw DataError("sample_trials: need at least 2 speakers, got " +
                    std::to_string(by_speaker.size()));
  for (const auto& [spk, utts] : by_speaker)
    if (utts.size() < 2)
      throw DataError("sample_trials: speaker " + std::to_string(spk) +
                      " has a single test utterance; positives need a partner");
  std::vector<int> speakers;
  for (const auto& [spk, utts] : by_speaker) speakers.push_back(spk);

  Rng rng = Rng::stream(seed, 0);
  std::vector<TrialPair> trials;
  trials.reserve(test_utts.size() * 2);
  for (const UttRecord& r : test_utts) {
    const std::vector<int>& same = by_speaker[r.speaker_id];
    // Positive: uniform over the speaker's other utterances.
    int pick = static_cast<int>(rng.uniform_int(same.size() - 1));
    for (int u : same) {
      if (u == r.utterance_id) continue;
      if (pick == 0) {
        trials.push_back({true, r.utterance_id, u, condition});
        break;
      }
      --pick;
    }
    // Negative: speaker first, then utterance (two-stage draw).
    int spick = static_cast<int>(rng.uniform_int(speakers.size() - 1));
    int other = -1;
    for (int spk : speakers) {
      if (spk == r.speaker_id) continue;
      if (spick == 0) {
        other = spk;
        break;
      }
      --spick;
    }
    const std::vector<int>& theirs = by_speaker[other];
    const int neg = theirs[rng.uniform_int(theirs.size())];
    trials.push_back({false, r.utterance_id, neg, condition});
  }
  return trials;
}

std::vector<TrialPair> retag_trials(const std::vector<TrialPair>& trials, Cond condition) {
  std::vector<TrialPair> out = trials;
  for (TrialPair& t : out) t.condition = condition;
  return out;
}

void write_trials(const std::string& path, const std::vector<TrialPair>& trials) {
  std::ostringstream ss;
  for (const TrialPair& t : trials)
    ss << (t.target ? 1 : 0) << "\t" << t.enrol_id << "\t" << t.test_id << "\t"
       << cond_name(t.condition) << "\n";
  write_file(path, ss.str());
}

std::vector<TrialPair> read_trials(const std::string& path) {
  const std::string text = read_file(path);
  std::vector<TrialPair> trials;
  std::istringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    std::istringstream f(line);
    std::string label, enrol, test, cond;
    if (!(f >> label >> enrol >> test >> cond))
      throw DataError("trials '" + path + "' line " + std::to_string(lineno) +
                      ": need 'label enrol test condition'");
    TrialPair t;
    if (label == "1") t.target = true;
    else if (label == "0") t.target = false;
    else
      throw DataError("trials '" + path + "' line " + std::to_string(lineno) + ": bad label '" +
                      label + "'");
    t.enrol_id = static_cast<int>(parse_int(enrol, "trial enrol id"));
    t.test_id = static_cast<int>(parse_int(test, "trial test id"));
    t.condition = cond_from(cond);
    if (t.enrol_id == t.test_id)
      throw DataError("trials '" + path + "' line " + std::to_string(lineno) +
                      ": self-pair " + std::to_string(t.enrol_id));
    trials.push_back(t);
  }
  return trials;
}

}  // namespace mvsv
