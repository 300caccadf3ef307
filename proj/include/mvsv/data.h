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
// Synthetic paired audio-visual dataset with shared latent identities,
// train/validation split, verification trial sampling, and the MVSV binary
// dataset format.

#ifndef MVSV_DATA_H_
#define MVSV_DATA_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mvsv/error.h"
#include "mvsv/tensor.h"

namespace mvsv {

// One utterance: paired audio frames and video frames from one recording
// session (video_id) of one speaker. missing_face mimics a failed face
// detection: the video is then a single all-zero frame.
template <typename S>
struct BasicAVSample {
  int speaker_id = -1;
  int video_id = -1;
  int utterance_id = -1;
  bool missing_face = false;
  Tensor<S> audio;  // T_a x n_mels
  Tensor<S> video;  // T_v x C x H x W
};

using AVSample = BasicAVSample<float>;

struct SynthConfig {
  int num_speakers = 32;
  int videos_per_speaker = 4;
  int utts_per_video = 4;
  int latent_dim = 16;  // k, shared identity dimension
  int n_mels = 64;
  int t_min = 80;  // audio frame-count range, inclusive
  int t_max = 120;
  int video_frames = 4;  // T_v when the face is present
  int video_channels = 3;
  int video_size = 16;  // square frames
  double sigma_audio = 0.3;
  double sigma_video = 0.2;
  double sigma_session = 0.3;  // per-utterance audio offset scale
  double missing_face_prob = 0.02;
  uint64_t seed = 7;

  int pixels_per_frame() const { return video_channels * video_size * video_size; }
  int utts_per_speaker() const { return videos_per_speaker * utts_per_video; }
  int total_utts() const { return num_speakers * utts_per_speaker(); }

  void validate() const {
    if (num_speakers < 1) throw ConfigError("synth.num_speakers must be >= 1");
    if (videos_per_speaker < 2)
      throw ConfigError("synth.videos_per_speaker must be >= 2 (hold-out split needs a spare)");
    if (utts_per_video < 1) throw ConfigError("synth.utts_per_video must be >= 1");
    if (latent_dim < 1) throw ConfigError("synth.latent_dim must be >= 1");
    if (n_mels < 1) throw ConfigError("synth.n_mels must be >= 1");
    if (t_min < 1) throw ConfigError("synth.t_min must be >= 1");
    if (t_max < t_min) throw ConfigError("synth.t_max must be >= synth.t_min");
    if (video_frames < 1) throw ConfigError("synth.video_frames must be >= 1");
    if (video_channels < 1 || video_size < 1)
      throw ConfigError("synth video geometry must be positive");
    if (sigma_audio < 0 || sigma_video < 0 || sigma_session < 0)
      throw ConfigError("synth noise scales must be nonnegative");
    if (missing_face_prob < 0.0 || missing_face_prob > 1.0)
      throw ConfigError("synth.missing_face_prob must be in [0, 1]");
  }
};

// Per-utterance directory entry. Offsets are bytes into the payload section
// of the dataset file; audio and video tensors are float32 little-endian.
struct UttRecord {
  int speaker_id = -1;
  int video_id = -1;
  int utterance_id = -1;
  int t_a = 0;
  int t_v = 0;
  bool missing_face = false;
  uint64_t audio_offset = 0;
  uint64_t video_offset = 0;
};

struct DatasetManifest {
  int num_speakers = 0;
  int n_mels = 0;
  int video_channels = 0;
  int video_size = 0;
  SynthConfig config;  // generator echo
  std::vector<UttRecord> utts;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<AVSample> samples;  // aligned with manifest.utts; index == utterance_id

  const AVSample& by_id(int utterance_id) const {
    if (utterance_id < 0 || utterance_id >= static_cast<int>(samples.size()) ||
        samples[static_cast<size_t>(utterance_id)].utterance_id != utterance_id)
      throw DataError("dataset has no utterance " + std::to_string(utterance_id));
    return samples[static_cast<size_t>(utterance_id)];
  }
};

// Deterministic generation from (config, seed); speakers are generated on
// independent derived RNG streams so thread count never changes the output.
Dataset gen_synthetic(const SynthConfig& cfg, int threads = 1);

// MVSV binary format: magic, version, length-prefixed manifest text, float32
// little-endian payload. Load/save roundtrips are bit-exact.
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

std::string manifest_to_text(const DatasetManifest& m);
DatasetManifest manifest_from_text(const std::string& text);

// Hold out each speaker's highest video_id (all its utterances) for
// validation; the rest train. Returns utterance-id lists.
std::pair<std::vector<int>, std::vector<int>> split_train_val(const DatasetManifest& m);

// Verification trial conditions. The last three exist only in a multiview
// shared space: audio vs video, and single modality vs averaged embeddings.
enum class Cond { kAA, kVV, kAVAV, kAVX, kAAV, kVAV };

inline const std::vector<Cond>& all_conditions() {
  static const std::vector<Cond> kAll = {Cond::kAA,  Cond::kVV,  Cond::kAVAV,
                                         Cond::kAVX, Cond::kAAV, Cond::kVAV};
  return kAll;
}

std::string cond_name(Cond c);
Cond cond_from(const std::string& s);

struct TrialPair {
  bool target = false;  // same speaker?
  int enrol_id = -1;
  int test_id = -1;
  Cond condition = Cond::kAA;
};

// One positive and one negative per test utterance. The positive partner is
// uniform over the speaker's other utterances; the negative is drawn
// speaker-first (uniform other speaker, then uniform utterance of that
// speaker). All trials carry `condition`.
std::vector<TrialPair> sample_trials(const std::vector<UttRecord>& test_utts, uint64_t seed,
                                     Cond condition = Cond::kAA);

std::vector<TrialPair> retag_trials(const std::vector<TrialPair>& trials, Cond condition);

// Trial list file: "label<TAB>enrol<TAB>test<TAB>condition", label 1|0.
void write_trials(const std::string& path, const std::vector<TrialPair>& trials);
std::vector<TrialPair> read_trials(const std::string& path);

}  // namespace mvsv

#endif  // MVSV_DATA_H_
