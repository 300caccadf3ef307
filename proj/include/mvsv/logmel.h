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
// Logmel front-end for real waveforms: 25 ms periodic Hann window, 10 ms
// hop, magnitude STFT (naive DFT, zero-padded to the next power of two),
// HTK-scale triangular mel filters spanning 0..sr/2, log(x + 1e-10).

#ifndef MVSV_LOGMEL_H_
#define MVSV_LOGMEL_H_

#include <string>
#include <vector>

#include "mvsv/tensor.h"

namespace mvsv {

// HTK mel scale.
inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// T x n_mels log mel-filterbank features; T = 1 + floor((N - win) / hop).
Tensor<float> wav_to_logmel(const std::vector<double>& waveform, int sample_rate,
                            int n_mels = 64);

// 16-bit PCM mono RIFF/WAVE. Samples scaled to [-1, 1).
std::vector<double> parse_wav_mono16(const std::string& bytes, int* sample_rate,
                                     const std::string& what);
std::vector<double> read_wav_mono16(const std::string& path, int* sample_rate);
std::string make_wav_mono16(const std::vector<double>& samples, int sample_rate);

}  // namespace mvsv

#endif  // MVSV_LOGMEL_H_
