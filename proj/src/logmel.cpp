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

#include "mvsv/logmel.h"

#include <cmath>
#include <cstdint>

#include "mvsv/error.h"
#include "mvsv/io.h"

namespace mvsv {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLogFloor = 1e-10;

int next_pow2(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

}  // namespace

Tensor<float> wav_to_logmel(const std::vector<double>& waveform, int sample_rate, int n_mels) {
  if (sample_rate < 8000)
    throw DataError("wav_to_logmel: sample rate " + std::to_string(sample_rate) +
                    " below the 8 kHz minimum");
  if (n_mels < 1) throw ConfigError("wav_to_logmel: n_mels must be >= 1");
  const int win = static_cast<int>(std::lround(0.025 * sample_rate));
  const int hop = static_cast<int>(std::lround(0.010 * sample_rate));
  const int64_t n = static_cast<int64_t>(waveform.size());
  if (n < win)
    throw DataError("wav_to_logmel: waveform of " + std::to_string(n) +
                    " samples is shorter than one " + std::to_string(win) + "-sample window");
  const int nfft = next_pow2(win);
  const int nbins = nfft / 2 + 1;
  const int64_t frames = 1 + (n - win) / hop;

  // Periodic Hann.
  std::vector<double> window(static_cast<size_t>(win));
  for (int i = 0; i < win; ++i) window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / win);

  // One period of twiddles; bin k sample t uses index (k*t) mod nfft.
  std::vector<double> tw_cos(static_cast<size_t>(nfft)), tw_sin(static_cast<size_t>(nfft));
  for (int j = 0; j < nfft; ++j) {
    tw_cos[j] = std::cos(2.0 * kPi * j / nfft);
    tw_sin[j] = std::sin(2.0 * kPi * j / nfft);
  }

  // Triangular mel filters on n_mels + 2 equally spaced mel points over
  // [0, sr/2], evaluated at the DFT bin frequencies.
  std::vector<double> mel_pts(static_cast<size_t>(n_mels) + 2);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  for (int m = 0; m < n_mels + 2; ++m) mel_pts[m] = mel_to_hz(mel_hi * m / (n_mels + 1));
  std::vector<std::vector<double>> filt(static_cast<size_t>(n_mels),
                                        std::vector<double>(static_cast<size_t>(nbins), 0.0));
  for (int m = 0; m < n_mels; ++m) {
    const double lo = mel_pts[m], mid = mel_pts[m + 1], hi = mel_pts[m + 2];
    for (int k = 0; k < nbins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / nfft;
      if (f > lo && f < mid) filt[m][k] = (f - lo) / (mid - lo);
      else if (f == mid) filt[m][k] = 1.0;
      else if (f > mid && f < hi) filt[m][k] = (hi - f) / (hi - mid);
    }
  }

  Tensor<float> out({frames, n_mels});
  std::vector<double> buf(static_cast<size_t>(win));
  std::vector<double> mag(static_cast<size_t>(nbins));
  for (int64_t t = 0; t < frames; ++t) {
    const double* src = waveform.data() + t * hop;
    for (int i = 0; i < win; ++i) buf[i] = src[i] * window[i];
    for (int k = 0; k < nbins; ++k) {
      double re = 0.0, im = 0.0;
      for (int i = 0; i < win; ++i) {
        const int idx = static_cast<int>((static_cast<int64_t>(k) * i) % nfft);
        re += buf[i] * tw_cos[idx];
        im -= buf[i] * tw_sin[idx];
      }
      mag[k] = std::sqrt(re * re + im * im);
    }
    for (int m = 0; m < n_mels; ++m) {
      double acc = 0.0;
      for (int k = 0; k < nbins; ++k) acc += filt[m][k] * mag[k];
      out.data()[t * n_mels + m] = static_cast<float>(std::log(acc + kLogFloor));
    }
  }
  return out;
}

std::vector<double> parse_wav_mono16(const std::string& bytes, int* sample_rate,
                                     const std::string& what) {
  ByteReader r(bytes.data(), bytes.size(), what);
  if (r.str(4) != "RIFF") throw DataError(what + ": not a RIFF file");
  r.u32();  // declared riff size; trust the actual byte count instead
  if (r.str(4) != "WAVE") throw DataError(what + ": not a WAVE file");

  bool have_fmt = false;
  int channels = 0, bits = 0, rate = 0;
  std::vector<double> samples;
  bool have_data = false;
  while (r.remaining() >= 8) {
    const std::string id = r.str(4);
    const uint32_t size = r.u32();
    if (size > r.remaining()) throw DataError(what + ": truncated '" + id + "' chunk");
    if (id == "fmt ") {
      if (size < 16) throw DataError(what + ": fmt chunk too small");
      const size_t end = r.pos() + size + (size % 2);
      const uint16_t format = r.u16();
      channels = r.u16();
      rate = static_cast<int>(r.u32());
      r.u32();  // byte rate
      r.u16();  // block align
      bits = r.u16();
      if (format != 1) throw DataError(what + ": only PCM (format 1) supported, got format " +
                                       std::to_string(format));
      have_fmt = true;
      r.seek(end);
    } else if (id == "data") {
      if (!have_fmt) throw DataError(what + ": data chunk before fmt chunk");
      if (channels != 1)
        throw DataError(what + ": expected mono, got " + std::to_string(channels) + " channels");
      if (bits != 16)
        throw DataError(what + ": expected 16-bit PCM, got " + std::to_string(bits) + " bits");
      const size_t count = size / 2;
      samples.resize(count);
      for (size_t i = 0; i < count; ++i)
        samples[i] = static_cast<double>(static_cast<int16_t>(r.u16())) / 32768.0;
      if (size % 2 == 1) r.u8();
      have_data = true;
    } else {
      r.seek(r.pos() + size + (size % 2));  // skip unknown chunk, word-aligned
    }
  }
  if (!have_fmt || !have_data) throw DataError(what + ": missing fmt or data chunk");
  *sample_rate = rate;
  return samples;
}

std::vector<double> read_wav_mono16(const std::string& path, int* sample_rate) {
  return parse_wav_mono16(read_file(path), sample_rate, "wav '" + path + "'");
}

std::string make_wav_mono16(const std::vector<double>& samples, int sample_rate) {
  ByteWriter w;
  const uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
  w.str("RIFF");
  w.u32(36 + data_bytes);
  w.str("WAVE");
  w.str("fmt ");
  w.u32(16);
  w.u16(1);   // PCM
  w.u16(1);   // mono
  w.u32(static_cast<uint32_t>(sample_rate));
  w.u32(static_cast<uint32_t>(sample_rate) * 2);  // byte rate
  w.u16(2);   // block align
  w.u16(16);  // bits per sample
  w.str("data");
  w.u32(data_bytes);
  for (double s : samples) {
    double v = s * 32768.0;
    if (v > 32767.0) v = 32767.0;
    if (v < -32768.0) v = -32768.0;
    w.u16(static_cast<uint16_t>(static_cast<int16_t>(std::lround(v))));
  }
  return w.data();
}

}  // namespace mvsv
