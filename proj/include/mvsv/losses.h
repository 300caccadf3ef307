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
// Additive-angular-margin (arc-margin) softmax loss.

#ifndef MVSV_LOSSES_H_
#define MVSV_LOSSES_H_

#include <cmath>
#include <vector>

#include "mvsv/error.h"
#include "mvsv/ops.h"
#include "mvsv/tensor.h"

namespace mvsv {

struct ArcConfig {
  double scale = 30.0;  // s, logit scale after normalization
  double margin = 0.2;  // m, additive angle margin in radians

  void validate() const {
    if (scale <= 0.0) throw ConfigError("arc scale must be positive");
    if (margin < 0.0 || margin >= 1.5707963267948966)
      throw ConfigError("arc margin must be in [0, pi/2)");
  }
};

// Cosine clamp bounds: keep theta = acos(c) differentiable at the target.
inline constexpr double kArcCosLo = -1.0 + 1e-7;
inline constexpr double kArcCosHi = 1.0 - 1e-7;

// cos: N x K cosine logits. For the label column the angle is shifted by m:
// s * cos(theta_y + m) = s * (c cos m - sqrt(1 - c^2) sin m) with c clamped
// to [-1 + 1e-7, 1 - 1e-7]; all other columns are plain s * cos.
template <typename S>
Tensor<S> arc_margin_logits(const Tensor<S>& cos, const std::vector<int>& labels, double s,
                            double m, Tape<S>* tape = nullptr) {
  cos.require_rank(2, "arc_margin_logits");
  const int64_t n = cos.dim(0), k = cos.dim(1);
  if (static_cast<int64_t>(labels.size()) != n)
    throw DimensionError("arc_margin_logits: " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(n));
  for (int y : labels)
    if (y < 0 || y >= k)
      throw DimensionError("arc_margin_logits: label " + std::to_string(y) +
                           " out of range [0, " + std::to_string(k) + ")");
  const double cos_m = std::cos(m), sin_m = std::sin(m);
  Tensor<S> out(cos.shape());
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < k; ++j) {
      const double c = static_cast<double>(cos.data()[i * k + j]);
      if (j == labels[i]) {
        const double cc = std::min(std::max(c, kArcCosLo), kArcCosHi);
        out.data()[i * k + j] = static_cast<S>(s * (cc * cos_m - std::sqrt(1.0 - cc * cc) * sin_m));
      } else {
        out.data()[i * k + j] = static_cast<S>(s * c);
      }
    }
  if (detail::want_record(tape, {&cos})) {
    out.set_requires_grad(true);
    tape->record(out.id(), {cos.id()}, [cos, out, labels, s, cos_m, sin_m, n, k]() mutable {
      if (!out.has_grad()) return;
      S* gc = cos.grad().data();
      const S* gy = out.grad().data();
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < k; ++j) {
          if (j != labels[i]) {
            gc[i * k + j] += gy[i * k + j] * static_cast<S>(s);
            continue;
          }
          const double c = static_cast<double>(cos.data()[i * k + j]);
          // Outside the clamp the target logit is constant in c.
          if (c <= kArcCosLo || c >= kArcCosHi) continue;
          const double d = s * (cos_m + c * sin_m / std::sqrt(1.0 - c * c));
          gc[i * k + j] += gy[i * k + j] * static_cast<S>(d);
        }
    });
  }
  return out;
}

// Full arc-margin objective: normalize embeddings and class weights, take
// cosines against every class row, apply the margin, mean cross-entropy.
template <typename S>
Tensor<S> arc_margin_loss(const Tensor<S>& emb, const Tensor<S>& weights,
                          const std::vector<int>& labels, const ArcConfig& cfg,
                          Tape<S>* tape = nullptr) {
  cfg.validate();
  emb.require_rank(2, "arc_margin_loss emb");
  weights.require_rank(2, "arc_margin_loss weights");
  if (emb.dim(1) != weights.dim(1))
    throw DimensionError("arc_margin_loss: embedding dim " + std::to_string(emb.dim(1)) +
                         " vs class weight dim " + std::to_string(weights.dim(1)));
  Tensor<S> cos = matmul_nt(l2_normalize(emb, tape), l2_normalize(weights, tape), tape);
  Tensor<S> logits = arc_margin_logits(cos, labels, cfg.scale, cfg.margin, tape);
  return cross_entropy_mean(logits, labels, tape);
}

// Weighted sum of the two per-modality losses (multi-view training).
template <typename S>
Tensor<S> multitask_loss(const Tensor<S>& loss_a, const Tensor<S>& loss_v, double lambda_a,
                         double lambda_v, Tape<S>* tape = nullptr) {
  return add(scale(loss_a, lambda_a, tape), scale(loss_v, lambda_v, tape), tape);
}

}  // namespace mvsv

#endif  // MVSV_LOSSES_H_
