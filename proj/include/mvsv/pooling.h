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
// Sequence-to-vector pooling. Both functions take a T x D sequence and
// return a 1 x D row so callers can stack pooled outputs into a batch.

#ifndef MVSV_POOLING_H_
#define MVSV_POOLING_H_

#include "mvsv/ops.h"
#include "mvsv/tensor.h"

namespace mvsv {

// Additive self-attention: alpha = softmax_t(v' tanh(W h_t + b)), output is
// the alpha-weighted sum of the rows. W: D x A, b: A, v: A x 1.
template <typename S>
Tensor<S> attentive_pool(const Tensor<S>& seq, const Tensor<S>& W, const Tensor<S>& b,
                         const Tensor<S>& v, Tape<S>* tape = nullptr) {
  seq.require_rank(2, "attentive_pool seq");
  v.require_rank(2, "attentive_pool v");
  if (seq.dim(0) < 1) throw DimensionError("attentive_pool: empty sequence");
  const int64_t t = seq.dim(0);
  Tensor<S> scores = tanh(linear(seq, W, b, tape), tape);       // T x A
  Tensor<S> energy = matmul(scores, v, tape);                   // T x 1
  Tensor<S> alpha = softmax(reshape(energy, {1, t}, tape), tape);  // 1 x T
  return matmul(alpha, seq, tape);                              // 1 x D
}

// Uniform mean over time, written as a matmul with a constant 1/T row so the
// backward pass falls out of the existing matmul rule.
template <typename S>
Tensor<S> temporal_pool(const Tensor<S>& seq, Tape<S>* tape = nullptr) {
  seq.require_rank(2, "temporal_pool seq");
  const int64_t t = seq.dim(0);
  if (t < 1) throw DimensionError("temporal_pool: empty sequence");
  Tensor<S> weights = Tensor<S>::full({1, t}, static_cast<S>(1.0 / static_cast<double>(t)));
  return matmul(weights, seq, tape);
}

}  // namespace mvsv

#endif  // MVSV_POOLING_H_
