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
// Reverse-mode primitives over Tensor<Scalar>. Every op validates shapes,
// computes the forward value, and (when a tape is supplied and some input
// wants gradients) records a backward closure. Matrix products go through
// Eigen; reductions are explicit fixed-order loops so that results are
// reproducible bit-for-bit run to run.

#ifndef MVSV_OPS_H_
#define MVSV_OPS_H_

#include <cmath>
#include <cstdint>
#include <vector>

#include "mvsv/rng.h"
#include "mvsv/tensor.h"

namespace mvsv {

enum class Mode { kTrain, kInfer };

namespace detail {

template <typename S>
inline bool want_record(const Tape<S>* tape, std::initializer_list<const Tensor<S>*> inputs) {
  if (tape == nullptr) return false;
  for (const Tensor<S>* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Affine / matrix products
// ---------------------------------------------------------------------------

// out[n,j] = sum_d x[n,d] * W[d,j] + b[j]
template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& W, const Tensor<S>& b,
                 Tape<S>* tape = nullptr) {
  x.require_rank(2, "linear x");
  W.require_rank(2, "linear W");
  b.require_rank(1, "linear b");
  const int64_t n = x.dim(0), d_in = x.dim(1), d_out = W.dim(1);
  if (W.dim(0) != d_in || b.dim(0) != d_out)
    throw DimensionError("linear: x " + shape_str(x.shape()) + " W " + shape_str(W.shape()) +
                         " b " + shape_str(b.shape()) + " do not compose");
  Tensor<S> out({n, d_out});
  out.mat().noalias() = x.mat() * W.mat();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < d_out; ++j) out.data()[i * d_out + j] += b.data()[j];
  if (detail::want_record(tape, {&x, &W, &b})) {
    out.set_requires_grad(true);
    tape->record(out.id(), {x.id(), W.id(), b.id()}, [x, W, b, out, n, d_in, d_out]() mutable {
      if (!out.has_grad()) return;
      auto d_y = out.grad_mat_as(n, d_out);
      if (x.requires_grad()) x.grad_mat_as(n, d_in).noalias() += d_y * W.mat().transpose();
      if (W.requires_grad()) W.grad_mat_as(d_in, d_out).noalias() += x.mat().transpose() * d_y;
      if (b.requires_grad()) {
        S* gb = b.grad().data();
        for (int64_t i = 0; i < n; ++i)
          for (int64_t j = 0; j < d_out; ++j) gb[j] += d_y(i, j);
      }
    });
  }
  return out;
}

// out = a * b, a: N x T, b: T x D
template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b, Tape<S>* tape = nullptr) {
  a.require_rank(2, "matmul a");
  b.require_rank(2, "matmul b");
  const int64_t n = a.dim(0), t = a.dim(1), d = b.dim(1);
  if (b.dim(0) != t)
    throw DimensionError("matmul: inner dims " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  Tensor<S> out({n, d});
  out.mat().noalias() = a.mat() * b.mat();
  if (detail::want_record(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record(out.id(), {a.id(), b.id()}, [a, b, out, n, t, d]() mutable {
      if (!out.has_grad()) return;
      auto d_y = out.grad_mat_as(n, d);
      if (a.requires_grad()) a.grad_mat_as(n, t).noalias() += d_y * b.mat().transpose();
      if (b.requires_grad()) b.grad_mat_as(t, d).noalias() += a.mat().transpose() * d_y;
    });
  }
  return out;
}

// out = a * b^T, a: N x D, b: K x D. Cosine-logit shape: one row of b per class.
template <typename S>
Tensor<S> matmul_nt(const Tensor<S>& a, const Tensor<S>& b, Tape<S>* tape = nullptr) {
  a.require_rank(2, "matmul_nt a");
  b.require_rank(2, "matmul_nt b");
  const int64_t n = a.dim(0), d = a.dim(1), k = b.dim(0);
  if (b.dim(1) != d)
    throw DimensionError("matmul_nt: feature dims " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  Tensor<S> out({n, k});
  out.mat().noalias() = a.mat() * b.mat().transpose();
  if (detail::want_record(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record(out.id(), {a.id(), b.id()}, [a, b, out, n, d, k]() mutable {
      if (!out.has_grad()) return;
      auto d_y = out.grad_mat_as(n, k);
      if (a.requires_grad()) a.grad_mat_as(n, d).noalias() += d_y * b.mat();
      if (b.requires_grad()) b.grad_mat_as(k, d).noalias() += d_y.transpose() * a.mat();
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

enum class EwKind { kRelu, kTanh, kAdd, kMul, kScale };

template <typename S>
Tensor<S> relu(const Tensor<S>& x, Tape<S>* tape = nullptr) {
  Tensor<S> out(x.shape());
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] > S(0) ? x.data()[i] : S(0);
  if (detail::want_record(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out.id(), {x.id()}, [x, out, n]() mutable {
      if (!out.has_grad()) return;
      S* gx = x.grad().data();
      const S* gy = out.grad().data();
      // relu'(0) = 0
      for (int64_t i = 0; i < n; ++i)
        if (x.data()[i] > S(0)) gx[i] += gy[i];
    });
  }
  return out;
}

template <typename S>
Tensor<S> tanh(const Tensor<S>& x, Tape<S>* tape = nullptr) {
  Tensor<S> out(x.shape());
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = std::tanh(x.data()[i]);
  if (detail::want_record(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out.id(), {x.id()}, [x, out, n]() mutable {
      if (!out.has_grad()) return;
      S* gx = x.grad().data();
      const S* gy = out.grad().data();
      for (int64_t i = 0; i < n; ++i) {
        const S y = out.data()[i];
        gx[i] += gy[i] * (S(1) - y * y);
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b, Tape<S>* tape = nullptr) {
  if (a.shape() != b.shape())
    throw DimensionError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  Tensor<S> out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (detail::want_record(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record(out.id(), {a.id(), b.id()}, [a, b, out, n]() mutable {
      if (!out.has_grad()) return;
      const S* gy = out.grad().data();
      if (a.requires_grad()) {
        S* ga = a.grad().data();
        for (int64_t i = 0; i < n; ++i) ga[i] += gy[i];
      }
      if (b.requires_grad()) {
        S* gb = b.grad().data();
        for (int64_t i = 0; i < n; ++i) gb[i] += gy[i];
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b, Tape<S>* tape = nullptr) {
  if (a.shape() != b.shape())
    throw DimensionError("mul: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  Tensor<S> out(a.shape());
  const int64_t n = a.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (detail::want_record(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->record(out.id(), {a.id(), b.id()}, [a, b, out, n]() mutable {
      if (!out.has_grad()) return;
      const S* gy = out.grad().data();
      if (a.requires_grad()) {
        S* ga = a.grad().data();
        for (int64_t i = 0; i < n; ++i) ga[i] += gy[i] * b.data()[i];
      }
      if (b.requires_grad()) {
        S* gb = b.grad().data();
        for (int64_t i = 0; i < n; ++i) gb[i] += gy[i] * a.data()[i];
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> scale(const Tensor<S>& x, double c, Tape<S>* tape = nullptr) {
  Tensor<S> out(x.shape());
  const S sc = static_cast<S>(c);
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * sc;
  if (detail::want_record(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out.id(), {x.id()}, [x, out, sc, n]() mutable {
      if (!out.has_grad()) return;
      S* gx = x.grad().data();
      const S* gy = out.grad().data();
      for (int64_t i = 0; i < n; ++i) gx[i] += gy[i] * sc;
    });
  }
  return out;
}

// Enum-dispatch form for the unary kinds.
template <typename S>
Tensor<S> elementwise(const Tensor<S>& x, EwKind kind, Tape<S>* tape = nullptr) {
  switch (kind) {
    case EwKind::kRelu: return relu(x, tape);
    case EwKind::kTanh: return tanh(x, tape);
    default: throw DimensionError("elementwise: kind needs two operands");
  }
}

// Enum-dispatch form for the binary kinds.
template <typename S>
Tensor<S> elementwise(const Tensor<S>& a, const Tensor<S>& b, EwKind kind,
                      Tape<S>* tape = nullptr) {
  switch (kind) {
    case EwKind::kAdd: return add(a, b, tape);
    case EwKind::kMul: return mul(a, b, tape);
    default: throw DimensionError("elementwise: kind needs one operand");
  }
}

// ---------------------------------------------------------------------------
// Normalizations and reductions
// ---------------------------------------------------------------------------

// Row-wise softmax with max subtraction, x: N x K.
template <typename S>
Tensor<S> softmax(const Tensor<S>& x, Tape<S>* tape = nullptr) {
  x.require_rank(2, "softmax");
  const int64_t n = x.dim(0), k = x.dim(1);
  Tensor<S> out(x.shape());
  for (int64_t i = 0; i < n; ++i) {
    const S* row = x.data() + i * k;
    S* orow = out.data() + i * k;
    S m = row[0];
    for (int64_t j = 1; j < k; ++j) m = std::max(m, row[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < k; ++j) {
      orow[j] = std::exp(row[j] - m);
      sum += static_cast<double>(orow[j]);
    }
    const S inv = static_cast<S>(1.0 / sum);
    for (int64_t j = 0; j < k; ++j) orow[j] *= inv;
  }
  if (detail::want_record(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out.id(), {x.id()}, [x, out, n, k]() mutable {
      if (!out.has_grad()) return;
      S* gx = x.grad().data();
      const S* gy = out.grad().data();
      for (int64_t i = 0; i < n; ++i) {
        const S* y = out.data() + i * k;
        double dot = 0.0;
        for (int64_t j = 0; j < k; ++j) dot += static_cast<double>(gy[i * k + j]) * y[j];
        for (int64_t j = 0; j < k; ++j)
          gx[i * k + j] += y[j] * (gy[i * k + j] - static_cast<S>(dot));
      }
    });
  }
  return out;
}

// Row-wise L2 normalization with a 1e-12 norm floor; zero rows map to zero.
template <typename S>
Tensor<S> l2_normalize(const Tensor<S>& x, Tape<S>* tape = nullptr) {
  x.require_rank(2, "l2_normalize");
  const int64_t n = x.dim(0), d = x.dim(1);
  Tensor<S> out(x.shape());
  std::vector<S> inv_norm(static_cast<size_t>(n));
  std::vector<uint8_t> floored(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const S* row = x.data() + i * d;
    double ss = 0.0;
    for (int64_t j = 0; j < d; ++j) ss += static_cast<double>(row[j]) * row[j];
    const double norm = std::sqrt(ss);
    floored[i] = norm < 1e-12 ? 1 : 0;
    const double denom = std::max(norm, 1e-12);
    inv_norm[i] = static_cast<S>(1.0 / denom);
    for (int64_t j = 0; j < d; ++j) out.data()[i * d + j] = row[j] * inv_norm[i];
  }
  if (detail::want_record(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out.id(), {x.id()},
                 [x, out, inv_norm = std::move(inv_norm), floored = std::move(floored), n,
                  d]() mutable {
                   if (!out.has_grad()) return;
                   S* gx = x.grad().data();
                   const S* gy = out.grad().data();
                   for (int64_t i = 0; i < n; ++i) {
                     const S* y = out.data() + i * d;
                     if (floored[i]) {
                       // y = x / 1e-12, a constant scale
                       for (int64_t j = 0; j < d; ++j) gx[i * d + j] += gy[i * d + j] * inv_norm[i];
                       continue;
                     }
                     double dot = 0.0;
                     for (int64_t j = 0; j < d; ++j)
                       dot += static_cast<double>(gy[i * d + j]) * y[j];
                     for (int64_t j = 0; j < d; ++j)
                       gx[i * d + j] +=
                           (gy[i * d + j] - y[j] * static_cast<S>(dot)) * inv_norm[i];
                   }
                 });
  }
  return out;
}

// Sum of all elements; the usual test-loss reduction.
template <typename S>
Tensor<S> sum(const Tensor<S>& x, Tape<S>* tape = nullptr) {
  double acc = 0.0;
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) acc += static_cast<double>(x.data()[i]);
  Tensor<S> out = Tensor<S>::scalar(static_cast<S>(acc));
  if (detail::want_record(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out.id(), {x.id()}, [x, out, n]() mutable {
      if (!out.has_grad()) return;
      const S g = out.grad()[0];
      S* gx = x.grad().data();
      for (int64_t i = 0; i < n; ++i) gx[i] += g;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

// Valid (unpadded) 2-D cross-correlation with stride. x: N x C x H x W,
// k: C' x C x kh x kw. Implemented as im2col + GEMM per sample.
template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& k, int stride, Tape<S>* tape = nullptr) {
  x.require_rank(4, "conv2d x");
  k.require_rank(4, "conv2d k");
  if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
  const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int64_t c_out = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  if (k.dim(1) != c)
    throw DimensionError("conv2d: channel mismatch x " + shape_str(x.shape()) + " k " +
                         shape_str(k.shape()));
  if (kh > h || kw > w)
    throw DimensionError("conv2d: kernel " + shape_str(k.shape()) + " larger than input " +
                         shape_str(x.shape()));
  const int64_t h_out = (h - kh) / stride + 1;
  const int64_t w_out = (w - kw) / stride + 1;
  const int64_t patch = c * kh * kw;
  const int64_t hw_out = h_out * w_out;

  Tensor<S> out({n, c_out, h_out, w_out});
  auto k_mat = k.mat_as(c_out, patch);

  // One patch matrix per sample: rows are output positions, columns are the
  // flattened receptive field. Kept for the backward pass when recording.
  std::vector<std::vector<S>> cols_all(static_cast<size_t>(n));
  for (int64_t s = 0; s < n; ++s) {
    std::vector<S>& cols = cols_all[static_cast<size_t>(s)];
    cols.resize(static_cast<size_t>(hw_out * patch));
    const S* xs = x.data() + s * c * h * w;
    for (int64_t i = 0; i < h_out; ++i)
      for (int64_t j = 0; j < w_out; ++j) {
        S* dst = cols.data() + (i * w_out + j) * patch;
        for (int64_t cc = 0; cc < c; ++cc)
          for (int64_t u = 0; u < kh; ++u) {
            const S* src = xs + cc * h * w + (i * stride + u) * w + j * stride;
            for (int64_t v = 0; v < kw; ++v) dst[cc * kh * kw + u * kw + v] = src[v];
          }
      }
    ConstMatMap<S> cols_m(cols.data(), hw_out, patch);
    MatMap<S> out_m(out.data() + s * c_out * hw_out, c_out, hw_out);
    out_m.noalias() = k_mat * cols_m.transpose();
  }

  if (detail::want_record(tape, {&x, &k})) {
    out.set_requires_grad(true);
    tape->record(
        out.id(), {x.id(), k.id()},
        [x, k, out, cols_all = std::move(cols_all), stride, n, c, h, w, c_out, kh, kw, h_out,
         w_out, patch, hw_out]() mutable {
          if (!out.has_grad()) return;
          for (int64_t s = 0; s < n; ++s) {
            ConstMatMap<S> cols_m(cols_all[static_cast<size_t>(s)].data(), hw_out, patch);
            ConstMatMap<S> d_out(out.grad().data() + s * c_out * hw_out, c_out, hw_out);
            if (k.requires_grad())
              k.grad_mat_as(c_out, patch).noalias() += d_out * cols_m;
            if (x.requires_grad()) {
              MatRM<S> d_cols(hw_out, patch);
              d_cols.noalias() = d_out.transpose() * k.mat_as(c_out, patch);
              S* gx = x.grad().data() + s * c * h * w;
              for (int64_t i = 0; i < h_out; ++i)
                for (int64_t j = 0; j < w_out; ++j) {
                  const S* src = d_cols.data() + (i * w_out + j) * patch;
                  for (int64_t cc = 0; cc < c; ++cc)
                    for (int64_t u = 0; u < kh; ++u) {
                      S* dst = gx + cc * h * w + (i * stride + u) * w + j * stride;
                      for (int64_t v = 0; v < kw; ++v) dst[v] += src[cc * kh * kw + u * kw + v];
                    }
                }
            }
          }
        });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

// x: N x D. Train mode normalizes by batch statistics (biased variance,
// eps 1e-5) and updates the running buffers in place with momentum 0.1;
// infer mode normalizes by the running statistics.
template <typename S>
Tensor<S> batchnorm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                    Tensor<S>& running_mean, Tensor<S>& running_var, Mode mode,
                    Tape<S>* tape = nullptr, double eps = 1e-5, double momentum = 0.1) {
  x.require_rank(2, "batchnorm");
  const int64_t n = x.dim(0), d = x.dim(1);
  if (gamma.size() != d || beta.size() != d || running_mean.size() != d || running_var.size() != d)
    throw DimensionError("batchnorm: parameter dims do not match feature dim " +
                         std::to_string(d));
  Tensor<S> out(x.shape());

  if (mode == Mode::kInfer) {
    for (int64_t j = 0; j < d; ++j) {
      const S inv = static_cast<S>(1.0 / std::sqrt(static_cast<double>(running_var.data()[j]) + eps));
      const S m = running_mean.data()[j];
      for (int64_t i = 0; i < n; ++i)
        out.data()[i * d + j] = (x.data()[i * d + j] - m) * inv * gamma.data()[j] + beta.data()[j];
    }
    if (detail::want_record(tape, {&x, &gamma, &beta})) {
      // Fixed statistics make infer-mode batchnorm a per-column affine map.
      out.set_requires_grad(true);
      std::vector<S> inv_std(static_cast<size_t>(d));
      for (int64_t j = 0; j < d; ++j)
        inv_std[j] = static_cast<S>(1.0 / std::sqrt(static_cast<double>(running_var.data()[j]) + eps));
      Tensor<S> rm = running_mean;
      tape->record(out.id(), {x.id(), gamma.id(), beta.id()},
                   [x, gamma, beta, rm, out, inv_std = std::move(inv_std), n, d]() mutable {
                     if (!out.has_grad()) return;
                     const S* gy = out.grad().data();
                     for (int64_t j = 0; j < d; ++j) {
                       const S a = gamma.data()[j] * inv_std[j];
                       for (int64_t i = 0; i < n; ++i) {
                         if (x.requires_grad()) x.grad()[i * d + j] += gy[i * d + j] * a;
                         if (gamma.requires_grad())
                           gamma.grad()[j] += gy[i * d + j] *
                                              (x.data()[i * d + j] - rm.data()[j]) * inv_std[j];
                         if (beta.requires_grad()) beta.grad()[j] += gy[i * d + j];
                       }
                     }
                   });
    }
    return out;
  }

  if (n < 2)
    throw DimensionError("batchnorm: train mode needs a batch of at least 2, got " +
                         std::to_string(n));

  std::vector<S> x_hat(static_cast<size_t>(n * d));
  std::vector<S> inv_std(static_cast<size_t>(d));
  for (int64_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (int64_t i = 0; i < n; ++i) mean += static_cast<double>(x.data()[i * d + j]);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const double c = static_cast<double>(x.data()[i * d + j]) - mean;
      var += c * c;
    }
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[j] = static_cast<S>(inv);
    for (int64_t i = 0; i < n; ++i) {
      const S xh = static_cast<S>((static_cast<double>(x.data()[i * d + j]) - mean) * inv);
      x_hat[i * d + j] = xh;
      out.data()[i * d + j] = xh * gamma.data()[j] + beta.data()[j];
    }
    running_mean.data()[j] =
        static_cast<S>((1.0 - momentum) * running_mean.data()[j] + momentum * mean);
    running_var.data()[j] =
        static_cast<S>((1.0 - momentum) * running_var.data()[j] + momentum * var);
  }

  if (detail::want_record(tape, {&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    tape->record(out.id(), {x.id(), gamma.id(), beta.id()},
                 [x, gamma, beta, out, x_hat = std::move(x_hat), inv_std = std::move(inv_std), n,
                  d]() mutable {
                   if (!out.has_grad()) return;
                   const S* gy = out.grad().data();
                   for (int64_t j = 0; j < d; ++j) {
                     double s1 = 0.0, s2 = 0.0;
                     for (int64_t i = 0; i < n; ++i) {
                       s1 += static_cast<double>(gy[i * d + j]);
                       s2 += static_cast<double>(gy[i * d + j]) * x_hat[i * d + j];
                     }
                     if (gamma.requires_grad()) gamma.grad()[j] += static_cast<S>(s2);
                     if (beta.requires_grad()) beta.grad()[j] += static_cast<S>(s1);
                     if (x.requires_grad()) {
                       const double a = static_cast<double>(gamma.data()[j]) * inv_std[j];
                       const double m1 = s1 / n, m2 = s2 / n;
                       for (int64_t i = 0; i < n; ++i)
                         x.grad()[i * d + j] += static_cast<S>(
                             a * (static_cast<double>(gy[i * d + j]) - m1 - x_hat[i * d + j] * m2));
                     }
                   }
                 });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

// Inverted dropout: in train mode zeroes each element with probability p and
// scales survivors by 1/(1-p); infer mode is the identity.
template <typename S>
Tensor<S> dropout(const Tensor<S>& x, double p, Mode mode, Rng& rng, Tape<S>* tape = nullptr) {
  if (p < 0.0 || p >= 1.0)
    throw ConfigError("dropout: probability must be in [0, 1), got " + std::to_string(p));
  if (mode == Mode::kInfer || p == 0.0) {
    Tensor<S> out = Tensor<S>::from(x.shape(), x.values());
    if (detail::want_record(tape, {&x})) {
      out.set_requires_grad(true);
      const int64_t n = x.size();
      tape->record(out.id(), {x.id()}, [x, out, n]() mutable {
        if (!out.has_grad()) return;
        S* gx = x.grad().data();
        const S* gy = out.grad().data();
        for (int64_t i = 0; i < n; ++i) gx[i] += gy[i];
      });
    }
    return out;
  }
  const int64_t n = x.size();
  const S inv_keep = static_cast<S>(1.0 / (1.0 - p));
  std::vector<uint8_t> keep(static_cast<size_t>(n));
  Tensor<S> out(x.shape());
  for (int64_t i = 0; i < n; ++i) {
    keep[i] = rng.uniform() >= p ? 1 : 0;
    out.data()[i] = keep[i] ? x.data()[i] * inv_keep : S(0);
  }
  if (detail::want_record(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out.id(), {x.id()}, [x, out, keep = std::move(keep), inv_keep, n]() mutable {
      if (!out.has_grad()) return;
      S* gx = x.grad().data();
      const S* gy = out.grad().data();
      for (int64_t i = 0; i < n; ++i)
        if (keep[i]) gx[i] += gy[i] * inv_keep;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape plumbing
// ---------------------------------------------------------------------------

// Feature-axis concatenation of rank-2 tensors with equal leading dims.
template <typename S>
Tensor<S> concat(const std::vector<Tensor<S>>& xs, Tape<S>* tape = nullptr) {
  if (xs.empty()) throw DimensionError("concat: empty input list");
  const int64_t n = xs[0].dim(0);
  int64_t d_total = 0;
  for (const auto& t : xs) {
    t.require_rank(2, "concat");
    if (t.dim(0) != n)
      throw DimensionError("concat: leading dims differ, " + shape_str(xs[0].shape()) + " vs " +
                           shape_str(t.shape()));
    d_total += t.dim(1);
  }
  Tensor<S> out({n, d_total});
  int64_t off = 0;
  for (const auto& t : xs) {
    const int64_t d = t.dim(1);
    for (int64_t i = 0; i < n; ++i)
      std::copy(t.data() + i * d, t.data() + (i + 1) * d, out.data() + i * d_total + off);
    off += d;
  }
  bool any_grad = false;
  for (const auto& t : xs) any_grad |= t.requires_grad();
  if (tape && any_grad) {
    out.set_requires_grad(true);
    std::vector<const void*> ids;
    for (const auto& t : xs) ids.push_back(t.id());
    tape->record(out.id(), std::move(ids), [xs, out, n, d_total]() mutable {
      if (!out.has_grad()) return;
      const S* gy = out.grad().data();
      int64_t off = 0;
      for (auto& t : xs) {
        const int64_t d = t.dim(1);
        if (t.requires_grad()) {
          S* gt = t.grad().data();
          for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < d; ++j) gt[i * d + j] += gy[i * d_total + off + j];
        }
        off += d;
      }
    });
  }
  return out;
}

// Row-axis concatenation of rank-2 tensors with equal feature dims (batch
// assembly of per-sample embeddings).
template <typename S>
Tensor<S> stack_rows(const std::vector<Tensor<S>>& xs, Tape<S>* tape = nullptr) {
  if (xs.empty()) throw DimensionError("stack_rows: empty input list");
  const int64_t d = xs[0].dim(1);
  int64_t n_total = 0;
  for (const auto& t : xs) {
    t.require_rank(2, "stack_rows");
    if (t.dim(1) != d)
      throw DimensionError("stack_rows: feature dims differ, " + shape_str(xs[0].shape()) +
                           " vs " + shape_str(t.shape()));
    n_total += t.dim(0);
  }
  Tensor<S> out({n_total, d});
  int64_t row = 0;
  for (const auto& t : xs) {
    std::copy(t.data(), t.data() + t.size(), out.data() + row * d);
    row += t.dim(0);
  }
  bool any_grad = false;
  for (const auto& t : xs) any_grad |= t.requires_grad();
  if (tape && any_grad) {
    out.set_requires_grad(true);
    std::vector<const void*> ids;
    for (const auto& t : xs) ids.push_back(t.id());
    tape->record(out.id(), std::move(ids), [xs, out, d]() mutable {
      if (!out.has_grad()) return;
      const S* gy = out.grad().data();
      int64_t row = 0;
      for (auto& t : xs) {
        if (t.requires_grad()) {
          S* gt = t.grad().data();
          for (int64_t i = 0; i < t.size(); ++i) gt[i] += gy[row * d + i];
        }
        row += t.dim(0);
      }
    });
  }
  return out;
}

// Reinterpret a single-sample feature map 1 x C x H x W as a sequence of H
// time steps with C*W features each (the audio-branch layout before pooling).
template <typename S>
Tensor<S> time_sequence(const Tensor<S>& x, Tape<S>* tape = nullptr) {
  x.require_rank(4, "time_sequence");
  if (x.dim(0) != 1)
    throw DimensionError("time_sequence expects a single sample, got " + shape_str(x.shape()));
  const int64_t c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<S> out({h, c * w});
  for (int64_t cc = 0; cc < c; ++cc)
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j)
        out.data()[i * (c * w) + cc * w + j] = x.data()[cc * h * w + i * w + j];
  if (detail::want_record(tape, {&x})) {
    out.set_requires_grad(true);
    tape->record(out.id(), {x.id()}, [x, out, c, h, w]() mutable {
      if (!out.has_grad()) return;
      S* gx = x.grad().data();
      const S* gy = out.grad().data();
      for (int64_t cc = 0; cc < c; ++cc)
        for (int64_t i = 0; i < h; ++i)
          for (int64_t j = 0; j < w; ++j)
            gx[cc * h * w + i * w + j] += gy[i * (c * w) + cc * w + j];
    });
  }
  return out;
}

// Graph-recorded reshape. The output is a fresh tensor (no shared values).
template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape, Tape<S>* tape = nullptr) {
  if (shape_numel(shape) != x.size())
    throw DimensionError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                         " changes element count");
  Tensor<S> out = Tensor<S>::from(std::move(shape), x.values());
  if (detail::want_record(tape, {&x})) {
    out.set_requires_grad(true);
    const int64_t n = x.size();
    tape->record(out.id(), {x.id()}, [x, out, n]() mutable {
      if (!out.has_grad()) return;
      S* gx = x.grad().data();
      const S* gy = out.grad().data();
      for (int64_t i = 0; i < n; ++i) gx[i] += gy[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification loss
// ---------------------------------------------------------------------------

// Mean softmax cross-entropy over rows of logits (N x K) against integer
// labels. Stable log-sum-exp; the row sums run in double.
template <typename S>
Tensor<S> cross_entropy_mean(const Tensor<S>& logits, const std::vector<int>& labels,
                             Tape<S>* tape = nullptr) {
  logits.require_rank(2, "cross_entropy_mean");
  const int64_t n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int64_t>(labels.size()) != n)
    throw DimensionError("cross_entropy_mean: " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(n));
  for (int y : labels)
    if (y < 0 || y >= k)
      throw DimensionError("cross_entropy_mean: label " + std::to_string(y) +
                           " out of range [0, " + std::to_string(k) + ")");
  std::vector<S> probs(static_cast<size_t>(n * k));
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const S* row = logits.data() + i * k;
    double m = row[0];
    for (int64_t j = 1; j < k; ++j) m = std::max(m, static_cast<double>(row[j]));
    double sum = 0.0;
    for (int64_t j = 0; j < k; ++j) sum += std::exp(static_cast<double>(row[j]) - m);
    const double log_z = std::log(sum) + m;
    total += log_z - static_cast<double>(row[labels[i]]);
    for (int64_t j = 0; j < k; ++j)
      probs[i * k + j] = static_cast<S>(std::exp(static_cast<double>(row[j]) - log_z));
  }
  Tensor<S> out = Tensor<S>::scalar(static_cast<S>(total / static_cast<double>(n)));
  if (detail::want_record(tape, {&logits})) {
    out.set_requires_grad(true);
    tape->record(out.id(), {logits.id()},
                 [logits, out, labels, probs = std::move(probs), n, k]() mutable {
                   if (!out.has_grad()) return;
                   const S g = out.grad()[0] / static_cast<S>(n);
                   S* gx = logits.grad().data();
                   for (int64_t i = 0; i < n; ++i)
                     for (int64_t j = 0; j < k; ++j) {
                       S p = probs[i * k + j];
                       if (j == labels[i]) p -= S(1);
                       gx[i * k + j] += g * p;
                     }
                 });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backward driver
// ---------------------------------------------------------------------------

template <typename S>
void backward(Tensor<S>& loss, Tape<S>& tape) {
  tape.run_backward(loss);
}

}  // namespace mvsv

#endif  // MVSV_OPS_H_
