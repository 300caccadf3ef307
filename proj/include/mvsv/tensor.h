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

#ifndef MVSV_TENSOR_H_
#define MVSV_TENSOR_H_

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "mvsv/error.h"

namespace mvsv {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename Scalar>
using MatRM = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MatMap = Eigen::Map<MatRM<Scalar>>;
template <typename Scalar>
using ConstMatMap = Eigen::Map<const MatRM<Scalar>>;

// Dense n-dimensional array in row-major order with an optional gradient
// buffer. Tensor is a cheap shared handle: copies alias the same storage,
// which is what ties graph nodes on a Tape to the caller's leaf tensors.
// Values are treated as immutable by every op; mutation is confined to
// optimizer updates, zero_grad and batchnorm running statistics.
template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false)
      : data_(std::make_shared<Storage>()) {
    for (int64_t d : shape)
      if (d <= 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
    data_->shape = std::move(shape);
    data_->values.assign(static_cast<size_t>(shape_numel(data_->shape)), Scalar(0));
    data_->requires_grad = requires_grad;
  }

  static Tensor from(Shape shape, std::vector<Scalar> values, bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    if (static_cast<int64_t>(values.size()) != t.size())
      throw DimensionError("value count " + std::to_string(values.size()) +
                           " does not match shape " + shape_str(t.shape()));
    t.data_->values = std::move(values);
    return t;
  }

  static Tensor scalar(Scalar v, bool requires_grad = false) {
    return from({1}, {v}, requires_grad);
  }

  static Tensor full(Shape shape, Scalar v, bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    std::fill(t.data_->values.begin(), t.data_->values.end(), v);
    return t;
  }

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return data_->shape; }
  int64_t dim(int i) const { return data_->shape[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(data_->shape.size()); }
  int64_t size() const { return static_cast<int64_t>(data_->values.size()); }

  Scalar* data() { return data_->values.data(); }
  const Scalar* data() const { return data_->values.data(); }
  std::vector<Scalar>& values() { return data_->values; }
  const std::vector<Scalar>& values() const { return data_->values; }

  Scalar item() const {
    if (size() != 1) throw DimensionError("item() on non-scalar tensor " + shape_str(shape()));
    return data_->values[0];
  }

  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool v) { data_->requires_grad = v; }

  bool has_grad() const { return !data_->grad.empty(); }
  // Gradient buffer, allocated (zero-filled) on first use. Tensors are
  // shared handles, so the buffer stays reachable through const handles
  // (backward closures capture their operands by value).
  std::vector<Scalar>& grad() const {
    if (data_->grad.empty()) data_->grad.assign(data_->values.size(), Scalar(0));
    return data_->grad;
  }
  void zero_grad() const {
    if (!data_->grad.empty()) std::fill(data_->grad.begin(), data_->grad.end(), Scalar(0));
  }

  // Stable identity of the underlying storage (used by the tape and by
  // parameter-sharing assertions).
  const void* id() const { return data_.get(); }

  // View of a rank-2 tensor as an Eigen row-major matrix.
  MatMap<Scalar> mat() {
    require_rank(2, "mat()");
    return MatMap<Scalar>(data(), dim(0), dim(1));
  }
  ConstMatMap<Scalar> mat() const {
    require_rank(2, "mat()");
    return ConstMatMap<Scalar>(data(), dim(0), dim(1));
  }
  // View of the whole tensor as a rows x cols matrix (row-major, sizes must
  // multiply out to numel).
  MatMap<Scalar> mat_as(int64_t rows, int64_t cols) {
    if (rows * cols != size())
      throw DimensionError("mat_as(" + std::to_string(rows) + "," + std::to_string(cols) +
                           ") on tensor " + shape_str(shape()));
    return MatMap<Scalar>(data(), rows, cols);
  }
  ConstMatMap<Scalar> mat_as(int64_t rows, int64_t cols) const {
    if (rows * cols != size())
      throw DimensionError("mat_as(" + std::to_string(rows) + "," + std::to_string(cols) +
                           ") on tensor " + shape_str(shape()));
    return ConstMatMap<Scalar>(data(), rows, cols);
  }
  MatMap<Scalar> grad_mat_as(int64_t rows, int64_t cols) const {
    grad();  // ensure allocated
    return MatMap<Scalar>(data_->grad.data(), rows, cols);
  }

  void require_rank(int r, const char* what) const {
    if (rank() != r)
      throw DimensionError(std::string(what) + " expects rank-" + std::to_string(r) +
                           " tensor, got " + shape_str(shape()));
  }

  // Out-of-graph copy of values into a fresh tensor of the given shape.
  // The graph-recorded variant lives in ops.h.
  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != size())
      throw DimensionError("reshape " + shape_str(this->shape()) + " -> " + shape_str(shape) +
                           " changes element count");
    return from(std::move(shape), data_->values, data_->requires_grad);
  }

  Tensor clone() const { return from(data_->shape, data_->values, data_->requires_grad); }

 private:
  struct Storage {
    Shape shape;
    std::vector<Scalar> values;
    std::vector<Scalar> grad;  // empty until first needed
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> data_;
};

// Records the forward computation as an ordered node list; node order is a
// topological order because nodes are appended at execution time. Backward
// runs the node closures in reverse and may run once per recording; reset()
// clears the recording for reuse.
template <typename Scalar>
class Tape {
 public:
  struct Node {
    const void* output;                 // storage id of the op output
    std::vector<const void*> inputs;    // storage ids of op inputs
    std::function<void()> backward;     // accumulates into input grads
  };

  void record(const void* output, std::vector<const void*> inputs, std::function<void()> backward) {
    if (frozen_)
      throw Error("tape is frozen after backward; reset() before recording again");
    nodes_.push_back(Node{output, std::move(inputs), std::move(backward)});
  }

  size_t num_nodes() const { return nodes_.size(); }
  bool frozen() const { return frozen_; }

  void reset() {
    nodes_.clear();
    frozen_ = false;
  }

  // Reverse sweep: seeds d(loss)/d(loss) = 1 and accumulates gradients into
  // every tensor recorded on this tape. Gradients add across fan-out.
  void run_backward(Tensor<Scalar>& loss) {
    if (frozen_) throw Error("backward already ran on this tape; reset() first");
    if (loss.size() != 1)
      throw DimensionError("backward requires a scalar loss, got " + shape_str(loss.shape()));
    loss.grad()[0] += Scalar(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
    frozen_ = true;
  }

 private:
  std::vector<Node> nodes_;
  bool frozen_ = false;
};

using TensorF = Tensor<float>;
using TapeF = Tape<float>;

}  // namespace mvsv

#endif  // MVSV_TENSOR_H_
