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
// Central-difference gradient checking. Instantiate with Scalar = double:
// float step sizes drown the comparison in rounding noise.

#ifndef MVSV_GRADCHECK_H_
#define MVSV_GRADCHECK_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "mvsv/error.h"
#include "mvsv/ops.h"
#include "mvsv/tensor.h"

namespace mvsv {

// f(x, tape) must return a scalar tensor and be a pure function of the
// values of x (plus any captured state it does not mutate). x is perturbed
// in place, so a closure that reads x through a shared handle also works:
// pass the parameter tensor itself as x and ignore the argument inside f.
//
// Returns max_i |analytic_i - central_i| / max(|analytic_i|, |central_i|, 1e-8).
template <typename S, typename F>
double grad_check(F f, Tensor<S>& x, double h = 1e-3) {
  x.set_requires_grad(true);
  x.zero_grad();
  {
    Tape<S> tape;
    Tensor<S> loss = f(x, &tape);
    tape.run_backward(loss);
  }
  std::vector<double> analytic(x.grad().begin(), x.grad().end());

  double worst = 0.0;
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) {
    const S saved = x.data()[i];
    x.data()[i] = saved + static_cast<S>(h);
    const double fp = static_cast<double>(f(x, static_cast<Tape<S>*>(nullptr)).item());
    x.data()[i] = saved - static_cast<S>(h);
    const double fm = static_cast<double>(f(x, static_cast<Tape<S>*>(nullptr)).item());
    x.data()[i] = saved;
    const double central = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(central), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - central) / denom);
  }
  return worst;
}

// Per-coordinate best agreement over several step sizes; returns the max
// over coordinates of that minimum. Central differences have two error
// regimes pulling h in opposite directions: truncation shrinks like h^2
// while, on coordinates whose true gradient is zero (dead relu columns,
// batch-mean cancellation), rounding noise over the 1e-8 denominator floor
// grows like 1/h. A correct analytic gradient agrees with at least one
// regime; a wrong one agrees with neither.
template <typename S, typename F>
double grad_check_multi(F f, Tensor<S>& x, const std::vector<double>& steps) {
  if (steps.empty()) throw Error("grad_check_multi: need at least one step size");
  x.set_requires_grad(true);
  x.zero_grad();
  {
    Tape<S> tape;
    Tensor<S> loss = f(x, &tape);
    tape.run_backward(loss);
  }
  std::vector<double> analytic(x.grad().begin(), x.grad().end());

  double worst = 0.0;
  const int64_t n = x.size();
  for (int64_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (double h : steps) {
      const S saved = x.data()[i];
      x.data()[i] = saved + static_cast<S>(h);
      const double fp = static_cast<double>(f(x, static_cast<Tape<S>*>(nullptr)).item());
      x.data()[i] = saved - static_cast<S>(h);
      const double fm = static_cast<double>(f(x, static_cast<Tape<S>*>(nullptr)).item());
      x.data()[i] = saved;
      const double central = (fp - fm) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(central), 1e-8});
      best = std::min(best, std::abs(analytic[i] - central) / denom);
    }
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace mvsv

#endif  // MVSV_GRADCHECK_H_
