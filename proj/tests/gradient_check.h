// Copyright 2026 The Shapval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SHAPVAL_TESTS_GRADIENT_CHECK_H_
#define SHAPVAL_TESTS_GRADIENT_CHECK_H_

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "shapval/dataset.h"
#include "shapval/model.h"

namespace shapval::testing {

struct GradientCheck {
  double max_relative_error = 0.0;
  size_t compared = 0;
  // Parameters whose +-h step moves a hidden pre-activation across zero for
  // some batch row; a central difference there does not estimate the slope.
  size_t kink_skipped = 0;
  bool ok = true;
};

// True when perturbing parameter `p` by +-h can flip the sign of a ReLU input.
inline bool StepCrossesKink(const Model& m, const Dataset& ds, std::span<const size_t> batch,
                            size_t p, double h) {
  if (m.kind() != ModelKind::kMlp) return false;
  const size_t d = m.dim(), width = m.spec().hidden_width;
  if (p >= width * d + width) return false;
  const auto w = m.parameters();
  const size_t unit = p < width * d ? p / d : p - width * d;
  for (size_t r : batch) {
    const auto x = ds.row(r);
    double pre = w[width * d + unit];
    for (size_t f = 0; f < d; ++f) pre += w[unit * d + f] * double(x[f]);
    const double reach = p < width * d ? h * std::abs(double(x[p % d])) : h;
    if (std::abs(pre) <= reach) return true;
  }
  return false;
}

// Analytic parameter gradient vs central differences with step h. Relative
// error uses max(|fd|, |g|, 1e-6) as the denominator.
inline GradientCheck CheckGradient(Model& m, const Dataset& ds, std::span<const size_t> batch,
                                   double h) {
  GradientCheck out;
  std::vector<double> grad;
  if (!LossAndGradient(m, ds, batch, &grad).ok()) return {0.0, 0, 0, false};
  auto params = m.mutable_parameters();
  for (size_t i = 0; i < params.size(); ++i) {
    if (StepCrossesKink(m, ds, batch, i, h)) {
      ++out.kink_skipped;
      continue;
    }
    const double keep = params[i];
    params[i] = keep + h;
    const auto up = LossAndGradient(m, ds, batch, nullptr);
    params[i] = keep - h;
    const auto down = LossAndGradient(m, ds, batch, nullptr);
    params[i] = keep;
    if (!up.ok() || !down.ok()) return {0.0, 0, 0, false};
    const double fd = (*up - *down) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
    out.max_relative_error = std::max(out.max_relative_error, std::abs(fd - grad[i]) / denom);
    ++out.compared;
  }
  return out;
}

}  // namespace shapval::testing

#endif  // SHAPVAL_TESTS_GRADIENT_CHECK_H_
