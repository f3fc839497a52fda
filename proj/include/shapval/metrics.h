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

#ifndef SHAPVAL_METRICS_H_
#define SHAPVAL_METRICS_H_

#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/statusor.h"

namespace shapval {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Points run from (0,0) to (1,1) with fpr and tpr non-decreasing.
struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

// Threshold sweep over the unique scores (higher = positive), tied scores
// entering together; trapezoidal AUC. Both classes must be present.
absl::StatusOr<RocCurve> Roc(std::span<const double> scores,
                             std::span<const uint8_t> positive);

// Linear interpolation between the bracketing curve points. At an fpr hit
// exactly by several points the largest tpr is returned.
double TprAtFpr(const RocCurve& curve, double fpr_target);

// Curve resampled on a log-spaced FPR grid from 1e-3 to 1.
std::vector<RocPoint> LogSpacedRoc(const RocCurve& curve,
                                   int points_per_decade = 10);

// 2 * (acc - 0.5).
inline double Advantage(double accuracy) { return 2.0 * (accuracy - 0.5); }

double Accuracy(std::span<const uint32_t> predicted,
                std::span<const uint32_t> truth);

}  // namespace shapval

#endif  // SHAPVAL_METRICS_H_
