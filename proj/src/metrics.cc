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

#include "shapval/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace shapval {

absl::StatusOr<RocCurve> Roc(std::span<const double> scores,
                             std::span<const uint8_t> positive) {
  if (scores.size() != positive.size()) {
    return absl::InvalidArgumentError("scores and labels differ in length");
  }
  const size_t pos = std::count_if(positive.begin(), positive.end(),
                                   [](uint8_t b) { return b != 0; });
  const size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) {
    return absl::InvalidArgumentError("ROC needs both positive and negative samples");
  }
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  size_t tp = 0, fp = 0;
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (positive[order[j]]) {
        ++tp;
      } else {
        ++fp;
      }
      ++j;
    }
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos)});
    i = j;
  }
  for (size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    curve.auc += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
  }
  return curve;
}

double TprAtFpr(const RocCurve& curve, double fpr_target) {
  const auto& pts = curve.points;
  double exact = -1.0;
  for (const auto& p : pts) {
    if (p.fpr == fpr_target) exact = std::max(exact, p.tpr);
  }
  if (exact >= 0.0) return exact;
  for (size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].fpr > fpr_target) {
      const auto& a = pts[i - 1];
      const auto& b = pts[i];
      const double t = (fpr_target - a.fpr) / (b.fpr - a.fpr);
      return a.tpr + t * (b.tpr - a.tpr);
    }
  }
  return pts.back().tpr;
}

std::vector<RocPoint> LogSpacedRoc(const RocCurve& curve,
                                   int points_per_decade) {
  std::vector<RocPoint> out;
  const int steps = 3 * points_per_decade;
  for (int i = 0; i <= steps; ++i) {
    const double fpr = std::pow(10.0, -3.0 + static_cast<double>(i) / points_per_decade);
    out.push_back({fpr, TprAtFpr(curve, fpr)});
  }
  return out;
}

double Accuracy(std::span<const uint32_t> predicted,
                std::span<const uint32_t> truth) {
  if (truth.empty() || predicted.size() != truth.size()) return 0.0;
  size_t correct = 0;
  for (size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

}  // namespace shapval
