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

#ifndef SHAPVAL_VALUATION_H_
#define SHAPVAL_VALUATION_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "shapval/dataset.h"
#include "shapval/model.h"

namespace shapval {

enum class Aggregation { kMean, kSum };

// Per-sample importance aligned to the scored rows. Values are expected
// utility contributions per validation point and may be negative.
struct ImportanceVector {
  std::vector<uint64_t> ids;
  std::vector<double> values;
  int k = 0;
  std::string val_split = "validation";
  Aggregation aggregation = Aggregation::kMean;

  size_t size() const { return ids.size(); }
};

struct ValuationOptions {
  int k = 6;
  Aggregation aggregation = Aggregation::kMean;
  std::string val_split = "validation";
  // Upper bound on worker threads; results do not depend on it.
  int threads = 1;
};

// U(S; v) = (1/k) * #{label matches among the min(k, |S|) nearest rows of S},
// with squared-Euclidean distance and ties broken by ascending id. U(empty)=0.
double KnnUtility(const Dataset& ds, std::span<const size_t> subset,
                  size_t val_row, int k);

// Exact Shapley values of the k-NN utility for one validation row, via the
// sorted-neighbour recursion. Output is aligned to train_idx.
absl::StatusOr<std::vector<double>> KnnShapleyForPoint(
    const Dataset& ds, std::span<const size_t> train_idx, size_t val_row,
    int k);

// KnnShapleyForPoint aggregated over every validation row.
absl::StatusOr<ImportanceVector> KnnShapley(const Dataset& ds,
                                            std::span<const size_t> train_idx,
                                            std::span<const size_t> val_idx,
                                            const ValuationOptions& opts = {});

// Same quantity by enumerating all 2^N coalitions. N <= 16.
absl::StatusOr<ImportanceVector> ShapleyBruteForce(
    const Dataset& ds, std::span<const size_t> train_idx,
    std::span<const size_t> val_idx, const ValuationOptions& opts = {});

// value[z] = acc(train) - acc(train \ {z}) on val_idx, retraining `spec`.
absl::StatusOr<ImportanceVector> LeaveOneOut(const Dataset& ds,
                                             std::span<const size_t> train_idx,
                                             std::span<const size_t> val_idx,
                                             const ModelSpec& spec);

struct BinAggregate {
  size_t bin = 0;
  size_t count = 0;
  double mean_importance = 0.0;
  double sum = 0.0;
};

// Sorts samples by ascending importance (ties by id), cuts them into `bins`
// equal-count groups with the remainder going to the last, and sums `y`
// within each group.
absl::StatusOr<std::vector<BinAggregate>> BinnedStatistic(
    const ImportanceVector& x, std::span<const double> y, size_t bins);

struct Correlation {
  double pearson = 0.0;
  double spearman = 0.0;
};

// Requires identical id order and at least three samples; zero variance is a
// FailedPrecondition ("correlation undefined").
absl::StatusOr<Correlation> RankCorrelation(const ImportanceVector& a,
                                            const ImportanceVector& b);
absl::StatusOr<Correlation> RankCorrelation(std::span<const double> a,
                                            std::span<const double> b);

// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> AverageRanks(std::span<const double> values);

// Values for `ids`, in that order.
absl::StatusOr<ImportanceVector> Restrict(const ImportanceVector& iv,
                                          std::span<const uint64_t> ids);

// CSV `id,value` with 17 significant digits.
absl::Status WriteImportanceCsv(const ImportanceVector& iv,
                                const std::filesystem::path& path);
absl::StatusOr<ImportanceVector> ReadImportanceCsv(
    const std::filesystem::path& path);

// <stem>.json manifest (n, k, aggregation, ids) + <stem>.f32 value blob.
absl::Status SaveImportance(const ImportanceVector& iv,
                            const std::filesystem::path& dir,
                            const std::string& stem);

}  // namespace shapval

#endif  // SHAPVAL_VALUATION_H_
