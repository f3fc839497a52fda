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

#ifndef SHAPVAL_STEAL_H_
#define SHAPVAL_STEAL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "shapval/dataset.h"
#include "shapval/model.h"
#include "shapval/valuation.h"

namespace shapval {

enum class Selection { kTop, kBottom, kRandom };

std::string SelectionName(Selection s);
absl::StatusOr<Selection> ParseSelection(std::string_view name);

// Top/bottom: the `budget` pool rows of highest/lowest importance, ties by
// ascending id, in rank order. Random: seeded draw without replacement.
absl::StatusOr<std::vector<size_t>> SelectQueries(
    const Dataset& ds, const ImportanceVector& importance,
    std::span<const size_t> pool, size_t budget, Selection selection,
    uint64_t seed);

// Shannon entropy (bits) of the empirical class histogram.
absl::StatusOr<double> ClassEntropy(std::span<const uint32_t> labels,
                                    uint32_t classes);

struct StealRun {
  size_t budget = 0;
  Selection selection = Selection::kRandom;
  uint64_t seed = 0;  // query draw and surrogate initialisation
  bool cross_distribution = false;
  ModelSpec surrogate;
};

struct StealResult {
  Model surrogate;
  std::vector<size_t> queries;
  double accuracy = 0.0;
  // Over the true query labels, or over the target's argmax answers for
  // cross-distribution pools.
  double query_class_entropy = 0.0;
};

// Queries `target` on rows selected from `pool` of `query_ds`, fits the
// surrogate to the returned posteriors with soft-label cross-entropy and
// scores it on `test_idx` of `eval_ds`.
absl::StatusOr<StealResult> Steal(const StealRun& run, const Model& target,
                                  const Dataset& query_ds,
                                  std::span<const size_t> pool,
                                  const ImportanceVector& importance,
                                  const Dataset& eval_ds,
                                  std::span<const size_t> test_idx);

struct StealRow {
  size_t budget = 0;
  Selection selection = Selection::kRandom;
  uint64_t seed = 0;
  double accuracy = 0.0;
  double query_class_entropy = 0.0;
};

// Every (budget, selection, seed) combination, rows in that nesting order.
// `threads` runs points concurrently; each point is single-threaded.
absl::StatusOr<std::vector<StealRow>> StealSweep(
    const Model& target, const ModelSpec& surrogate, const Dataset& query_ds,
    std::span<const size_t> pool, const ImportanceVector& importance,
    const Dataset& eval_ds, std::span<const size_t> test_idx,
    std::span<const size_t> budgets, std::span<const Selection> selections,
    std::span<const uint64_t> seeds, bool cross_distribution, int threads = 1);

// Mean accuracy per (budget, selection) over seeds.
struct StealSummary {
  size_t budget = 0;
  Selection selection = Selection::kRandom;
  double mean_accuracy = 0.0;
  double min_accuracy = 0.0;
  double max_accuracy = 0.0;
};
std::vector<StealSummary> SummarizeSteal(std::span<const StealRow> rows);

}  // namespace shapval

#endif  // SHAPVAL_STEAL_H_
