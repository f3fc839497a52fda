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

#ifndef SHAPVAL_BACKDOOR_H_
#define SHAPVAL_BACKDOOR_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "shapval/dataset.h"
#include "shapval/model.h"
#include "shapval/steal.h"
#include "shapval/valuation.h"

namespace shapval {

// A constant s x s square in the bottom-left corner of every channel. Without
// an image shape the trigger is the first s*s features instead.
struct TriggerSpec {
  std::optional<ImageShape> shape;
  int size = 2;
  float value = 0.0f;
  uint32_t target_class = 0;
};

// 2 up to 32 pixels per side, 5 up to 64, then scaled by side * 5 / 64.
int DefaultTriggerSize(int side);

// Trigger with value = ds.feature_min(); size 0 selects DefaultTriggerSize
// (2 for tabular data).
absl::StatusOr<TriggerSpec> MakeTrigger(const Dataset& ds,
                                        uint32_t target_class, int size = 0);

// Feature positions the trigger overwrites, ascending.
absl::StatusOr<std::vector<size_t>> TriggerPositions(const TriggerSpec& t,
                                                     size_t dim);

absl::StatusOr<Dataset> ApplyTrigger(const Dataset& ds,
                                     std::span<const size_t> idx,
                                     const TriggerSpec& t);

struct PoisonRun {
  size_t budget = 0;
  Selection selection = Selection::kRandom;
  uint64_t seed = 0;  // victim draw and model initialisation
  ModelSpec spec;
};

struct PoisonResult {
  Model model;
  std::vector<size_t> poisoned;
  double asr = 0.0;
  double clean_accuracy = 0.0;
};

// Victims are chosen among training rows whose label differs from the target
// class, triggered and relabelled; the model trains on the poisoned data. ASR
// counts triggered test rows of other classes predicted as the target class.
absl::StatusOr<PoisonResult> PoisonAndTrain(const Dataset& ds,
                                            std::span<const size_t> train_idx,
                                            std::span<const size_t> test_idx,
                                            const ImportanceVector& importance,
                                            const PoisonRun& run,
                                            const TriggerSpec& trigger);

struct PoisonRow {
  size_t budget = 0;
  Selection selection = Selection::kRandom;
  uint64_t seed = 0;
  double asr = 0.0;
  double clean_accuracy = 0.0;
};

absl::StatusOr<std::vector<PoisonRow>> PoisonSweep(
    const Dataset& ds, std::span<const size_t> train_idx,
    std::span<const size_t> test_idx, const ImportanceVector& importance,
    const ModelSpec& spec, const TriggerSpec& trigger,
    std::span<const size_t> budgets, std::span<const Selection> selections,
    std::span<const uint64_t> seeds, int threads = 1);

struct FractionImportance {
  ImportanceVector subset;  // values in the reduced context
  Correlation correlation;  // against the full-context values, same ids
};

// Re-scores a seeded `fraction` of train_idx using only that subset as the
// valuation context and correlates with `full` on the shared ids.
absl::StatusOr<FractionImportance> FractionImportanceFor(
    const Dataset& ds, std::span<const size_t> train_idx,
    std::span<const size_t> val_idx, const ImportanceVector& full,
    double fraction, uint64_t seed, const ValuationOptions& opts);

}  // namespace shapval

#endif  // SHAPVAL_BACKDOOR_H_
