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

#ifndef SHAPVAL_DYNAMICS_H_
#define SHAPVAL_DYNAMICS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "shapval/dataset.h"
#include "shapval/valuation.h"

namespace shapval {

struct DeltaRow {
  uint64_t id = 0;
  double old_value = 0.0;
  double new_value = 0.0;
  double delta = 0.0;
  std::string group;
};

struct DeltaReport {
  std::vector<DeltaRow> rows;

  size_t CountIf(const std::string& group, bool increased) const;
  size_t GroupSize(const std::string& group) const;
  double MeanDelta(const std::string& group) const;
  double MeanAbsDelta(const std::string& group) const;
};

enum class RemoveSide { kTop, kBottom };

struct OnionResult {
  // Band of ranks (remove_count, 2 * remove_count] by descending original
  // importance, ties by id.
  std::vector<uint64_t> band_ids;
  std::vector<uint64_t> removed_ids;
  DeltaReport deltas;  // group "band"
  double frac_increased = 0.0;
  double frac_decreased = 0.0;
};

// Removes the top or bottom `remove_count` samples of `original` (which
// covers train_idx) and re-scores the rest. remove_count = 0 is a no-op with
// an empty band.
absl::StatusOr<OnionResult> OnionEffect(const Dataset& ds,
                                        std::span<const size_t> train_idx,
                                        std::span<const size_t> val_idx,
                                        const ImportanceVector& original,
                                        RemoveSide side, size_t remove_count,
                                        const ValuationOptions& opts);

struct DuplicationResult {
  DeltaReport deltas;  // groups "target" and "control"
  std::vector<uint64_t> copy_ids;
  std::vector<uint32_t> wrong_labels;  // per target
};

// Appends `copies` copies of each target row with one wrong label per target,
// drawn uniformly from the other classes, and re-scores. Controls are a
// seeded sample of non-target training rows of the same size.
absl::StatusOr<DuplicationResult> DuplicateMislabel(
    const Dataset& ds, std::span<const size_t> train_idx,
    std::span<const size_t> val_idx, std::span<const size_t> targets,
    size_t copies, uint64_t seed, const ValuationOptions& opts);

enum class AugmentMode { kReplace, kAdd };

// Replace: rows `idx` are transformed in place and compared against the
// original values (group "augmented"; other training rows "other").
// Add: transformed copies are appended and compared against appending exact
// duplicates with the same fresh ids (groups "original" and "added").
absl::StatusOr<DeltaReport> AugmentationImpact(
    const Dataset& ds, std::span<const size_t> train_idx,
    std::span<const size_t> val_idx, std::span<const size_t> idx,
    std::span<const Transform> transforms, AugmentMode mode,
    const ValuationOptions& opts);

struct ShadowImportance {
  ImportanceVector full;    // probes scored in the full context
  ImportanceVector shadow;  // probes scored in the shadow context
  Correlation correlation;
};

// Probes are the shadow rows; they are valued once inside full_idx and once
// inside shadow_idx alone, against the same validation rows.
absl::StatusOr<ShadowImportance> ShadowImportanceFor(
    const Dataset& ds, std::span<const size_t> full_idx,
    std::span<const size_t> shadow_idx, std::span<const size_t> val_idx,
    const ValuationOptions& opts);

}  // namespace shapval

#endif  // SHAPVAL_DYNAMICS_H_
