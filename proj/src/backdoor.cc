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

#include "shapval/backdoor.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "shapval/parallel.h"
#include "shapval/status_macros.h"

namespace shapval {

int DefaultTriggerSize(int side) {
  if (side <= 32) return 2;
  if (side <= 64) return 5;
  return static_cast<int>(std::lround(side * 5.0 / 64.0));
}

absl::StatusOr<TriggerSpec> MakeTrigger(const Dataset& ds,
                                        uint32_t target_class, int size) {
  if (target_class >= ds.class_count()) {
    return absl::InvalidArgumentError("target class out of range");
  }
  TriggerSpec t;
  t.shape = ds.image_shape();
  t.value = ds.feature_min();
  t.target_class = target_class;
  if (size > 0) {
    t.size = size;
  } else if (t.shape) {
    t.size = DefaultTriggerSize(std::min(t.shape->height, t.shape->width));
  } else {
    t.size = 2;
  }
  RETURN_IF_ERROR(TriggerPositions(t, ds.dim()).status());
  return t;
}

absl::StatusOr<std::vector<size_t>> TriggerPositions(const TriggerSpec& t,
                                                     size_t dim) {
  if (t.size < 1) return absl::InvalidArgumentError("trigger size must be >= 1");
  const size_t s = static_cast<size_t>(t.size);
  std::vector<size_t> pos;
  if (!t.shape) {
    if (s * s > dim) {
      return absl::InvalidArgumentError("trigger larger than the feature vector");
    }
    for (size_t j = 0; j < s * s; ++j) pos.push_back(j);
    return pos;
  }
  const ImageShape& sh = *t.shape;
  if (sh.size() != dim) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "image shape %dx%dx%d does not match dimension %d", sh.height, sh.width,
        sh.channels, dim));
  }
  if (t.size > std::min(sh.height, sh.width)) {
    return absl::InvalidArgumentError("trigger larger than the image");
  }
  for (int r = sh.height - t.size; r < sh.height; ++r) {
    for (int c = 0; c < t.size; ++c) {
      for (int ch = 0; ch < sh.channels; ++ch) {
        pos.push_back((static_cast<size_t>(r) * sh.width + c) * sh.channels + ch);
      }
    }
  }
  return pos;
}

absl::StatusOr<Dataset> ApplyTrigger(const Dataset& ds,
                                     std::span<const size_t> idx,
                                     const TriggerSpec& t) {
  ASSIGN_OR_RETURN(std::vector<size_t> pos, TriggerPositions(t, ds.dim()));
  DatasetParts parts = ds.parts();
  for (size_t r : idx) {
    if (r >= ds.size()) return absl::OutOfRangeError("row index out of range");
    float* row = parts.features.data() + r * ds.dim();
    for (size_t p : pos) row[p] = t.value;
  }
  return Dataset::Create(std::move(parts));
}

absl::StatusOr<PoisonResult> PoisonAndTrain(const Dataset& ds,
                                            std::span<const size_t> train_idx,
                                            std::span<const size_t> test_idx,
                                            const ImportanceVector& importance,
                                            const PoisonRun& run,
                                            const TriggerSpec& trigger) {
  if (trigger.target_class >= ds.class_count()) {
    return absl::InvalidArgumentError("target class out of range");
  }
  if (run.budget > train_idx.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "poison budget %d exceeds training set of %d", run.budget,
        train_idx.size()));
  }
  std::vector<size_t> candidates;
  for (size_t r : train_idx) {
    if (r >= ds.size()) return absl::OutOfRangeError("row index out of range");
    if (ds.label(r) != trigger.target_class) candidates.push_back(r);
  }
  PoisonResult result;
  if (run.budget > 0) {
    ASSIGN_OR_RETURN(result.poisoned,
                     SelectQueries(ds, importance, candidates, run.budget,
                                   run.selection, run.seed));
  }
  ASSIGN_OR_RETURN(Dataset poisoned, ApplyTrigger(ds, result.poisoned, trigger));
  std::vector<uint32_t> labels(train_idx.size());
  std::vector<uint8_t> is_victim(ds.size(), 0);
  for (size_t r : result.poisoned) is_victim[r] = 1;
  for (size_t i = 0; i < train_idx.size(); ++i) {
    labels[i] = is_victim[train_idx[i]] ? trigger.target_class
                                        : ds.label(train_idx[i]);
  }
  ModelSpec spec = run.spec;
  spec.seed = run.seed;
  ASSIGN_OR_RETURN(result.model, Train(spec, poisoned, train_idx,
                                       LabelOverride(std::move(labels))));
  ASSIGN_OR_RETURN(result.clean_accuracy,
                   EvaluateAccuracy(result.model, ds, test_idx));

  std::vector<size_t> other;
  for (size_t r : test_idx) {
    if (ds.label(r) != trigger.target_class) other.push_back(r);
  }
  if (other.empty()) {
    return absl::FailedPreconditionError("no test rows outside the target class");
  }
  ASSIGN_OR_RETURN(Dataset triggered, ApplyTrigger(ds, other, trigger));
  ASSIGN_OR_RETURN(PredictionSet preds, PredictProba(result.model, triggered, other));
  const auto argmax = preds.Argmax();
  const size_t hits = std::count(argmax.begin(), argmax.end(), trigger.target_class);
  result.asr = static_cast<double>(hits) / static_cast<double>(other.size());
  return result;
}

absl::StatusOr<std::vector<PoisonRow>> PoisonSweep(
    const Dataset& ds, std::span<const size_t> train_idx,
    std::span<const size_t> test_idx, const ImportanceVector& importance,
    const ModelSpec& spec, const TriggerSpec& trigger,
    std::span<const size_t> budgets, std::span<const Selection> selections,
    std::span<const uint64_t> seeds, int threads) {
  std::vector<PoisonRow> rows;
  for (size_t b : budgets) {
    for (Selection s : selections) {
      for (uint64_t seed : seeds) rows.push_back({b, s, seed, 0.0, 0.0});
    }
  }
  std::vector<absl::Status> errors(rows.size());
  ParallelFor(rows.size(), threads, [&](size_t i) {
    PoisonRun run{rows[i].budget, rows[i].selection, rows[i].seed, spec};
    auto res = PoisonAndTrain(ds, train_idx, test_idx, importance, run, trigger);
    if (!res.ok()) {
      errors[i] = res.status();
      return;
    }
    rows[i].asr = res->asr;
    rows[i].clean_accuracy = res->clean_accuracy;
  });
  for (const auto& e : errors) RETURN_IF_ERROR(e);
  return rows;
}

absl::StatusOr<FractionImportance> FractionImportanceFor(
    const Dataset& ds, std::span<const size_t> train_idx,
    std::span<const size_t> val_idx, const ImportanceVector& full,
    double fraction, uint64_t seed, const ValuationOptions& opts) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    return absl::InvalidArgumentError("fraction must lie in (0, 1]");
  }
  const size_t m = static_cast<size_t>(std::lround(fraction * train_idx.size()));
  if (m < 2) {
    return absl::InvalidArgumentError(
        absl::StrFormat("fraction %g keeps %d samples; need at least 2",
                        fraction, m));
  }
  std::vector<size_t> subset(train_idx.begin(), train_idx.end());
  std::mt19937_64 rng(seed);
  std::shuffle(subset.begin(), subset.end(), rng);
  subset.resize(m);
  std::sort(subset.begin(), subset.end());
  FractionImportance out;
  ASSIGN_OR_RETURN(out.subset, KnnShapley(ds, subset, val_idx, opts));
  ASSIGN_OR_RETURN(ImportanceVector ref, Restrict(full, out.subset.ids));
  ASSIGN_OR_RETURN(out.correlation, RankCorrelation(ref, out.subset));
  return out;
}

}  // namespace shapval
