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

#include "shapval/dynamics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "shapval/status_macros.h"

namespace shapval {
namespace {

absl::Status AppendDeltas(const ImportanceVector& before,
                          const ImportanceVector& after,
                          std::span<const uint64_t> ids,
                          const std::string& group, DeltaReport* report) {
  ASSIGN_OR_RETURN(ImportanceVector b, Restrict(before, ids));
  ASSIGN_OR_RETURN(ImportanceVector a, Restrict(after, ids));
  for (size_t i = 0; i < ids.size(); ++i) {
    report->rows.push_back(
        {ids[i], b.values[i], a.values[i], a.values[i] - b.values[i], group});
  }
  return absl::OkStatus();
}

std::vector<uint64_t> IdsOf(const Dataset& ds, std::span<const size_t> rows) {
  std::vector<uint64_t> ids(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) ids[i] = ds.id(rows[i]);
  return ids;
}

}  // namespace

size_t DeltaReport::CountIf(const std::string& group, bool increased) const {
  size_t n = 0;
  for (const auto& r : rows) {
    if (r.group == group && (increased ? r.delta > 0 : r.delta < 0)) ++n;
  }
  return n;
}

size_t DeltaReport::GroupSize(const std::string& group) const {
  return std::count_if(rows.begin(), rows.end(),
                       [&](const DeltaRow& r) { return r.group == group; });
}

double DeltaReport::MeanDelta(const std::string& group) const {
  double s = 0.0;
  size_t n = 0;
  for (const auto& r : rows) {
    if (r.group == group) {
      s += r.delta;
      ++n;
    }
  }
  return n ? s / n : 0.0;
}

double DeltaReport::MeanAbsDelta(const std::string& group) const {
  double s = 0.0;
  size_t n = 0;
  for (const auto& r : rows) {
    if (r.group == group) {
      s += std::abs(r.delta);
      ++n;
    }
  }
  return n ? s / n : 0.0;
}

absl::StatusOr<OnionResult> OnionEffect(const Dataset& ds,
                                        std::span<const size_t> train_idx,
                                        std::span<const size_t> val_idx,
                                        const ImportanceVector& original,
                                        RemoveSide side, size_t remove_count,
                                        const ValuationOptions& opts) {
  const size_t n = train_idx.size();
  OnionResult out;
  if (remove_count == 0) return out;
  if (3 * remove_count > n) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "remove_count %d leaves no band disjoint from both removals in %d "
        "samples",
        remove_count, n));
  }
  const auto ids = IdsOf(ds, train_idx);
  ASSIGN_OR_RETURN(ImportanceVector orig, Restrict(original, ids));
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (orig.values[a] != orig.values[b]) return orig.values[a] > orig.values[b];
    return ids[a] < ids[b];
  });
  for (size_t i = remove_count; i < 2 * remove_count; ++i) {
    out.band_ids.push_back(ids[order[i]]);
  }
  std::vector<uint8_t> removed(n, 0);
  for (size_t i = 0; i < remove_count; ++i) {
    const size_t pos = side == RemoveSide::kTop ? order[i] : order[n - 1 - i];
    removed[pos] = 1;
    out.removed_ids.push_back(ids[pos]);
  }
  std::vector<size_t> kept;
  for (size_t i = 0; i < n; ++i) {
    if (!removed[i]) kept.push_back(train_idx[i]);
  }
  ASSIGN_OR_RETURN(ImportanceVector after, KnnShapley(ds, kept, val_idx, opts));
  RETURN_IF_ERROR(AppendDeltas(orig, after, out.band_ids, "band", &out.deltas));
  const double band = static_cast<double>(out.band_ids.size());
  out.frac_increased = out.deltas.CountIf("band", true) / band;
  out.frac_decreased = out.deltas.CountIf("band", false) / band;
  return out;
}

absl::StatusOr<DuplicationResult> DuplicateMislabel(
    const Dataset& ds, std::span<const size_t> train_idx,
    std::span<const size_t> val_idx, std::span<const size_t> targets,
    size_t copies, uint64_t seed, const ValuationOptions& opts) {
  if (targets.empty()) return absl::InvalidArgumentError("target set is empty");
  std::unordered_set<size_t> train_set(train_idx.begin(), train_idx.end());
  std::unordered_set<size_t> target_set;
  for (size_t r : targets) {
    if (!train_set.count(r)) {
      return absl::InvalidArgumentError("targets must be training rows");
    }
    if (!target_set.insert(r).second) {
      return absl::InvalidArgumentError("targets repeat");
    }
  }
  const uint32_t classes = ds.class_count();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<uint32_t> other(0, classes - 2);
  DuplicationResult out;
  for (size_t r : targets) {
    uint32_t y = other(rng);
    if (y >= ds.label(r)) ++y;
    out.wrong_labels.push_back(y);
  }
  std::vector<size_t> non_targets;
  for (size_t r : train_idx) {
    if (!target_set.count(r)) non_targets.push_back(r);
  }
  if (non_targets.size() < targets.size()) {
    return absl::InvalidArgumentError("not enough non-targets for a control group");
  }
  std::shuffle(non_targets.begin(), non_targets.end(), rng);
  non_targets.resize(targets.size());
  std::sort(non_targets.begin(), non_targets.end());

  ASSIGN_OR_RETURN(ImportanceVector before, KnnShapley(ds, train_idx, val_idx, opts));
  std::vector<size_t> copy_rows;
  std::vector<uint32_t> copy_labels;
  for (size_t c = 0; c < copies; ++c) {
    for (size_t t = 0; t < targets.size(); ++t) {
      copy_rows.push_back(targets[t]);
      copy_labels.push_back(out.wrong_labels[t]);
    }
  }
  ImportanceVector after = before;
  if (!copy_rows.empty()) {
    ASSIGN_OR_RETURN(Dataset grown,
                     AppendCopies(ds, copy_rows,
                                  std::span<const uint32_t>(copy_labels)));
    std::vector<size_t> context(train_idx.begin(), train_idx.end());
    for (size_t i = ds.size(); i < grown.size(); ++i) {
      context.push_back(i);
      out.copy_ids.push_back(grown.id(i));
    }
    ASSIGN_OR_RETURN(after, KnnShapley(grown, context, val_idx, opts));
  }
  RETURN_IF_ERROR(AppendDeltas(before, after, IdsOf(ds, targets), "target", &out.deltas));
  RETURN_IF_ERROR(
      AppendDeltas(before, after, IdsOf(ds, non_targets), "control", &out.deltas));
  return out;
}

absl::StatusOr<DeltaReport> AugmentationImpact(
    const Dataset& ds, std::span<const size_t> train_idx,
    std::span<const size_t> val_idx, std::span<const size_t> idx,
    std::span<const Transform> transforms, AugmentMode mode,
    const ValuationOptions& opts) {
  if (!ds.image_shape()) {
    return absl::FailedPreconditionError("augmentation needs an image dataset");
  }
  if (idx.empty()) return absl::InvalidArgumentError("no rows to augment");
  const ImageShape shape = *ds.image_shape();
  std::unordered_set<size_t> train_set(train_idx.begin(), train_idx.end());
  for (size_t r : idx) {
    if (!train_set.count(r)) {
      return absl::InvalidArgumentError("augmented rows must be training rows");
    }
  }
  DeltaReport report;
  if (mode == AugmentMode::kReplace) {
    ASSIGN_OR_RETURN(ImportanceVector before, KnnShapley(ds, train_idx, val_idx, opts));
    ASSIGN_OR_RETURN(Dataset aug, Augment(ds, idx, transforms, shape));
    ASSIGN_OR_RETURN(ImportanceVector after, KnnShapley(aug, train_idx, val_idx, opts));
    std::unordered_set<size_t> chosen(idx.begin(), idx.end());
    std::vector<size_t> rest;
    for (size_t r : train_idx) {
      if (!chosen.count(r)) rest.push_back(r);
    }
    RETURN_IF_ERROR(AppendDeltas(before, after, IdsOf(ds, idx), "augmented", &report));
    RETURN_IF_ERROR(AppendDeltas(before, after, IdsOf(ds, rest), "other", &report));
    return report;
  }
  ASSIGN_OR_RETURN(Dataset dup, AppendCopies(ds, idx));
  std::vector<size_t> added(idx.size());
  std::iota(added.begin(), added.end(), ds.size());
  ASSIGN_OR_RETURN(Dataset aug, Augment(dup, added, transforms, shape));
  std::vector<size_t> context(train_idx.begin(), train_idx.end());
  context.insert(context.end(), added.begin(), added.end());
  ASSIGN_OR_RETURN(ImportanceVector base, KnnShapley(dup, context, val_idx, opts));
  ASSIGN_OR_RETURN(ImportanceVector after, KnnShapley(aug, context, val_idx, opts));
  RETURN_IF_ERROR(AppendDeltas(base, after, IdsOf(ds, idx), "original", &report));
  RETURN_IF_ERROR(AppendDeltas(base, after, IdsOf(dup, added), "added", &report));
  return report;
}

absl::StatusOr<ShadowImportance> ShadowImportanceFor(
    const Dataset& ds, std::span<const size_t> full_idx,
    std::span<const size_t> shadow_idx, std::span<const size_t> val_idx,
    const ValuationOptions& opts) {
  if (shadow_idx.empty()) return absl::InvalidArgumentError("empty shadow context");
  ShadowImportance out;
  ASSIGN_OR_RETURN(ImportanceVector full, KnnShapley(ds, full_idx, val_idx, opts));
  const auto probe_ids = IdsOf(ds, shadow_idx);
  ASSIGN_OR_RETURN(out.full, Restrict(full, probe_ids));
  ASSIGN_OR_RETURN(out.shadow, KnnShapley(ds, shadow_idx, val_idx, opts));
  ASSIGN_OR_RETURN(out.correlation, RankCorrelation(out.full, out.shadow));
  return out;
}

}  // namespace shapval
