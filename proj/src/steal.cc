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

#include "shapval/steal.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "shapval/parallel.h"
#include "shapval/status_macros.h"

namespace shapval {

std::string SelectionName(Selection s) {
  switch (s) {
    case Selection::kTop:
      return "top";
    case Selection::kBottom:
      return "bottom";
    case Selection::kRandom:
      return "random";
  }
  return "unknown";
}

absl::StatusOr<Selection> ParseSelection(std::string_view name) {
  if (name == "top" || name == "top_importance") return Selection::kTop;
  if (name == "bottom" || name == "bottom_importance") return Selection::kBottom;
  if (name == "random") return Selection::kRandom;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown selection '", std::string(name), "'"));
}

absl::StatusOr<std::vector<size_t>> SelectQueries(
    const Dataset& ds, const ImportanceVector& importance,
    std::span<const size_t> pool, size_t budget, Selection selection,
    uint64_t seed) {
  if (budget == 0) return absl::InvalidArgumentError("budget must be >= 1");
  if (budget > pool.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "budget %d exceeds pool of %d", budget, pool.size()));
  }
  for (size_t r : pool) {
    if (r >= ds.size()) return absl::OutOfRangeError("pool row out of range");
  }
  if (selection == Selection::kRandom) {
    std::vector<size_t> v(pool.begin(), pool.end());
    std::mt19937_64 rng(seed);
    std::shuffle(v.begin(), v.end(), rng);
    v.resize(budget);
    return v;
  }
  std::vector<uint64_t> ids(pool.size());
  for (size_t i = 0; i < pool.size(); ++i) ids[i] = ds.id(pool[i]);
  ASSIGN_OR_RETURN(ImportanceVector iv, Restrict(importance, ids));
  std::vector<size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  const bool top = selection == Selection::kTop;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (iv.values[a] != iv.values[b]) {
      return top ? iv.values[a] > iv.values[b] : iv.values[a] < iv.values[b];
    }
    return ids[a] < ids[b];
  });
  std::vector<size_t> out(budget);
  for (size_t i = 0; i < budget; ++i) out[i] = pool[order[i]];
  return out;
}

absl::StatusOr<double> ClassEntropy(std::span<const uint32_t> labels,
                                    uint32_t classes) {
  if (labels.empty()) return absl::InvalidArgumentError("no labels");
  std::vector<size_t> hist(classes, 0);
  for (uint32_t y : labels) {
    if (y >= classes) return absl::InvalidArgumentError("label out of range");
    ++hist[y];
  }
  double h = 0.0;
  const double n = static_cast<double>(labels.size());
  for (size_t c : hist) {
    if (c == 0) continue;
    const double p = c / n;
    h -= p * std::log2(p);
  }
  return h;
}

absl::StatusOr<StealResult> Steal(const StealRun& run, const Model& target,
                                  const Dataset& query_ds,
                                  std::span<const size_t> pool,
                                  const ImportanceVector& importance,
                                  const Dataset& eval_ds,
                                  std::span<const size_t> test_idx) {
  if (query_ds.dim() != target.dim() || eval_ds.dim() != target.dim()) {
    return absl::InvalidArgumentError("query features do not match the target");
  }
  StealResult result;
  ASSIGN_OR_RETURN(result.queries, SelectQueries(query_ds, importance, pool,
                                                 run.budget, run.selection,
                                                 run.seed));
  ASSIGN_OR_RETURN(PredictionSet answers,
                   PredictProba(target, query_ds, result.queries));
  ModelSpec spec = run.surrogate;
  spec.seed = run.seed;
  SoftLabels soft{answers.classes, answers.posteriors};
  ASSIGN_OR_RETURN(result.surrogate,
                   Train(spec, query_ds, result.queries, LabelOverride(soft)));
  ASSIGN_OR_RETURN(result.accuracy,
                   EvaluateAccuracy(result.surrogate, eval_ds, test_idx));
  std::vector<uint32_t> labels;
  if (run.cross_distribution) {
    labels = answers.Argmax();
  } else {
    for (size_t r : result.queries) labels.push_back(query_ds.label(r));
  }
  ASSIGN_OR_RETURN(result.query_class_entropy,
                   ClassEntropy(labels, target.classes()));
  return result;
}

absl::StatusOr<std::vector<StealRow>> StealSweep(
    const Model& target, const ModelSpec& surrogate, const Dataset& query_ds,
    std::span<const size_t> pool, const ImportanceVector& importance,
    const Dataset& eval_ds, std::span<const size_t> test_idx,
    std::span<const size_t> budgets, std::span<const Selection> selections,
    std::span<const uint64_t> seeds, bool cross_distribution, int threads) {
  std::vector<StealRow> rows;
  for (size_t b : budgets) {
    for (Selection s : selections) {
      for (uint64_t seed : seeds) rows.push_back({b, s, seed, 0.0, 0.0});
    }
  }
  std::vector<absl::Status> errors(rows.size());
  ParallelFor(rows.size(), threads, [&](size_t i) {
    StealRun run{rows[i].budget, rows[i].selection, rows[i].seed,
                 cross_distribution, surrogate};
    auto res = Steal(run, target, query_ds, pool, importance, eval_ds, test_idx);
    if (!res.ok()) {
      errors[i] = res.status();
      return;
    }
    rows[i].accuracy = res->accuracy;
    rows[i].query_class_entropy = res->query_class_entropy;
  });
  for (const auto& e : errors) RETURN_IF_ERROR(e);
  return rows;
}

std::vector<StealSummary> SummarizeSteal(std::span<const StealRow> rows) {
  std::vector<StealSummary> out;
  std::map<std::pair<size_t, int>, size_t> slot;
  std::vector<size_t> counts;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.budget, static_cast<int>(r.selection));
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, out.size()).first;
      out.push_back({r.budget, r.selection, 0.0, r.accuracy, r.accuracy});
      counts.push_back(0);
    }
    auto& s = out[it->second];
    s.mean_accuracy += r.accuracy;
    s.min_accuracy = std::min(s.min_accuracy, r.accuracy);
    s.max_accuracy = std::max(s.max_accuracy, r.accuracy);
    ++counts[it->second];
  }
  for (size_t i = 0; i < out.size(); ++i) out[i].mean_accuracy /= counts[i];
  return out;
}

}  // namespace shapval
