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

#include "shapval/valuation.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "blob_io.h"
#include "json.hpp"
#include "shapval/parallel.h"
#include "shapval/status_macros.h"

namespace shapval {
namespace {

constexpr size_t kValidationBlock = 32;
constexpr size_t kMaxBruteForceRows = 16;

double SquaredDistance(std::span<const float> a, std::span<const float> b) {
  double total = 0.0;
  for (size_t f = 0; f < a.size(); ++f) {
    const double diff = static_cast<double>(a[f]) - static_cast<double>(b[f]);
    total += diff * diff;
  }
  return total;
}

// Positions into `rows`, nearest to the validation row first.
std::vector<size_t> NeighbourOrder(const Dataset& ds,
                                   std::span<const size_t> rows,
                                   size_t val_row) {
  const auto target = ds.row(val_row);
  std::vector<std::pair<double, uint64_t>> key(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    key[i] = {SquaredDistance(ds.row(rows[i]), target), ds.id(rows[i])};
  }
  std::vector<size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return key[a] < key[b]; });
  return order;
}

absl::Status CheckValuationInputs(const Dataset& ds,
                                  std::span<const size_t> train_idx,
                                  std::span<const size_t> val_idx, int k) {
  if (k < 1) return absl::InvalidArgumentError("k must be >= 1");
  if (train_idx.empty()) return absl::InvalidArgumentError("empty training split");
  if (val_idx.empty()) return absl::InvalidArgumentError("empty validation split");
  for (size_t i : train_idx) {
    if (i >= ds.size()) return absl::OutOfRangeError("train index out of range");
  }
  std::unordered_set<size_t> train(train_idx.begin(), train_idx.end());
  if (train.size() != train_idx.size()) {
    return absl::InvalidArgumentError("duplicate rows in training split");
  }
  for (size_t v : val_idx) {
    if (v >= ds.size()) return absl::OutOfRangeError("validation index out of range");
    if (train.contains(v)) {
      return absl::InvalidArgumentError(
          "training and validation splits overlap");
    }
  }
  return absl::OkStatus();
}

ImportanceVector MakeVector(const Dataset& ds, std::span<const size_t> rows,
                            const ValuationOptions& opts) {
  ImportanceVector iv;
  iv.ids.reserve(rows.size());
  for (size_t i : rows) iv.ids.push_back(ds.id(i));
  iv.values.assign(rows.size(), 0.0);
  iv.k = opts.k;
  iv.val_split = opts.val_split;
  iv.aggregation = opts.aggregation;
  return iv;
}

void Finish(ImportanceVector& iv, size_t val_count) {
  if (iv.aggregation == Aggregation::kMean) {
    for (double& v : iv.values) v /= static_cast<double>(val_count);
  }
}

}  // namespace

double KnnUtility(const Dataset& ds, std::span<const size_t> subset,
                  size_t val_row, int k) {
  if (subset.empty()) return 0.0;
  const auto order = NeighbourOrder(ds, subset, val_row);
  const size_t top = std::min<size_t>(k, subset.size());
  size_t matches = 0;
  for (size_t j = 0; j < top; ++j) {
    matches += ds.label(subset[order[j]]) == ds.label(val_row);
  }
  return static_cast<double>(matches) / k;
}

absl::StatusOr<std::vector<double>> KnnShapleyForPoint(
    const Dataset& ds, std::span<const size_t> train_idx, size_t val_row,
    int k) {
  if (k < 1) return absl::InvalidArgumentError("k must be >= 1");
  if (train_idx.empty()) return absl::InvalidArgumentError("empty training split");
  const size_t n = train_idx.size();
  const auto order = NeighbourOrder(ds, train_idx, val_row);
  const uint32_t y = ds.label(val_row);
  auto match = [&](size_t rank) {
    return ds.label(train_idx[order[rank]]) == y ? 1.0 : 0.0;
  };
  const double kd = static_cast<double>(k);

  std::vector<double> value(n);
  // The farthest row only matters when fewer than k rows precede it.
  double s = match(n - 1) * static_cast<double>(std::min<size_t>(k, n)) /
             (kd * static_cast<double>(n));
  value[order[n - 1]] = s;
  for (size_t i = n - 1; i-- > 0;) {
    const double rank = static_cast<double>(i + 1);
    s += (match(i) - match(i + 1)) / kd * std::min(kd, rank) / rank;
    value[order[i]] = s;
  }
  return value;
}

absl::StatusOr<ImportanceVector> KnnShapley(const Dataset& ds,
                                            std::span<const size_t> train_idx,
                                            std::span<const size_t> val_idx,
                                            const ValuationOptions& opts) {
  RETURN_IF_ERROR(CheckValuationInputs(ds, train_idx, val_idx, opts.k));
  ImportanceVector iv = MakeVector(ds, train_idx, opts);
  const size_t n = train_idx.size();

  // Fixed blocks summed in block order keep the floating-point reduction
  // independent of the thread count.
  const size_t blocks = (val_idx.size() + kValidationBlock - 1) / kValidationBlock;
  std::vector<std::vector<double>> partial(blocks);
  std::vector<absl::Status> errors(blocks);
  ParallelFor(blocks, opts.threads, [&](size_t b) {
    std::vector<double>& acc = partial[b];
    acc.assign(n, 0.0);
    const size_t end = std::min(val_idx.size(), (b + 1) * kValidationBlock);
    for (size_t v = b * kValidationBlock; v < end; ++v) {
      auto point = KnnShapleyForPoint(ds, train_idx, val_idx[v], opts.k);
      if (!point.ok()) {
        errors[b] = point.status();
        return;
      }
      for (size_t i = 0; i < n; ++i) acc[i] += (*point)[i];
    }
  });
  for (const auto& e : errors) RETURN_IF_ERROR(e);
  for (const auto& acc : partial) {
    for (size_t i = 0; i < n; ++i) iv.values[i] += acc[i];
  }
  Finish(iv, val_idx.size());
  return iv;
}

absl::StatusOr<ImportanceVector> ShapleyBruteForce(
    const Dataset& ds, std::span<const size_t> train_idx,
    std::span<const size_t> val_idx, const ValuationOptions& opts) {
  RETURN_IF_ERROR(CheckValuationInputs(ds, train_idx, val_idx, opts.k));
  const size_t n = train_idx.size();
  if (n > kMaxBruteForceRows) {
    return absl::InvalidArgumentError(absl::StrCat(
        "brute-force Shapley enumerates 2^N coalitions; N=", n, " exceeds ",
        kMaxBruteForceRows));
  }
  ImportanceVector iv = MakeVector(ds, train_idx, opts);
  const uint32_t masks = 1u << n;

  // 1 / (N * C(N-1, s)) for every coalition size s.
  std::vector<double> weight(n);
  for (size_t s = 0; s < n; ++s) {
    double binom = 1.0;
    for (size_t j = 1; j <= s; ++j) {
      binom = binom * static_cast<double>(n - 1 - s + j) / static_cast<double>(j);
    }
    weight[s] = 1.0 / (static_cast<double>(n) * binom);
  }

  std::vector<double> utility(masks);
  for (size_t val_row : val_idx) {
    const auto order = NeighbourOrder(ds, train_idx, val_row);
    const uint32_t y = ds.label(val_row);
    for (uint32_t mask = 0; mask < masks; ++mask) {
      int taken = 0, matches = 0;
      for (size_t j = 0; j < n && taken < opts.k; ++j) {
        if (mask & (1u << order[j])) {
          ++taken;
          matches += ds.label(train_idx[order[j]]) == y;
        }
      }
      utility[mask] = static_cast<double>(matches) / opts.k;
    }
    for (size_t z = 0; z < n; ++z) {
      const uint32_t bit = 1u << z;
      double phi = 0.0;
      for (uint32_t mask = 0; mask < masks; ++mask) {
        if (mask & bit) continue;
        phi += (utility[mask | bit] - utility[mask]) *
               weight[std::popcount(mask)];
      }
      iv.values[z] += phi;
    }
  }
  Finish(iv, val_idx.size());
  return iv;
}

absl::StatusOr<ImportanceVector> LeaveOneOut(const Dataset& ds,
                                             std::span<const size_t> train_idx,
                                             std::span<const size_t> val_idx,
                                             const ModelSpec& spec) {
  RETURN_IF_ERROR(CheckValuationInputs(ds, train_idx, val_idx, 1));
  if (train_idx.size() < 2) {
    return absl::InvalidArgumentError("leave-one-out needs at least 2 training rows");
  }
  ValuationOptions opts;
  opts.k = spec.kind == ModelKind::kKnn ? spec.knn_k : 0;
  ImportanceVector iv = MakeVector(ds, train_idx, opts);
  ASSIGN_OR_RETURN(const Model full, Train(spec, ds, train_idx));
  ASSIGN_OR_RETURN(const double base, EvaluateAccuracy(full, ds, val_idx));
  std::vector<size_t> reduced;
  reduced.reserve(train_idx.size() - 1);
  for (size_t z = 0; z < train_idx.size(); ++z) {
    reduced.clear();
    for (size_t i = 0; i < train_idx.size(); ++i) {
      if (i != z) reduced.push_back(train_idx[i]);
    }
    ASSIGN_OR_RETURN(const Model model, Train(spec, ds, reduced));
    ASSIGN_OR_RETURN(const double acc, EvaluateAccuracy(model, ds, val_idx));
    iv.values[z] = base - acc;
  }
  return iv;
}

absl::StatusOr<std::vector<BinAggregate>> BinnedStatistic(
    const ImportanceVector& x, std::span<const double> y, size_t bins) {
  if (x.values.size() != y.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "length mismatch: ", x.values.size(), " importances vs ", y.size(),
        " values"));
  }
  if (bins < 1) return absl::InvalidArgumentError("bins must be >= 1");
  if (bins > y.size()) {
    return absl::InvalidArgumentError("more bins than samples");
  }
  std::vector<size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (x.values[a] != x.values[b]) return x.values[a] < x.values[b];
    return x.ids[a] < x.ids[b];
  });
  const size_t per_bin = y.size() / bins;
  std::vector<BinAggregate> out(bins);
  for (size_t b = 0; b < bins; ++b) {
    const size_t begin = b * per_bin;
    const size_t end = b + 1 == bins ? y.size() : begin + per_bin;
    BinAggregate& agg = out[b];
    agg.bin = b;
    agg.count = end - begin;
    for (size_t r = begin; r < end; ++r) {
      agg.sum += y[order[r]];
      agg.mean_importance += x.values[order[r]];
    }
    agg.mean_importance /= static_cast<double>(agg.count);
  }
  return out;
}

std::vector<double> AverageRanks(std::span<const double> values) {
  const size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (size_t i = 0; i < n;) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

namespace {

absl::StatusOr<double> Pearson(std::span<const double> a,
                               std::span<const double> b) {
  const size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) {
    return absl::FailedPreconditionError("correlation undefined: zero variance");
  }
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

}  // namespace

absl::StatusOr<Correlation> RankCorrelation(std::span<const double> a,
                                            std::span<const double> b) {
  if (a.size() != b.size()) {
    return absl::InvalidArgumentError("correlation inputs differ in length");
  }
  if (a.size() < 3) {
    return absl::FailedPreconditionError(
        "correlation undefined: fewer than 3 samples");
  }
  Correlation out;
  ASSIGN_OR_RETURN(out.pearson, Pearson(a, b));
  const auto ra = AverageRanks(a);
  const auto rb = AverageRanks(b);
  ASSIGN_OR_RETURN(out.spearman, Pearson(ra, rb));
  return out;
}

absl::StatusOr<Correlation> RankCorrelation(const ImportanceVector& a,
                                            const ImportanceVector& b) {
  if (a.ids != b.ids) {
    return absl::InvalidArgumentError("importance vectors are not id-aligned");
  }
  return RankCorrelation(a.values, b.values);
}

absl::StatusOr<ImportanceVector> Restrict(const ImportanceVector& iv,
                                          std::span<const uint64_t> ids) {
  std::unordered_map<uint64_t, size_t> where;
  where.reserve(iv.size());
  for (size_t i = 0; i < iv.size(); ++i) where.emplace(iv.ids[i], i);
  ImportanceVector out = iv;
  out.ids.assign(ids.begin(), ids.end());
  out.values.clear();
  out.values.reserve(ids.size());
  for (uint64_t id : ids) {
    auto it = where.find(id);
    if (it == where.end()) {
      return absl::NotFoundError(absl::StrCat("no importance for id ", id));
    }
    out.values.push_back(iv.values[it->second]);
  }
  return out;
}

absl::Status WriteImportanceCsv(const ImportanceVector& iv,
                                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path.string()));
  out << "id,value\n";
  for (size_t i = 0; i < iv.size(); ++i) {
    out << iv.ids[i] << ',' << absl::StrFormat("%.17g", iv.values[i]) << '\n';
  }
  if (!out) return absl::DataLossError(absl::StrCat("short write to ", path.string()));
  return absl::OkStatus();
}

absl::StatusOr<ImportanceVector> ReadImportanceCsv(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path.string()));
  std::string line;
  if (!std::getline(in, line) || line != "id,value") {
    return absl::InvalidArgumentError("importance CSV must start with 'id,value'");
  }
  ImportanceVector iv;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells = absl::StrSplit(line, ',');
    uint64_t id;
    double value;
    if (cells.size() != 2 || !absl::SimpleAtoi(cells[0], &id) ||
        !absl::SimpleAtod(cells[1], &value)) {
      return absl::InvalidArgumentError(absl::StrCat("bad importance row '", line, "'"));
    }
    iv.ids.push_back(id);
    iv.values.push_back(value);
  }
  return iv;
}

absl::Status SaveImportance(const ImportanceVector& iv,
                            const std::filesystem::path& dir,
                            const std::string& stem) {
  std::vector<float> values(iv.values.begin(), iv.values.end());
  RETURN_IF_ERROR(internal::WriteBlob(dir / (stem + ".f32"),
                                      std::span<const float>(values)));
  nlohmann::json manifest = {
      {"n", iv.size()},
      {"d", 1},
      {"k", iv.k},
      {"val_split", iv.val_split},
      {"aggregation", iv.aggregation == Aggregation::kMean ? "mean" : "sum"},
      {"values", stem + ".f32"},
      {"ids", iv.ids}};
  std::ofstream out(dir / (stem + ".json"), std::ios::trunc);
  out << manifest.dump(2) << "\n";
  if (!out) return absl::DataLossError("cannot write importance manifest");
  return absl::OkStatus();
}

}  // namespace shapval
