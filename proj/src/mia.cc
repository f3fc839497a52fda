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

#include "shapval/mia.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_map>
#include <utility>

#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "shapval/parallel.h"
#include "shapval/status_macros.h"

namespace shapval {
namespace {

constexpr double kLogFloor = 1e-12;

double SafeLog(double p) { return std::log(std::max(p, kLogFloor)); }

uint32_t ArgmaxOf(std::span<const double> p) {
  return static_cast<uint32_t>(std::max_element(p.begin(), p.end()) -
                               p.begin());
}

double PosteriorScore(MetricKind metric, std::span<const double> p,
                      uint32_t y) {
  switch (metric) {
    case MetricKind::kConfidence:
      return p[y];
    case MetricKind::kNegEntropy: {
      double s = 0.0;
      for (double pi : p) s += pi * SafeLog(pi);
      return s;
    }
    case MetricKind::kNegModifiedEntropy: {
      double m = -(1.0 - p[y]) * SafeLog(p[y]);
      for (size_t i = 0; i < p.size(); ++i) {
        if (i != y) m -= p[i] * SafeLog(1.0 - p[i]);
      }
      return -m;
    }
    case MetricKind::kBoundaryDistance:
      break;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double NormOf(std::span<const double> v, shapval::Norm norm) {
  double acc = 0.0;
  for (double x : v) {
    switch (norm) {
      case Norm::kL1:
        acc += std::abs(x);
        break;
      case Norm::kL2:
        acc += x * x;
        break;
      case Norm::kLinf:
        acc = std::max(acc, std::abs(x));
        break;
    }
  }
  return norm == Norm::kL2 ? std::sqrt(acc) : acc;
}

double ResolveStep(const PgdOptions& opts, const Dataset& ds) {
  if (opts.step > 0.0) return opts.step;
  const double range =
      static_cast<double>(ds.feature_max()) - static_cast<double>(ds.feature_min());
  return range > 0.0 ? 0.01 * range : 0.01;
}

double StdDev(std::span<const double> v) {
  if (v.empty()) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / v.size());
}

std::vector<size_t> SampleWithoutReplacement(std::span<const size_t> pool,
                                             size_t count, uint64_t seed) {
  std::vector<size_t> v(pool.begin(), pool.end());
  std::mt19937_64 rng(seed);
  std::shuffle(v.begin(), v.end(), rng);
  v.resize(count);
  return v;
}

}  // namespace

std::string MetricName(MetricKind metric) {
  switch (metric) {
    case MetricKind::kConfidence:
      return "confidence";
    case MetricKind::kNegEntropy:
      return "neg_entropy";
    case MetricKind::kNegModifiedEntropy:
      return "neg_modified_entropy";
    case MetricKind::kBoundaryDistance:
      return "boundary_distance";
  }
  return "unknown";
}

absl::StatusOr<MetricKind> ParseMetric(std::string_view name) {
  if (name == "confidence") return MetricKind::kConfidence;
  if (name == "neg_entropy" || name == "entropy") return MetricKind::kNegEntropy;
  if (name == "neg_modified_entropy" || name == "modified_entropy") {
    return MetricKind::kNegModifiedEntropy;
  }
  if (name == "boundary_distance" || name == "neg_boundary_distance") {
    return MetricKind::kBoundaryDistance;
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown metric '", std::string(name), "'"));
}

std::string NormName(shapval::Norm norm) {
  switch (norm) {
    case Norm::kL1:
      return "l1";
    case Norm::kL2:
      return "l2";
    case Norm::kLinf:
      return "linf";
  }
  return "unknown";
}

absl::StatusOr<shapval::Norm> ParseNorm(std::string_view name) {
  if (name == "l1") return Norm::kL1;
  if (name == "l2") return Norm::kL2;
  if (name == "linf") return Norm::kLinf;
  return absl::InvalidArgumentError(absl::StrCat("unknown norm '", std::string(name), "'"));
}

absl::StatusOr<MembershipScore> Score(MetricKind metric,
                                      const PredictionSet& posteriors,
                                      std::span<const uint32_t> labels) {
  if (metric == MetricKind::kBoundaryDistance) {
    return absl::InvalidArgumentError(
        "boundary distance needs a model, not posteriors");
  }
  if (labels.size() != posteriors.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "%d labels for %d posterior rows", labels.size(), posteriors.size()));
  }
  MembershipScore out{posteriors.ids, {}, MetricName(metric)};
  out.scores.reserve(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= posteriors.classes) {
      return absl::InvalidArgumentError("label outside posterior width");
    }
    out.scores.push_back(PosteriorScore(metric, posteriors.row(i), labels[i]));
  }
  return out;
}

absl::StatusOr<MembershipScore> Calibrate(const MembershipScore& base,
                                          const ImportanceVector& importance,
                                          double k_cal) {
  if (k_cal == 0.0) return base;
  ASSIGN_OR_RETURN(ImportanceVector aligned, Restrict(importance, base.ids));
  MembershipScore out = base;
  for (size_t i = 0; i < out.scores.size(); ++i) {
    out.scores[i] += k_cal * aligned.values[i];
  }
  out.metric = absl::StrFormat("calibrated(%s,%.17g)", base.metric, k_cal);
  return out;
}

namespace {

// Best threshold over one group; ties go to the larger threshold.
double BestThreshold(std::vector<std::pair<double, uint8_t>> group) {
  std::sort(group.begin(), group.end());
  size_t members = 0;
  for (const auto& [s, bit] : group) members += bit;
  const size_t n = group.size();
  // Threshold below everything: all predicted member.
  double best_tau = group.front().first - 1.0;
  size_t best_correct = members;
  size_t members_below = 0, nonmembers_below = 0;
  size_t i = 0;
  while (i < n) {
    const double value = group[i].first;
    while (i < n && group[i].first == value) {
      (group[i].second ? members_below : nonmembers_below) += 1;
      ++i;
    }
    const double tau =
        i < n ? value + (group[i].first - value) / 2.0 : value + 1.0;
    const size_t correct = (members - members_below) + nonmembers_below;
    if (correct >= best_correct) {
      best_correct = correct;
      best_tau = tau;
    }
  }
  return best_tau;
}

}  // namespace

absl::StatusOr<ThresholdTable> FitThresholds(
    const MembershipScore& shadow, std::span<const uint8_t> membership,
    std::span<const uint32_t> labels, uint32_t classes) {
  const size_t n = shadow.scores.size();
  if (n == 0) return absl::InvalidArgumentError("empty shadow set");
  if (membership.size() != n || labels.size() != n) {
    return absl::InvalidArgumentError("shadow scores, bits and labels differ in length");
  }
  std::vector<std::pair<double, uint8_t>> all;
  std::vector<std::vector<std::pair<double, uint8_t>>> per_class(classes);
  all.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    if (labels[i] >= classes) return absl::InvalidArgumentError("label out of range");
    if (!std::isfinite(shadow.scores[i])) {
      return absl::InvalidArgumentError("non-finite shadow score");
    }
    all.emplace_back(shadow.scores[i], membership[i] ? 1 : 0);
    per_class[labels[i]].push_back(all.back());
  }
  ThresholdTable table;
  table.global_threshold = BestThreshold(all);
  table.thresholds.assign(classes, table.global_threshold);
  table.fell_back.assign(classes, true);
  for (uint32_t c = 0; c < classes; ++c) {
    const auto& g = per_class[c];
    const size_t m = std::count_if(g.begin(), g.end(),
                                   [](const auto& e) { return e.second != 0; });
    if (m == 0 || m == g.size()) continue;
    table.thresholds[c] = BestThreshold(g);
    table.fell_back[c] = false;
  }
  return table;
}

double ThresholdAccuracy(const ThresholdTable& table,
                         std::span<const double> scores,
                         std::span<const uint8_t> membership,
                         std::span<const uint32_t> labels) {
  if (scores.empty()) return 0.0;
  size_t correct = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    correct += table.IsMember(scores[i], labels[i]) == (membership[i] != 0);
  }
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

absl::StatusOr<double> BoundaryDistance(const Model& model,
                                        std::span<const float> x, uint32_t y,
                                        const PgdOptions& opts) {
  if (!model.differentiable()) {
    return absl::FailedPreconditionError(
        "boundary distance needs a differentiable model");
  }
  if (x.size() != model.dim()) {
    return absl::InvalidArgumentError("feature dimension mismatch");
  }
  if (y >= model.classes()) return absl::InvalidArgumentError("label out of range");
  if (!(opts.step > 0.0) || opts.max_iters < 0) {
    return absl::InvalidArgumentError("PGD needs step > 0 and max_iters >= 0");
  }
  const size_t d = x.size();
  std::vector<double> origin(x.begin(), x.end());
  std::vector<double> cur = origin;
  std::vector<double> p(model.classes());
  std::vector<double> delta(d);
  model.Posterior(cur, p);
  if (ArgmaxOf(p) != y) return 0.0;
  for (int it = 0; it < opts.max_iters; ++it) {
    ASSIGN_OR_RETURN(std::vector<double> g, InputGradient(model, cur, y));
    for (double gi : g) {
      if (!std::isfinite(gi)) return absl::InternalError("non-finite input gradient");
    }
    const double gnorm = NormOf(g, opts.norm == Norm::kL1 ? Norm::kLinf : opts.norm);
    if (gnorm == 0.0) break;  // flat loss: the iterate can no longer move
    switch (opts.norm) {
      case Norm::kLinf:
        for (size_t j = 0; j < d; ++j) {
          cur[j] += opts.step * static_cast<double>((g[j] > 0) - (g[j] < 0));
        }
        break;
      case Norm::kL2:
        for (size_t j = 0; j < d; ++j) cur[j] += opts.step * g[j] / gnorm;
        break;
      case Norm::kL1: {
        size_t best = 0;
        for (size_t j = 1; j < d; ++j) {
          if (std::abs(g[j]) > std::abs(g[best])) best = j;
        }
        cur[best] += opts.step * (g[best] > 0 ? 1.0 : -1.0);
        break;
      }
    }
    model.Posterior(cur, p);
    if (ArgmaxOf(p) != y) {
      for (size_t j = 0; j < d; ++j) delta[j] = cur[j] - origin[j];
      return NormOf(delta, opts.norm);
    }
  }
  return std::numeric_limits<double>::infinity();
}

absl::StatusOr<MembershipScore> ScoreRows(const Model& model, const Dataset& ds,
                                          std::span<const size_t> idx,
                                          MetricKind metric,
                                          const PgdOptions& pgd, int threads) {
  if (metric != MetricKind::kBoundaryDistance) {
    ASSIGN_OR_RETURN(PredictionSet preds, PredictProba(model, ds, idx));
    std::vector<uint32_t> labels(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) labels[i] = ds.label(idx[i]);
    return Score(metric, preds, labels);
  }
  PgdOptions opts = pgd;
  opts.step = ResolveStep(pgd, ds);
  const double cap = (opts.max_iters + 1.0) * opts.step;
  MembershipScore out{{}, std::vector<double>(idx.size()), MetricName(metric)};
  out.ids.reserve(idx.size());
  for (size_t r : idx) {
    if (r >= ds.size()) return absl::OutOfRangeError("row index out of range");
    out.ids.push_back(ds.id(r));
  }
  std::vector<absl::Status> errors(idx.size());
  ParallelFor(idx.size(), threads, [&](size_t i) {
    auto dist = BoundaryDistance(model, ds.row(idx[i]), ds.label(idx[i]), opts);
    if (!dist.ok()) {
      errors[i] = dist.status();
      return;
    }
    out.scores[i] = std::isinf(*dist) ? cap : *dist;
  });
  for (const auto& e : errors) RETURN_IF_ERROR(e);
  return out;
}

absl::StatusOr<MembershipGame> MembershipGame::Setup(const Dataset& ds,
                                                     const SplitSet& splits,
                                                     const GameConfig& cfg) {
  RETURN_IF_ERROR(splits.Validate(ds.size()));
  if (splits.train.empty()) return absl::InvalidArgumentError("empty member set");
  if (splits.nonmember_pool.empty()) {
    return absl::InvalidArgumentError("empty nonmember pool");
  }
  if (splits.shadow.size() < 2) {
    return absl::InvalidArgumentError("shadow split needs at least 2 samples");
  }
  MembershipGame game;
  game.ds_ = &ds;
  game.splits_ = splits;
  game.cfg_ = cfg;
  game.cfg_.pgd.step = ResolveStep(cfg.pgd, ds);

  ASSIGN_OR_RETURN(game.target_, Train(cfg.target, ds, splits.train));
  std::vector<size_t> shadow = splits.shadow;
  std::mt19937_64 rng(cfg.seed ^ 0x5eed5eedULL);
  std::shuffle(shadow.begin(), shadow.end(), rng);
  const size_t in = shadow.size() / 2;
  std::vector<size_t> shadow_in(shadow.begin(), shadow.begin() + in);
  ModelSpec shadow_spec = cfg.target;
  shadow_spec.seed = cfg.target.seed + 1;
  ASSIGN_OR_RETURN(game.shadow_, Train(shadow_spec, ds, shadow_in));
  std::sort(shadow.begin(), shadow.begin() + in);
  std::sort(shadow.begin() + in, shadow.end());
  game.shadow_rows_ = shadow;
  game.shadow_bits_.assign(shadow.size(), 0);
  std::fill(game.shadow_bits_.begin(), game.shadow_bits_.begin() + in, 1);

  ASSIGN_OR_RETURN(game.shadow_base_,
                   game.Scores(game.shadow_, game.shadow_rows_, game.shadow_bits_));
  std::vector<size_t> challenge_rows = splits.train;
  challenge_rows.insert(challenge_rows.end(), splits.nonmember_pool.begin(),
                        splits.nonmember_pool.end());
  std::vector<uint8_t> challenge_bits(challenge_rows.size(), 0);
  std::fill(challenge_bits.begin(), challenge_bits.begin() + splits.train.size(), 1);
  ASSIGN_OR_RETURN(MembershipScore challenge,
                   game.Scores(game.target_, challenge_rows, challenge_bits));
  game.target_score_.assign(ds.size(), std::numeric_limits<double>::quiet_NaN());
  for (size_t i = 0; i < challenge_rows.size(); ++i) {
    game.target_score_[challenge_rows[i]] = challenge.scores[i];
  }
  game.metric_name_ = challenge.metric;
  return game;
}

absl::StatusOr<MembershipScore> MembershipGame::Scores(
    const Model& model, std::span<const size_t> rows,
    std::span<const uint8_t> bits) const {
  switch (cfg_.adversary) {
    case AdversaryKind::kMetric:
      return ScoreRows(model, *ds_, rows, cfg_.metric, cfg_.pgd, cfg_.threads);
    case AdversaryKind::kRandom: {
      // One stream over all rows keeps each row's noise independent of which
      // subset is being scored.
      std::vector<double> noise(ds_->size());
      std::mt19937_64 rng(cfg_.seed ^ 0xa11ce5ULL);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (double& v : noise) v = u(rng);
      MembershipScore out{{}, {}, "random"};
      for (size_t r : rows) {
        out.ids.push_back(ds_->id(r));
        out.scores.push_back(noise[r]);
      }
      return out;
    }
    case AdversaryKind::kOracle: {
      MembershipScore out{{}, {}, "oracle"};
      for (size_t i = 0; i < rows.size(); ++i) {
        out.ids.push_back(ds_->id(rows[i]));
        out.scores.push_back(bits[i] ? 1.0 : 0.0);
      }
      return out;
    }
  }
  return absl::InternalError("unknown adversary");
}

absl::StatusOr<ThresholdTable> MembershipGame::Fit(
    const ImportanceVector* importance, double k_cal) const {
  MembershipScore shadow = shadow_base_;
  if (k_cal != 0.0) {
    if (importance == nullptr) {
      return absl::InvalidArgumentError("calibration needs an importance vector");
    }
    ASSIGN_OR_RETURN(shadow, Calibrate(shadow_base_, *importance, k_cal));
  }
  std::vector<uint32_t> labels(shadow_rows_.size(), 0);
  uint32_t classes = 1;
  if (cfg_.class_thresholds) {
    classes = ds_->class_count();
    for (size_t i = 0; i < shadow_rows_.size(); ++i) labels[i] = ds_->label(shadow_rows_[i]);
  }
  ASSIGN_OR_RETURN(ThresholdTable table,
                   FitThresholds(shadow, shadow_bits_, labels, classes));
  if (!cfg_.class_thresholds) {
    table.thresholds.assign(ds_->class_count(), table.global_threshold);
    table.fell_back.assign(ds_->class_count(), true);
  }
  return table;
}

absl::StatusOr<double> MembershipGame::ShadowAdvantage(
    const ImportanceVector* importance, double k_cal) const {
  ASSIGN_OR_RETURN(ThresholdTable table, Fit(importance, k_cal));
  MembershipScore shadow = shadow_base_;
  if (k_cal != 0.0) {
    ASSIGN_OR_RETURN(shadow, Calibrate(shadow_base_, *importance, k_cal));
  }
  std::vector<uint32_t> labels(shadow_rows_.size());
  for (size_t i = 0; i < shadow_rows_.size(); ++i) labels[i] = ds_->label(shadow_rows_[i]);
  return Advantage(ThresholdAccuracy(table, shadow.scores, shadow_bits_, labels));
}

absl::StatusOr<AttackReport> MembershipGame::Play(
    std::span<const size_t> members, std::span<const size_t> nonmembers,
    const ImportanceVector* importance, double k_cal) const {
  if (members.empty() || nonmembers.empty()) {
    return absl::InvalidArgumentError("challenge set needs members and nonmembers");
  }
  std::vector<std::pair<uint64_t, std::pair<size_t, uint8_t>>> order;
  order.reserve(members.size() + nonmembers.size());
  for (size_t r : members) {
    if (r >= ds_->size() || std::isnan(target_score_[r])) {
      return absl::InvalidArgumentError("member row outside the target training set");
    }
    order.push_back({ds_->id(r), {r, 1}});
  }
  for (size_t r : nonmembers) {
    if (r >= ds_->size() || std::isnan(target_score_[r])) {
      return absl::InvalidArgumentError("nonmember row outside the nonmember pool");
    }
    order.push_back({ds_->id(r), {r, 0}});
  }
  std::sort(order.begin(), order.end());
  for (size_t i = 1; i < order.size(); ++i) {
    if (order[i].first == order[i - 1].first) {
      return absl::InvalidArgumentError("challenge rows repeat");
    }
  }

  MembershipScore base{{}, {}, metric_name_};
  AttackReport report;
  for (const auto& [id, rb] : order) {
    base.ids.push_back(id);
    base.scores.push_back(target_score_[rb.first]);
    report.labels.push_back(ds_->label(rb.first));
    report.is_member.push_back(rb.second);
  }
  MembershipScore scored = base;
  if (k_cal != 0.0) {
    if (importance == nullptr) {
      return absl::InvalidArgumentError("calibration needs an importance vector");
    }
    ASSIGN_OR_RETURN(scored, Calibrate(base, *importance, k_cal));
  }
  ASSIGN_OR_RETURN(report.thresholds, Fit(importance, k_cal));
  report.metric = scored.metric;
  report.k_cal = k_cal;
  report.ids = scored.ids;
  report.scores = scored.scores;
  report.importance_bin.assign(report.ids.size(), -1);
  report.accuracy = ThresholdAccuracy(report.thresholds, report.scores,
                                      report.is_member, report.labels);
  report.advantage = Advantage(report.accuracy);
  ASSIGN_OR_RETURN(report.roc, Roc(report.scores, report.is_member));
  for (double f : {1e-3, 1e-2, 1e-1}) report.tpr_at[f] = TprAtFpr(report.roc, f);
  return report;
}

absl::StatusOr<std::pair<std::vector<size_t>, std::vector<size_t>>>
MembershipGame::RandomChallenge() const {
  const size_t half = cfg_.challenges / 2;
  if (half == 0) return absl::InvalidArgumentError("challenges must be >= 2");
  if (half > splits_.train.size() || half > splits_.nonmember_pool.size()) {
    return absl::ResourceExhaustedError(absl::StrFormat(
        "pool exhaustion: %d challenges need %d members and nonmembers, have "
        "%d and %d",
        cfg_.challenges, half, splits_.train.size(),
        splits_.nonmember_pool.size()));
  }
  return std::make_pair(
      SampleWithoutReplacement(splits_.train, half, cfg_.seed),
      SampleWithoutReplacement(splits_.nonmember_pool, half, cfg_.seed + 1));
}

absl::StatusOr<AttackReport> MembershipGame::PlayRandom(
    const ImportanceVector* importance, double k_cal) const {
  ASSIGN_OR_RETURN(auto rows, RandomChallenge());
  return Play(rows.first, rows.second, importance, k_cal);
}

absl::StatusOr<std::vector<std::vector<size_t>>> MembershipGame::Strata(
    const ImportanceVector& importance, size_t strata) const {
  const size_t n = splits_.train.size();
  if (strata == 0 || strata > n) {
    return absl::InvalidArgumentError("strata must be in [1, |members|]");
  }
  std::vector<uint64_t> ids(n);
  for (size_t i = 0; i < n; ++i) ids[i] = ds_->id(splits_.train[i]);
  ASSIGN_OR_RETURN(ImportanceVector iv, Restrict(importance, ids));
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (iv.values[a] != iv.values[b]) return iv.values[a] < iv.values[b];
    return ids[a] < ids[b];
  });
  const size_t per = n / strata;
  std::vector<std::vector<size_t>> groups(strata);
  for (size_t s = 0; s < strata; ++s) {
    const size_t begin = s * per;
    const size_t end = s + 1 == strata ? n : begin + per;
    for (size_t i = begin; i < end; ++i) groups[s].push_back(splits_.train[order[i]]);
  }
  return groups;
}

absl::StatusOr<std::vector<AttackReport>> MembershipGame::PlayStratified(
    const ImportanceVector& importance, size_t strata) const {
  ASSIGN_OR_RETURN(auto groups, Strata(importance, strata));
  const size_t largest = groups.back().size();
  if (largest > splits_.nonmember_pool.size()) {
    return absl::ResourceExhaustedError(
        "pool exhaustion: nonmember pool smaller than a stratum");
  }
  const auto nonmembers =
      SampleWithoutReplacement(splits_.nonmember_pool, largest, cfg_.seed + 2);
  std::unordered_map<uint64_t, int> bin_of;
  for (size_t s = 0; s < strata; ++s) {
    for (size_t r : groups[s]) bin_of[ds_->id(r)] = static_cast<int>(s);
  }
  std::vector<AttackReport> reports;
  for (size_t s = 0; s < strata; ++s) {
    std::span<const size_t> nm(nonmembers.data(), groups[s].size());
    ASSIGN_OR_RETURN(AttackReport rep, Play(groups[s], nm));
    for (size_t i = 0; i < rep.ids.size(); ++i) {
      if (rep.is_member[i]) rep.importance_bin[i] = bin_of.at(rep.ids[i]);
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

absl::StatusOr<CalibrationSearch> SearchCalibration(
    const MembershipGame& game, const ImportanceVector& importance,
    std::span<const size_t> members, std::span<const size_t> nonmembers) {
  const auto& shadow = game.shadow_base();
  ASSIGN_OR_RETURN(ImportanceVector shadow_iv, Restrict(importance, shadow.ids));
  const double s_std = StdDev(shadow.scores);
  const double i_std = StdDev(shadow_iv.values);
  std::vector<double> grid = {0.0};
  if (s_std > 0.0 && i_std > 0.0) {
    const double scale = s_std / i_std;
    for (int j = -6; j <= 6; ++j) {
      grid.push_back(std::ldexp(scale, j));
      grid.push_back(-std::ldexp(scale, j));
    }
  }
  CalibrationSearch out;
  double best_shadow = -std::numeric_limits<double>::infinity();
  out.best_advantage = -std::numeric_limits<double>::infinity();
  for (double k : grid) {
    CalibrationPoint pt;
    pt.k_cal = k;
    ASSIGN_OR_RETURN(pt.shadow_advantage, game.ShadowAdvantage(&importance, k));
    ASSIGN_OR_RETURN(AttackReport rep, game.Play(members, nonmembers, &importance, k));
    pt.target_advantage = rep.advantage;
    if (k == 0.0) out.base_advantage = rep.advantage;
    if (pt.shadow_advantage > best_shadow) {
      best_shadow = pt.shadow_advantage;
      out.selected_k = k;
      out.selected_advantage = rep.advantage;
    }
    if (pt.target_advantage > out.best_advantage) {
      out.best_advantage = pt.target_advantage;
      out.best_k = k;
    }
    out.grid.push_back(pt);
  }
  return out;
}

}  // namespace shapval
