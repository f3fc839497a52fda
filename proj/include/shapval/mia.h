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

#ifndef SHAPVAL_MIA_H_
#define SHAPVAL_MIA_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "shapval/dataset.h"
#include "shapval/metrics.h"
#include "shapval/model.h"
#include "shapval/valuation.h"

namespace shapval {

// Every membership score is oriented so that larger means more member-like.
enum class MetricKind {
  kConfidence,          // p_y
  kNegEntropy,          // sum_i p_i ln p_i
  kNegModifiedEntropy,  // (1-p_y) ln p_y + sum_{i!=y} p_i ln(1-p_i)
  kBoundaryDistance,    // PGD distance to the decision boundary
};

std::string MetricName(MetricKind metric);
absl::StatusOr<MetricKind> ParseMetric(std::string_view name);

struct MembershipScore {
  std::vector<uint64_t> ids;
  std::vector<double> scores;
  std::string metric;
};

// Posterior-based metrics. Log arguments are floored at 1e-12.
absl::StatusOr<MembershipScore> Score(MetricKind metric,
                                      const PredictionSet& posteriors,
                                      std::span<const uint32_t> labels);

// score + k_cal * importance, joined by id.
absl::StatusOr<MembershipScore> Calibrate(const MembershipScore& base,
                                          const ImportanceVector& importance,
                                          double k_cal);

// Per-class thresholds; a sample is called a member when score >= its
// class threshold.
struct ThresholdTable {
  std::vector<double> thresholds;
  // Classes lacking members or nonmembers in the shadow set use the global
  // threshold.
  std::vector<bool> fell_back;
  double global_threshold = 0.0;

  bool IsMember(double score, uint32_t label) const {
    return score >= thresholds[label];
  }
};

// Sweeps midpoints of the sorted unique shadow scores (plus one threshold
// below and one above all of them) and keeps the most accurate per class,
// preferring the larger threshold on ties.
absl::StatusOr<ThresholdTable> FitThresholds(
    const MembershipScore& shadow, std::span<const uint8_t> membership,
    std::span<const uint32_t> labels, uint32_t classes);

double ThresholdAccuracy(const ThresholdTable& table,
                         std::span<const double> scores,
                         std::span<const uint8_t> membership,
                         std::span<const uint32_t> labels);

enum class Norm { kL1, kL2, kLinf };

std::string NormName(Norm norm);
absl::StatusOr<Norm> ParseNorm(std::string_view name);

struct PgdOptions {
  Norm norm = Norm::kLinf;
  // <= 0 means 0.01 * (feature max - feature min) of the scored dataset.
  double step = 0.0;
  int max_iters = 1000;
};

// Untargeted steepest ascent of -log p_y under `norm` (sign step for linf,
// normalised gradient for l2, largest coordinate for l1) until the predicted
// class changes; returns the norm of the total perturbation at the first
// misclassified iterate, 0 if x is already misclassified, and +infinity if
// max_iters steps never leave the class.
absl::StatusOr<double> BoundaryDistance(const Model& model,
                                        std::span<const float> x, uint32_t y,
                                        const PgdOptions& opts);

// Scores rows `idx` of `ds` under `model`. Boundary distances that never
// cross are reported as (max_iters + 1) * step so scores stay finite; that
// bound exceeds any reachable distance.
absl::StatusOr<MembershipScore> ScoreRows(const Model& model, const Dataset& ds,
                                          std::span<const size_t> idx,
                                          MetricKind metric,
                                          const PgdOptions& pgd, int threads = 1);

enum class AdversaryKind { kMetric, kRandom, kOracle };

struct GameConfig {
  uint64_t seed = 0;
  ModelSpec target;  // the shadow model uses the same spec with seed + 1
  AdversaryKind adversary = AdversaryKind::kMetric;
  MetricKind metric = MetricKind::kConfidence;
  PgdOptions pgd;
  // Balanced challenge-set size; half members, half nonmembers.
  size_t challenges = 2000;
  bool class_thresholds = true;
  int threads = 1;
};

struct AttackReport {
  std::string metric;
  double k_cal = 0.0;
  std::vector<uint64_t> ids;
  std::vector<uint32_t> labels;
  std::vector<double> scores;
  std::vector<uint8_t> is_member;
  std::vector<int> importance_bin;  // -1 when unknown
  double accuracy = 0.0;
  double advantage = 0.0;
  RocCurve roc;
  std::map<double, double> tpr_at;  // fpr -> tpr at 1e-3, 1e-2, 1e-1
  ThresholdTable thresholds;
};

// Membership security game. The challenger trains the target on
// splits.train; the adversary trains a shadow model on half of splits.shadow
// (the other half are its nonmembers) and fits thresholds there; challenge
// points are drawn from splits.train (members) and splits.nonmember_pool.
// Scores for every candidate row are computed once in Setup. The dataset must
// outlive the game.
class MembershipGame {
 public:
  static absl::StatusOr<MembershipGame> Setup(const Dataset& ds,
                                              const SplitSet& splits,
                                              const GameConfig& cfg);

  const Model& target() const { return target_; }
  const Model& shadow() const { return shadow_; }
  std::span<const size_t> shadow_rows() const { return shadow_rows_; }
  std::span<const uint8_t> shadow_membership() const { return shadow_bits_; }

  // Plays members vs nonmembers (dataset rows taken from splits.train and
  // splits.nonmember_pool). With k_cal != 0 both the shadow scores used for
  // threshold fitting and the challenge scores are calibrated with
  // `importance`. Report rows are ordered by id.
  absl::StatusOr<AttackReport> Play(std::span<const size_t> members,
                                    std::span<const size_t> nonmembers,
                                    const ImportanceVector* importance = nullptr,
                                    double k_cal = 0.0) const;

  // Seeded balanced challenge rows: cfg.challenges / 2 members and as many
  // nonmembers.
  absl::StatusOr<std::pair<std::vector<size_t>, std::vector<size_t>>>
  RandomChallenge() const;

  // Plays the RandomChallenge() rows.
  absl::StatusOr<AttackReport> PlayRandom(
      const ImportanceVector* importance = nullptr, double k_cal = 0.0) const;

  // Member rows split into `strata` groups by ascending (importance, id);
  // equal sizes with the remainder in the last group.
  absl::StatusOr<std::vector<std::vector<size_t>>> Strata(
      const ImportanceVector& importance, size_t strata) const;

  // Each stratum played against a prefix of one shared nonmember sample, so
  // every report is balanced.
  absl::StatusOr<std::vector<AttackReport>> PlayStratified(
      const ImportanceVector& importance, size_t strata) const;

  // Advantage on the shadow set itself (thresholds fitted and evaluated
  // there) for calibration strength k_cal.
  absl::StatusOr<double> ShadowAdvantage(const ImportanceVector* importance,
                                         double k_cal) const;

  // Uncalibrated shadow-model scores over shadow_rows().
  const MembershipScore& shadow_base() const { return shadow_base_; }

  const GameConfig& config() const { return cfg_; }

 private:
  absl::StatusOr<MembershipScore> Scores(const Model& model,
                                         std::span<const size_t> rows,
                                         std::span<const uint8_t> bits) const;
  absl::StatusOr<ThresholdTable> Fit(const ImportanceVector* importance,
                                     double k_cal) const;

  const Dataset* ds_ = nullptr;
  SplitSet splits_;
  GameConfig cfg_;
  Model target_;
  Model shadow_;
  std::vector<size_t> shadow_rows_;
  std::vector<uint8_t> shadow_bits_;
  MembershipScore shadow_base_;
  // Target-model scores indexed by row; NaN outside members and the pool.
  std::vector<double> target_score_;
  std::string metric_name_;
};

struct CalibrationPoint {
  double k_cal = 0.0;
  double shadow_advantage = 0.0;
  double target_advantage = 0.0;
};

struct CalibrationSearch {
  std::vector<CalibrationPoint> grid;
  double base_advantage = 0.0;    // k_cal = 0 on the challenge set
  double selected_k = 0.0;        // argmax of shadow advantage
  double selected_advantage = 0.0;  // challenge-set advantage at selected_k
  double best_k = 0.0;            // argmax of challenge-set advantage
  double best_advantage = 0.0;
};

// Grid {0, +-2^j for j = -6..6} scaled by std(shadow scores) /
// std(shadow importance). Ties prefer k_cal = 0, then the smaller |k_cal|.
absl::StatusOr<CalibrationSearch> SearchCalibration(
    const MembershipGame& game, const ImportanceVector& importance,
    std::span<const size_t> members, std::span<const size_t> nonmembers);

}  // namespace shapval

#endif  // SHAPVAL_MIA_H_
