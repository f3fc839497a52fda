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

#ifndef SHAPVAL_COMMANDS_H_
#define SHAPVAL_COMMANDS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "shapval/backdoor.h"
#include "shapval/config.h"
#include "shapval/dynamics.h"
#include "shapval/mia.h"
#include "shapval/steal.h"
#include "shapval/valuation.h"

namespace shapval {

struct RunContext {
  ExperimentConfig cfg;
  std::filesystem::path out;
  // Relative dataset manifests resolve here.
  std::filesystem::path base_dir = ".";
  // Caps worker threads; never recorded in outputs.
  int threads = 1;
};

// Writes config.resolved.json into ctx.out (created if needed).
absl::Status WriteResolvedConfig(const RunContext& ctx);

struct ValueOutcome {
  ImportanceVector importance;
  // Per-sample loss of the model trained on the train split, summed per
  // importance bin (ascending importance). Empty when valuation.bins == 0.
  std::vector<BinAggregate> loss_bins;
  double loss_trend_spearman = 0.0;  // bin rank vs bin-summed loss
  // Test accuracy of models trained on the top / bottom
  // valuation.utility_fraction of the train split, one entry per seed.
  std::vector<double> top_accuracy;
  std::vector<double> bottom_accuracy;
};
absl::StatusOr<ValueOutcome> RunValue(const RunContext& ctx);

struct OracleOutcome {
  double max_abs_diff = 0.0;
  size_t instances = 0;
  bool pass = false;
};
absl::StatusOr<OracleOutcome> RunOracleCheck(const RunContext& ctx);

struct MiaMetricOutcome {
  std::string metric;
  AttackReport overall;
  std::vector<AttackReport> strata;
  std::vector<double> mean_member_score;  // per stratum
  double strata_spearman = 0.0;           // stratum rank vs advantage
  bool has_calibration = false;
  CalibrationSearch calibration;
};
struct MiaOutcome {
  std::vector<MiaMetricOutcome> metrics;
};
absl::StatusOr<MiaOutcome> RunMia(const RunContext& ctx);

struct StealOutcome {
  double target_accuracy = 0.0;
  std::vector<StealRow> rows;  // queries from the shadow split
  std::vector<StealSummary> summary;
  // Queries from a shifted generator; empty unless cross_distribution.
  std::vector<StealRow> cross_rows;
  std::vector<StealSummary> cross_summary;
};
absl::StatusOr<StealOutcome> RunSteal(const RunContext& ctx);

struct FractionRow {
  double fraction = 0.0;
  uint64_t seed = 0;
  Correlation correlation;
};
struct BackdoorOutcome {
  double baseline_clean_accuracy = 0.0;
  TriggerSpec trigger;
  std::vector<PoisonRow> rows;
  std::vector<FractionRow> fractions;
};
absl::StatusOr<BackdoorOutcome> RunBackdoor(const RunContext& ctx);

struct OnionOutcome {
  std::map<std::string, OnionResult> arms;  // keyed by "top" / "bottom"
  bool band_identical = true;
};
absl::StatusOr<OnionOutcome> RunOnion(const RunContext& ctx);

absl::StatusOr<DuplicationResult> RunDuplicate(const RunContext& ctx);
absl::StatusOr<DeltaReport> RunAugment(const RunContext& ctx);
absl::StatusOr<ShadowImportance> RunShadow(const RunContext& ctx);

struct ReportOutcome {
  RocCurve roc;
  double advantage = 0.0;
  std::map<double, double> tpr_at;
};
absl::StatusOr<ReportOutcome> RunReport(const RunContext& ctx);

}  // namespace shapval

#endif  // SHAPVAL_COMMANDS_H_
