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

#ifndef SHAPVAL_CONFIG_H_
#define SHAPVAL_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "json.hpp"
#include "shapval/dataset.h"
#include "shapval/model.h"

namespace shapval {

struct GeneratorConfig {
  uint64_t seed = 1;
  uint32_t classes = 10;
  size_t per_class = 2000;
  size_t dim = 36;
  double sep = 3.0;
  size_t center_shift = 0;
  double label_noise = 0.1;
  std::vector<int> image_shape = {6, 6, 1};  // empty for tabular data
};

struct DatasetConfig {
  std::string manifest;  // empty selects the generator
  GeneratorConfig generator;
};

// Split sizes in rows; the nonmember pool takes every remaining row.
struct SplitConfig {
  size_t train = 2000;
  size_t validation = 1000;
  size_t test = 1000;
  size_t shadow = 2000;
};

struct ValuationConfig {
  int k = 6;
  std::string aggregation = "mean";
  // Loss-vs-importance bins for the value command; 0 disables.
  size_t bins = 20;
  // Train on the top / bottom fraction by importance; 0 disables.
  double utility_fraction = 0.2;
  size_t utility_seeds = 5;
};

struct ModelConfig {
  std::string kind = "mlp";
  int knn_k = 1;
  int hidden_width = 64;
  uint64_t seed = 0;
  int epochs = 30;
  double learning_rate = 0.05;
  double l2 = 1e-4;
  int batch_size = 32;
};

struct MiaConfig {
  std::string adversary = "metric";
  std::vector<std::string> metrics = {"confidence"};
  size_t challenges = 2000;
  size_t stratify = 0;
  bool calimem = false;
  bool class_thresholds = true;
  std::string norm = "linf";
  double pgd_step = 0.0;  // 0: 0.01 * feature range
  int pgd_max_iters = 1000;
};

struct StealConfig {
  std::vector<size_t> budgets = {100};
  std::vector<std::string> selections = {"top", "bottom", "random"};
  std::vector<uint64_t> seeds = {0, 1, 2, 3, 4};
  bool cross_distribution = false;
  uint64_t cross_seed_offset = 1000;
  size_t cross_center_shift = 0;  // 0: dim / 2
  size_t cross_pool = 0;          // 0: same size as the native pool
  std::string surrogate_kind;     // empty: the target's kind
};

struct BackdoorConfig {
  std::vector<size_t> budgets = {20, 200};
  std::vector<std::string> selections = {"top", "bottom", "random"};
  std::vector<uint64_t> seeds = {0, 1, 2, 3, 4};
  uint32_t target_class = 0;
  int trigger_size = 0;  // 0: scaled to the image side
  std::vector<double> fractions;  // fraction-importance study when non-empty
  size_t fraction_seeds = 10;
};

struct OnionConfig {
  double remove_fraction = 0.2;
  std::vector<std::string> sides = {"top", "bottom"};
};

struct DuplicateConfig {
  size_t targets = 50;
  size_t copies = 16;
};

struct AugmentConfig {
  size_t count = 500;
  std::vector<std::string> transforms = {"hflip"};
  std::string mode = "replace";
};

struct ShadowConfig {
  double fraction = 0.2;
};

struct OracleConfig {
  size_t n = 8;
  int k = 2;
  size_t seeds = 50;
  size_t validation = 3;
  double tolerance = 1e-9;
};

struct ReportConfig {
  std::string scores;  // CSV with id,score,is_member[,importance_bin]
};

struct ExperimentConfig {
  uint64_t seed = 1;
  DatasetConfig dataset;
  SplitConfig splits;
  ValuationConfig valuation;
  ModelConfig model;
  MiaConfig mia;
  StealConfig steal;
  BackdoorConfig backdoor;
  OnionConfig onion;
  DuplicateConfig duplicate;
  AugmentConfig augment;
  ShadowConfig shadow;
  OracleConfig oracle;
  ReportConfig report;

  // Checks ranges and that every enumerated string parses.
  absl::Status Validate() const;
};

nlohmann::json ConfigToJson(const ExperimentConfig& cfg);
// Missing keys keep their defaults; unknown keys and type mismatches are
// errors.
absl::StatusOr<ExperimentConfig> ConfigFromJson(const nlohmann::json& j);
absl::StatusOr<ExperimentConfig> LoadConfig(const std::filesystem::path& path);

absl::StatusOr<ModelSpec> ToModelSpec(const ModelConfig& m);
GaussianMixtureParams ToGeneratorParams(const GeneratorConfig& g);

// Loads the manifest or runs the generator. Relative manifest paths resolve
// against `base_dir`.
absl::StatusOr<Dataset> LoadDatasetFor(const ExperimentConfig& cfg,
                                       const std::filesystem::path& base_dir);

// Seeded shuffle sliced into train, validation, test, shadow and the
// nonmember pool (the remainder); member_pool mirrors train.
absl::StatusOr<SplitSet> MakeSplits(const SplitConfig& s, size_t n,
                                    uint64_t seed);

}  // namespace shapval

#endif  // SHAPVAL_CONFIG_H_
