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

#include "shapval/config.h"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "shapval/backdoor.h"
#include "shapval/dynamics.h"
#include "shapval/mia.h"
#include "shapval/status_macros.h"
#include "shapval/steal.h"
#include "shapval/valuation.h"

namespace shapval {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GeneratorConfig, seed, classes,
                                                per_class, dim, sep,
                                                center_shift, label_noise,
                                                image_shape)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DatasetConfig, manifest,
                                                generator)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SplitConfig, train, validation,
                                                test, shadow)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ValuationConfig, k, aggregation,
                                                bins, utility_fraction,
                                                utility_seeds)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelConfig, kind, knn_k,
                                                hidden_width, seed, epochs,
                                                learning_rate, l2, batch_size)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MiaConfig, adversary, metrics,
                                                challenges, stratify, calimem,
                                                class_thresholds, norm,
                                                pgd_step, pgd_max_iters)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(StealConfig, budgets,
                                                selections, seeds,
                                                cross_distribution,
                                                cross_seed_offset,
                                                cross_center_shift, cross_pool,
                                                surrogate_kind)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BackdoorConfig, budgets,
                                                selections, seeds, target_class,
                                                trigger_size, fractions,
                                                fraction_seeds)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(OnionConfig, remove_fraction,
                                                sides)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DuplicateConfig, targets,
                                                copies)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AugmentConfig, count,
                                                transforms, mode)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ShadowConfig, fraction)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(OracleConfig, n, k, seeds,
                                                validation, tolerance)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ReportConfig, scores)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExperimentConfig, seed, dataset,
                                                splits, valuation, model, mia,
                                                steal, backdoor, onion,
                                                duplicate, augment, shadow,
                                                oracle, report)

namespace {

// Every key of `given` must appear in `known`, recursively through objects.
absl::Status CheckKeys(const nlohmann::json& given,
                       const nlohmann::json& known,
                       const std::string& path) {
  if (!given.is_object()) return absl::OkStatus();
  for (const auto& [key, value] : given.items()) {
    auto it = known.find(key);
    if (it == known.end()) {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown config key '", path, key, "'"));
    }
    if (value.is_object()) {
      if (!it->is_object()) {
        return absl::InvalidArgumentError(
            absl::StrCat("config key '", path, key, "' is not an object"));
      }
      RETURN_IF_ERROR(CheckKeys(value, *it, absl::StrCat(path, key, ".")));
    }
  }
  return absl::OkStatus();
}

absl::Status Require(bool ok, const std::string& what) {
  return ok ? absl::OkStatus() : absl::InvalidArgumentError(what);
}

template <typename Parse>
absl::Status ParseAll(const std::vector<std::string>& names, Parse parse) {
  for (const auto& n : names) RETURN_IF_ERROR(parse(n).status());
  return absl::OkStatus();
}

absl::StatusOr<Aggregation> ParseAggregation(const std::string& name) {
  if (name == "mean") return Aggregation::kMean;
  if (name == "sum") return Aggregation::kSum;
  return absl::InvalidArgumentError(absl::StrCat("unknown aggregation '", name, "'"));
}

absl::StatusOr<AdversaryKind> ParseAdversary(const std::string& name) {
  if (name == "metric") return AdversaryKind::kMetric;
  if (name == "random") return AdversaryKind::kRandom;
  if (name == "oracle") return AdversaryKind::kOracle;
  return absl::InvalidArgumentError(absl::StrCat("unknown adversary '", name, "'"));
}

absl::StatusOr<RemoveSide> ParseSide(const std::string& name) {
  if (name == "top") return RemoveSide::kTop;
  if (name == "bottom") return RemoveSide::kBottom;
  return absl::InvalidArgumentError(absl::StrCat("unknown removal side '", name, "'"));
}

absl::StatusOr<AugmentMode> ParseAugmentMode(const std::string& name) {
  if (name == "replace") return AugmentMode::kReplace;
  if (name == "add") return AugmentMode::kAdd;
  return absl::InvalidArgumentError(absl::StrCat("unknown augment mode '", name, "'"));
}

}  // namespace

absl::Status ExperimentConfig::Validate() const {
  const auto& g = dataset.generator;
  if (dataset.manifest.empty()) {
    RETURN_IF_ERROR(Require(g.classes >= 2 && g.per_class >= 1 && g.dim >= 1,
                            "generator needs classes >= 2, per_class >= 1, dim >= 1"));
    RETURN_IF_ERROR(Require(g.sep >= 0.0, "generator sep must be >= 0"));
    RETURN_IF_ERROR(Require(g.label_noise >= 0.0 && g.label_noise <= 1.0,
                            "generator label_noise must lie in [0, 1]"));
    if (!g.image_shape.empty()) {
      RETURN_IF_ERROR(Require(g.image_shape.size() == 3 &&
                                  std::all_of(g.image_shape.begin(),
                                              g.image_shape.end(),
                                              [](int v) { return v >= 1; }),
                              "image_shape must be [H, W, Ch] with positive entries"));
      RETURN_IF_ERROR(Require(static_cast<size_t>(g.image_shape[0]) *
                                      g.image_shape[1] * g.image_shape[2] ==
                                  g.dim,
                              "image_shape does not match dim"));
    }
  }
  RETURN_IF_ERROR(Require(valuation.k >= 1, "valuation.k must be >= 1"));
  RETURN_IF_ERROR(ParseAggregation(valuation.aggregation).status());
  RETURN_IF_ERROR(Require(valuation.utility_fraction >= 0.0 &&
                              valuation.utility_fraction <= 0.5,
                          "valuation.utility_fraction must lie in [0, 0.5]"));
  ASSIGN_OR_RETURN(ModelSpec spec, ToModelSpec(model));
  RETURN_IF_ERROR(spec.Validate());

  RETURN_IF_ERROR(ParseAdversary(mia.adversary).status());
  RETURN_IF_ERROR(Require(!mia.metrics.empty(), "mia.metrics is empty"));
  RETURN_IF_ERROR(ParseAll(mia.metrics, [](const std::string& s) { return ParseMetric(s); }));
  RETURN_IF_ERROR(ParseNorm(mia.norm).status());
  RETURN_IF_ERROR(Require(mia.pgd_step >= 0.0, "mia.pgd_step must be >= 0"));
  RETURN_IF_ERROR(Require(mia.pgd_max_iters >= 0, "mia.pgd_max_iters must be >= 0"));

  RETURN_IF_ERROR(ParseAll(steal.selections, [](const std::string& s) { return ParseSelection(s); }));
  RETURN_IF_ERROR(ParseAll(backdoor.selections, [](const std::string& s) { return ParseSelection(s); }));
  RETURN_IF_ERROR(Require(!steal.cross_distribution || dataset.manifest.empty(),
                          "steal.cross_distribution needs the generator"));
  if (!steal.surrogate_kind.empty()) {
    RETURN_IF_ERROR(ParseModelKind(steal.surrogate_kind).status());
  }
  for (double f : backdoor.fractions) {
    RETURN_IF_ERROR(Require(f > 0.0 && f <= 1.0, "backdoor fractions must lie in (0, 1]"));
  }
  RETURN_IF_ERROR(Require(onion.remove_fraction >= 0.0 && onion.remove_fraction < 1.0,
                          "onion.remove_fraction must lie in [0, 1)"));
  RETURN_IF_ERROR(ParseAll(onion.sides, [](const std::string& s) { return ParseSide(s); }));
  RETURN_IF_ERROR(ParseAll(augment.transforms, [](const std::string& s) { return ParseTransform(s); }));
  RETURN_IF_ERROR(ParseAugmentMode(augment.mode).status());
  RETURN_IF_ERROR(Require(shadow.fraction > 0.0 && shadow.fraction <= 1.0,
                          "shadow.fraction must lie in (0, 1]"));
  RETURN_IF_ERROR(Require(oracle.n >= 1 && oracle.n <= 16, "oracle.n must lie in [1, 16]"));
  RETURN_IF_ERROR(Require(oracle.k >= 1, "oracle.k must be >= 1"));
  RETURN_IF_ERROR(Require(oracle.validation >= 1, "oracle.validation must be >= 1"));
  return absl::OkStatus();
}

nlohmann::json ConfigToJson(const ExperimentConfig& cfg) {
  return nlohmann::json(cfg);
}

absl::StatusOr<ExperimentConfig> ConfigFromJson(const nlohmann::json& j) {
  if (!j.is_object()) return absl::InvalidArgumentError("config must be a JSON object");
  RETURN_IF_ERROR(CheckKeys(j, ConfigToJson(ExperimentConfig{}), ""));
  ExperimentConfig cfg;
  try {
    cfg = j.get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("config: ", e.what()));
  }
  return cfg;
}

absl::StatusOr<ExperimentConfig> LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot read config ", path.string()));
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("config ", path.string(), ": ", e.what()));
  }
  return ConfigFromJson(j);
}

absl::StatusOr<ModelSpec> ToModelSpec(const ModelConfig& m) {
  ModelSpec spec;
  ASSIGN_OR_RETURN(spec.kind, ParseModelKind(m.kind));
  spec.knn_k = m.knn_k;
  spec.hidden_width = m.hidden_width;
  spec.seed = m.seed;
  spec.epochs = m.epochs;
  spec.learning_rate = m.learning_rate;
  spec.l2 = m.l2;
  spec.batch_size = m.batch_size;
  return spec;
}

GaussianMixtureParams ToGeneratorParams(const GeneratorConfig& g) {
  GaussianMixtureParams p;
  p.seed = g.seed;
  p.classes = g.classes;
  p.per_class = g.per_class;
  p.dim = g.dim;
  p.sep = g.sep;
  p.center_shift = g.center_shift;
  p.label_noise = g.label_noise;
  if (g.image_shape.size() == 3) {
    p.image_shape = ImageShape{g.image_shape[0], g.image_shape[1], g.image_shape[2]};
  }
  return p;
}

absl::StatusOr<Dataset> LoadDatasetFor(const ExperimentConfig& cfg,
                                       const std::filesystem::path& base_dir) {
  if (cfg.dataset.manifest.empty()) {
    return MakeGaussianMixture(ToGeneratorParams(cfg.dataset.generator));
  }
  std::filesystem::path p = cfg.dataset.manifest;
  if (p.is_relative()) p = base_dir / p;
  return LoadDataset(p);
}

absl::StatusOr<SplitSet> MakeSplits(const SplitConfig& s, size_t n,
                                    uint64_t seed) {
  const size_t used = s.train + s.validation + s.test + s.shadow;
  if (used > n) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "splits need %d rows but the dataset has %d", used, n));
  }
  std::vector<size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  size_t offset = 0;
  auto take = [&](size_t count) {
    std::vector<size_t> out(perm.begin() + offset, perm.begin() + offset + count);
    offset += count;
    return out;
  };
  SplitSet split;
  split.train = take(s.train);
  split.validation = take(s.validation);
  split.test = take(s.test);
  split.shadow = take(s.shadow);
  split.nonmember_pool = take(n - used);
  split.member_pool = split.train;
  RETURN_IF_ERROR(split.Validate(n));
  return split;
}

}  // namespace shapval
