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

#ifndef SHAPVAL_MODEL_H_
#define SHAPVAL_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "shapval/dataset.h"

namespace shapval {

enum class ModelKind { kKnn, kSoftmaxRegression, kMlp };

std::string ModelKindName(ModelKind kind);
absl::StatusOr<ModelKind> ParseModelKind(std::string_view name);

struct ModelSpec {
  ModelKind kind = ModelKind::kMlp;
  int knn_k = 1;
  int hidden_width = 64;
  uint64_t seed = 0;
  int epochs = 30;
  double learning_rate = 0.05;
  double l2 = 1e-4;  // weight decay on weight matrices, biases excluded
  int batch_size = 32;

  absl::Status Validate() const;
};

// Row-stochastic M x C matrix of posteriors, rows aligned to `ids`.
struct PredictionSet {
  std::vector<uint64_t> ids;
  size_t classes = 0;
  std::vector<double> posteriors;

  size_t size() const { return ids.size(); }
  std::span<const double> row(size_t i) const {
    return {posteriors.data() + i * classes, classes};
  }
  std::vector<uint32_t> Argmax() const;
};

// Per-row target distributions used for surrogate fitting; rows align with the
// training indices passed to Train.
struct SoftLabels {
  size_t classes = 0;
  std::vector<double> probs;
};

using LabelOverride =
    std::variant<std::monostate, std::vector<uint32_t>, SoftLabels>;

// A trained classifier. k-NN models keep their training rows; softmax
// regression and the one-hidden-layer ReLU network keep a flat parameter
// vector laid out as [W (C x d), b (C)] and [W1 (H x d), b1 (H), W2 (C x H),
// b2 (C)] respectively. Immutable once trained except through
// mutable_parameters(), which exists for gradient checking.
class Model {
 public:
  ModelKind kind() const { return spec_.kind; }
  const ModelSpec& spec() const { return spec_; }
  size_t dim() const { return dim_; }
  uint32_t classes() const { return classes_; }
  bool differentiable() const { return spec_.kind != ModelKind::kKnn; }

  std::span<const double> parameters() const { return params_; }
  std::span<double> mutable_parameters() { return params_; }

  // Mean training loss per epoch, in epoch order.
  const std::vector<double>& loss_history() const { return loss_history_; }

  // Writes the posterior for one input into `out` (size classes()).
  void Posterior(std::span<const double> x, std::span<double> out) const;

 private:
  friend absl::StatusOr<Model> InitModel(const ModelSpec&, size_t, uint32_t);
  friend absl::StatusOr<Model> Train(const ModelSpec&, const Dataset&,
                                     std::span<const size_t>,
                                     const LabelOverride&);
  friend absl::StatusOr<Model> MakeLinearModel(size_t, uint32_t,
                                               std::vector<double>,
                                               std::vector<double>);
  friend absl::StatusOr<Model> LoadModel(const std::filesystem::path&);
  friend absl::Status SaveModel(const Model&, const std::filesystem::path&,
                                const std::string&);
  friend class ModelMath;

  ModelSpec spec_;
  size_t dim_ = 0;
  uint32_t classes_ = 0;
  std::vector<double> params_;
  std::vector<double> loss_history_;
  // k-NN storage.
  std::vector<float> neighbors_;
  std::vector<uint32_t> neighbor_labels_;
  std::vector<uint64_t> neighbor_ids_;
};

// Seeded initialisation (uniform in +-1/sqrt(fan_in)) without any training.
absl::StatusOr<Model> InitModel(const ModelSpec& spec, size_t dim,
                                uint32_t classes);

// Softmax regression with the given C x d weights and C biases.
absl::StatusOr<Model> MakeLinearModel(size_t dim, uint32_t classes,
                                      std::vector<double> weights,
                                      std::vector<double> bias);

// Mini-batch gradient descent on cross-entropy with a shuffling schedule drawn
// from spec.seed; k-NN just stores the rows. Hard-label overrides replace the
// dataset labels, soft-label overrides switch the loss to cross-entropy
// against the supplied distributions (k-NN uses their argmax).
absl::StatusOr<Model> Train(const ModelSpec& spec, const Dataset& ds,
                            std::span<const size_t> train_idx,
                            const LabelOverride& labels = {});

absl::StatusOr<PredictionSet> PredictProba(const Model& model,
                                           const Dataset& ds,
                                           std::span<const size_t> idx);

// -log p_y with p_y floored at 1e-12.
absl::StatusOr<std::vector<double>> PerSampleLoss(const Model& model,
                                                  const Dataset& ds,
                                                  std::span<const size_t> idx);

// Fraction of rows whose argmax posterior equals the dataset label.
absl::StatusOr<double> EvaluateAccuracy(const Model& model, const Dataset& ds,
                                        std::span<const size_t> idx);

// Mean cross-entropy over `idx` plus (l2/2)*||W||^2; fills `grad` with the
// gradient with respect to parameters() unless `grad` is null. Differentiable
// models only.
absl::StatusOr<double> LossAndGradient(const Model& model, const Dataset& ds,
                                       std::span<const size_t> idx,
                                       std::vector<double>* grad);

// Gradient of -log p_y(x) with respect to the input x.
absl::StatusOr<std::vector<double>> InputGradient(const Model& model,
                                                  std::span<const double> x,
                                                  uint32_t y);

// <stem>.json descriptor + <stem>.f32 blob (parameters, or the stored rows for
// k-NN). Parameters round-trip at float precision.
absl::Status SaveModel(const Model& model, const std::filesystem::path& dir,
                       const std::string& stem);
absl::StatusOr<Model> LoadModel(const std::filesystem::path& descriptor);

}  // namespace shapval

#endif  // SHAPVAL_MODEL_H_
