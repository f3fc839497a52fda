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

#include "shapval/model.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "absl/strings/str_cat.h"
#include "blob_io.h"
#include "json.hpp"
#include "shapval/status_macros.h"

namespace shapval {

using json = nlohmann::json;

std::string ModelKindName(ModelKind kind) {
  switch (kind) {
    case ModelKind::kKnn:
      return "knn";
    case ModelKind::kSoftmaxRegression:
      return "softmax_regression";
    case ModelKind::kMlp:
      return "mlp";
  }
  return "unknown";
}

absl::StatusOr<ModelKind> ParseModelKind(std::string_view name) {
  if (name == "knn") return ModelKind::kKnn;
  if (name == "softmax_regression" || name == "softmax") {
    return ModelKind::kSoftmaxRegression;
  }
  if (name == "mlp") return ModelKind::kMlp;
  return absl::InvalidArgumentError(absl::StrCat("unknown model kind '", std::string(name), "'"));
}

absl::Status ModelSpec::Validate() const {
  if (knn_k < 1) return absl::InvalidArgumentError("knn_k must be >= 1");
  if (hidden_width < 1) return absl::InvalidArgumentError("hidden_width must be >= 1");
  if (epochs < 0) return absl::InvalidArgumentError("epochs must be >= 0");
  if (!(learning_rate > 0.0)) {
    return absl::InvalidArgumentError("learning_rate must be positive");
  }
  if (!(l2 >= 0.0)) return absl::InvalidArgumentError("l2 must be non-negative");
  if (batch_size < 1) return absl::InvalidArgumentError("batch_size must be >= 1");
  return absl::OkStatus();
}

std::vector<uint32_t> PredictionSet::Argmax() const {
  std::vector<uint32_t> out(size());
  for (size_t i = 0; i < size(); ++i) {
    const auto r = row(i);
    out[i] = static_cast<uint32_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

// Forward and backward passes over the flat parameter layout.
class ModelMath {
 public:
  struct Workspace {
    std::vector<double> pre;  // hidden pre-activations (MLP only)
    std::vector<double> hidden;
    std::vector<double> logits;
    std::vector<double> probs;
    std::vector<double> delta;
  };

  static size_t ParameterCount(const ModelSpec& spec, size_t d, size_t c) {
    switch (spec.kind) {
      case ModelKind::kSoftmaxRegression:
        return c * d + c;
      case ModelKind::kMlp: {
        const size_t h = spec.hidden_width;
        return h * d + h + c * h + c;
      }
      case ModelKind::kKnn:
        return 0;
    }
    return 0;
  }

  // True for entries of parameters() that are weights (subject to l2).
  static bool IsWeight(const Model& m, size_t p) {
    const size_t d = m.dim_, c = m.classes_;
    if (m.kind() == ModelKind::kSoftmaxRegression) return p < c * d;
    const size_t h = m.spec_.hidden_width;
    if (p < h * d) return true;
    if (p < h * d + h) return false;
    return p < h * d + h + c * h;
  }

  static void Forward(const Model& m, std::span<const double> x, Workspace& ws) {
    const size_t d = m.dim_, c = m.classes_;
    const double* w = m.params_.data();
    ws.logits.assign(c, 0.0);
    if (m.kind() == ModelKind::kSoftmaxRegression) {
      const double* b = w + c * d;
      for (size_t k = 0; k < c; ++k) {
        double z = b[k];
        const double* wk = w + k * d;
        for (size_t f = 0; f < d; ++f) z += wk[f] * x[f];
        ws.logits[k] = z;
      }
    } else {
      const size_t h = m.spec_.hidden_width;
      const double* b1 = w + h * d;
      const double* w2 = b1 + h;
      const double* b2 = w2 + c * h;
      ws.pre.resize(h);
      ws.hidden.resize(h);
      for (size_t j = 0; j < h; ++j) {
        double z = b1[j];
        const double* wj = w + j * d;
        for (size_t f = 0; f < d; ++f) z += wj[f] * x[f];
        ws.pre[j] = z;
        ws.hidden[j] = z > 0.0 ? z : 0.0;
      }
      for (size_t k = 0; k < c; ++k) {
        double z = b2[k];
        const double* wk = w2 + k * h;
        for (size_t j = 0; j < h; ++j) z += wk[j] * ws.hidden[j];
        ws.logits[k] = z;
      }
    }
    const double top = *std::max_element(ws.logits.begin(), ws.logits.end());
    ws.probs.resize(c);
    double total = 0.0;
    for (size_t k = 0; k < c; ++k) {
      ws.probs[k] = std::exp(ws.logits[k] - top);
      total += ws.probs[k];
    }
    for (double& p : ws.probs) p /= total;
  }

  // -sum_k q_k log p_k computed from the logits of the last Forward.
  static double CrossEntropy(const Workspace& ws, std::span<const double> q) {
    const double top = *std::max_element(ws.logits.begin(), ws.logits.end());
    double total = 0.0;
    for (double z : ws.logits) total += std::exp(z - top);
    const double log_norm = top + std::log(total);
    double loss = 0.0;
    for (size_t k = 0; k < q.size(); ++k) {
      if (q[k] != 0.0) loss -= q[k] * (ws.logits[k] - log_norm);
    }
    return loss;
  }

  // Adds scale * d(CE)/d(params) into grad (if non-empty) and writes
  // d(CE)/dx into dx (if non-empty). Requires a preceding Forward on x.
  static void Backward(const Model& m, std::span<const double> x,
                       std::span<const double> q, Workspace& ws, double scale,
                       std::span<double> grad, std::span<double> dx) {
    const size_t d = m.dim_, c = m.classes_;
    const double* w = m.params_.data();
    ws.delta.resize(c);
    for (size_t k = 0; k < c; ++k) ws.delta[k] = ws.probs[k] - q[k];
    if (!dx.empty()) std::fill(dx.begin(), dx.end(), 0.0);

    if (m.kind() == ModelKind::kSoftmaxRegression) {
      for (size_t k = 0; k < c; ++k) {
        const double g = ws.delta[k];
        if (!grad.empty()) {
          double* gw = grad.data() + k * d;
          for (size_t f = 0; f < d; ++f) gw[f] += scale * g * x[f];
          grad[c * d + k] += scale * g;
        }
        if (!dx.empty()) {
          const double* wk = w + k * d;
          for (size_t f = 0; f < d; ++f) dx[f] += wk[f] * g;
        }
      }
      return;
    }

    const size_t h = m.spec_.hidden_width;
    const double* w2 = w + h * d + h;
    std::vector<double> dpre(h, 0.0);
    for (size_t k = 0; k < c; ++k) {
      const double g = ws.delta[k];
      const double* wk = w2 + k * h;
      for (size_t j = 0; j < h; ++j) dpre[j] += wk[j] * g;
      if (!grad.empty()) {
        double* gw2 = grad.data() + h * d + h + k * h;
        for (size_t j = 0; j < h; ++j) gw2[j] += scale * g * ws.hidden[j];
        grad[h * d + h + c * h + k] += scale * g;
      }
    }
    for (size_t j = 0; j < h; ++j) {
      if (ws.pre[j] <= 0.0) dpre[j] = 0.0;
    }
    for (size_t j = 0; j < h; ++j) {
      const double g = dpre[j];
      if (g == 0.0) continue;
      if (!grad.empty()) {
        double* gw1 = grad.data() + j * d;
        for (size_t f = 0; f < d; ++f) gw1[f] += scale * g * x[f];
        grad[h * d + j] += scale * g;
      }
      if (!dx.empty()) {
        const double* wj = w + j * d;
        for (size_t f = 0; f < d; ++f) dx[f] += wj[f] * g;
      }
    }
  }

  static void KnnPosterior(const Model& m, std::span<const double> x,
                           std::span<double> out) {
    const size_t d = m.dim_;
    const size_t n = m.neighbor_labels_.size();
    std::vector<std::pair<double, uint64_t>> keyed(n);
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) {
      const float* r = m.neighbors_.data() + i * d;
      double dist = 0.0;
      for (size_t f = 0; f < d; ++f) {
        const double diff = static_cast<double>(r[f]) - x[f];
        dist += diff * diff;
      }
      keyed[i] = {dist, m.neighbor_ids_[i]};
      order[i] = i;
    }
    const size_t k = std::min<size_t>(m.spec_.knn_k, n);
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](size_t a, size_t b) { return keyed[a] < keyed[b]; });
    std::fill(out.begin(), out.end(), 0.0);
    for (size_t j = 0; j < k; ++j) out[m.neighbor_labels_[order[j]]] += 1.0;
    for (double& p : out) p /= static_cast<double>(k);
  }

  static double WeightNormSquared(const Model& m) {
    double total = 0.0;
    for (size_t p = 0; p < m.params_.size(); ++p) {
      if (IsWeight(m, p)) total += m.params_[p] * m.params_[p];
    }
    return total;
  }

  static void InitParameters(Model& m, std::mt19937_64& rng) {
    const size_t d = m.dim_, c = m.classes_;
    m.params_.assign(ParameterCount(m.spec_, d, c), 0.0);
    auto fill = [&](size_t begin, size_t count, size_t fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (size_t p = begin; p < begin + count; ++p) m.params_[p] = u(rng);
    };
    if (m.kind() == ModelKind::kSoftmaxRegression) {
      fill(0, c * d + c, d);
    } else if (m.kind() == ModelKind::kMlp) {
      const size_t h = m.spec_.hidden_width;
      fill(0, h * d + h, d);
      fill(h * d + h, c * h + c, h);
    }
  }
};

namespace {

std::vector<double> ToDouble(std::span<const float> x) {
  return std::vector<double>(x.begin(), x.end());
}

absl::Status CheckDim(const Model& model, const Dataset& ds) {
  if (ds.dim() != model.dim()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "dimension mismatch: model expects d=", model.dim(), ", data has d=",
        ds.dim()));
  }
  return absl::OkStatus();
}

absl::Status CheckIndices(const Dataset& ds, std::span<const size_t> idx) {
  for (size_t i : idx) {
    if (i >= ds.size()) {
      return absl::OutOfRangeError(absl::StrCat("row index ", i, " out of range"));
    }
  }
  return absl::OkStatus();
}

}  // namespace

void Model::Posterior(std::span<const double> x, std::span<double> out) const {
  if (kind() == ModelKind::kKnn) {
    ModelMath::KnnPosterior(*this, x, out);
    return;
  }
  ModelMath::Workspace ws;
  ModelMath::Forward(*this, x, ws);
  std::copy(ws.probs.begin(), ws.probs.end(), out.begin());
}

absl::StatusOr<Model> InitModel(const ModelSpec& spec, size_t dim,
                                uint32_t classes) {
  RETURN_IF_ERROR(spec.Validate());
  if (dim == 0 || classes < 2) {
    return absl::InvalidArgumentError("model needs d >= 1 and C >= 2");
  }
  Model m;
  m.spec_ = spec;
  m.dim_ = dim;
  m.classes_ = classes;
  std::mt19937_64 rng(spec.seed);
  ModelMath::InitParameters(m, rng);
  return m;
}

absl::StatusOr<Model> MakeLinearModel(size_t dim, uint32_t classes,
                                      std::vector<double> weights,
                                      std::vector<double> bias) {
  if (weights.size() != dim * classes || bias.size() != classes) {
    return absl::InvalidArgumentError("linear model needs C x d weights and C biases");
  }
  ModelSpec spec;
  spec.kind = ModelKind::kSoftmaxRegression;
  spec.epochs = 0;
  ASSIGN_OR_RETURN(Model m, InitModel(spec, dim, classes));
  std::copy(weights.begin(), weights.end(), m.params_.begin());
  std::copy(bias.begin(), bias.end(), m.params_.begin() + dim * classes);
  return m;
}

absl::StatusOr<Model> Train(const ModelSpec& spec, const Dataset& ds,
                            std::span<const size_t> train_idx,
                            const LabelOverride& labels) {
  RETURN_IF_ERROR(spec.Validate());
  if (train_idx.empty()) return absl::InvalidArgumentError("empty training set");
  RETURN_IF_ERROR(CheckIndices(ds, train_idx));
  const size_t n = train_idx.size();
  const size_t d = ds.dim();
  const uint32_t c = ds.class_count();

  // Target distribution per training row.
  std::vector<double> targets(n * c, 0.0);
  if (const auto* hard = std::get_if<std::vector<uint32_t>>(&labels)) {
    if (hard->size() != n) {
      return absl::InvalidArgumentError("label override not aligned to train_idx");
    }
    for (size_t i = 0; i < n; ++i) {
      if ((*hard)[i] >= c) return absl::InvalidArgumentError("override label out of range");
      targets[i * c + (*hard)[i]] = 1.0;
    }
  } else if (const auto* soft = std::get_if<SoftLabels>(&labels)) {
    if (soft->classes != c || soft->probs.size() != n * c) {
      return absl::InvalidArgumentError("soft labels not aligned to train_idx");
    }
    targets = soft->probs;
  } else {
    for (size_t i = 0; i < n; ++i) targets[i * c + ds.label(train_idx[i])] = 1.0;
  }

  Model m;
  m.spec_ = spec;
  m.dim_ = d;
  m.classes_ = c;
  std::mt19937_64 rng(spec.seed);

  if (spec.kind == ModelKind::kKnn) {
    for (size_t i = 0; i < n; ++i) {
      const auto row = ds.row(train_idx[i]);
      m.neighbors_.insert(m.neighbors_.end(), row.begin(), row.end());
      const double* q = targets.data() + i * c;
      m.neighbor_labels_.push_back(
          static_cast<uint32_t>(std::max_element(q, q + c) - q));
      m.neighbor_ids_.push_back(ds.id(train_idx[i]));
    }
    return m;
  }

  ModelMath::InitParameters(m, rng);
  std::vector<std::vector<double>> inputs(n);
  for (size_t i = 0; i < n; ++i) inputs[i] = ToDouble(ds.row(train_idx[i]));

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(m.params_.size());
  ModelMath::Workspace ws;
  const size_t batch = static_cast<size_t>(spec.batch_size);
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < n; start += batch) {
      const size_t end = std::min(n, start + batch);
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (size_t b = start; b < end; ++b) {
        const size_t i = order[b];
        std::span<const double> q(targets.data() + i * c, c);
        ModelMath::Forward(m, inputs[i], ws);
        epoch_loss += ModelMath::CrossEntropy(ws, q);
        ModelMath::Backward(m, inputs[i], q, ws, scale, grad, {});
      }
      for (size_t p = 0; p < grad.size(); ++p) {
        if (ModelMath::IsWeight(m, p)) grad[p] += spec.l2 * m.params_[p];
        m.params_[p] -= spec.learning_rate * grad[p];
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) {
      return absl::AbortedError(absl::StrCat("training diverged at epoch ", epoch));
    }
    m.loss_history_.push_back(epoch_loss);
  }
  return m;
}

absl::StatusOr<PredictionSet> PredictProba(const Model& model,
                                           const Dataset& ds,
                                           std::span<const size_t> idx) {
  RETURN_IF_ERROR(CheckDim(model, ds));
  RETURN_IF_ERROR(CheckIndices(ds, idx));
  PredictionSet out;
  out.classes = model.classes();
  out.ids.reserve(idx.size());
  out.posteriors.resize(idx.size() * out.classes);
  for (size_t r = 0; r < idx.size(); ++r) {
    out.ids.push_back(ds.id(idx[r]));
    const auto x = ToDouble(ds.row(idx[r]));
    model.Posterior(x, std::span<double>(out.posteriors.data() + r * out.classes,
                                         out.classes));
  }
  return out;
}

absl::StatusOr<std::vector<double>> PerSampleLoss(const Model& model,
                                                  const Dataset& ds,
                                                  std::span<const size_t> idx) {
  ASSIGN_OR_RETURN(const PredictionSet preds, PredictProba(model, ds, idx));
  std::vector<double> loss(idx.size());
  for (size_t r = 0; r < idx.size(); ++r) {
    const double p = preds.row(r)[ds.label(idx[r])];
    loss[r] = -std::log(std::max(p, 1e-12));
  }
  return loss;
}

absl::StatusOr<double> EvaluateAccuracy(const Model& model, const Dataset& ds,
                                        std::span<const size_t> idx) {
  if (idx.empty()) return absl::InvalidArgumentError("accuracy of an empty set");
  ASSIGN_OR_RETURN(const PredictionSet preds, PredictProba(model, ds, idx));
  const auto predicted = preds.Argmax();
  size_t correct = 0;
  for (size_t r = 0; r < idx.size(); ++r) correct += predicted[r] == ds.label(idx[r]);
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

absl::StatusOr<double> LossAndGradient(const Model& model, const Dataset& ds,
                                       std::span<const size_t> idx,
                                       std::vector<double>* grad) {
  if (!model.differentiable()) {
    return absl::FailedPreconditionError("k-NN models have no gradient");
  }
  if (idx.empty()) return absl::InvalidArgumentError("empty batch");
  RETURN_IF_ERROR(CheckDim(model, ds));
  RETURN_IF_ERROR(CheckIndices(ds, idx));
  const size_t c = model.classes();
  std::vector<double> scratch;
  if (grad == nullptr) grad = &scratch;
  grad->assign(model.parameters().size(), 0.0);
  ModelMath::Workspace ws;
  std::vector<double> q(c);
  const double scale = 1.0 / static_cast<double>(idx.size());
  double loss = 0.0;
  for (size_t i : idx) {
    const auto x = ToDouble(ds.row(i));
    std::fill(q.begin(), q.end(), 0.0);
    q[ds.label(i)] = 1.0;
    ModelMath::Forward(model, x, ws);
    loss += scale * ModelMath::CrossEntropy(ws, q);
    ModelMath::Backward(model, x, q, ws, scale, *grad, {});
  }
  const auto params = model.parameters();
  for (size_t p = 0; p < params.size(); ++p) {
    if (ModelMath::IsWeight(model, p)) (*grad)[p] += model.spec().l2 * params[p];
  }
  loss += 0.5 * model.spec().l2 * ModelMath::WeightNormSquared(model);
  return loss;
}

absl::StatusOr<std::vector<double>> InputGradient(const Model& model,
                                                  std::span<const double> x,
                                                  uint32_t y) {
  if (!model.differentiable()) {
    return absl::FailedPreconditionError("k-NN models have no input gradient");
  }
  if (x.size() != model.dim()) return absl::InvalidArgumentError("dimension mismatch");
  if (y >= model.classes()) return absl::InvalidArgumentError("label out of range");
  ModelMath::Workspace ws;
  std::vector<double> q(model.classes(), 0.0);
  q[y] = 1.0;
  std::vector<double> dx(model.dim());
  ModelMath::Forward(model, x, ws);
  ModelMath::Backward(model, x, q, ws, 1.0, {}, dx);
  return dx;
}

absl::Status SaveModel(const Model& model, const std::filesystem::path& dir,
                       const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return absl::UnavailableError(absl::StrCat("cannot create ", dir.string()));
  const ModelSpec& s = model.spec();
  json desc = {{"kind", ModelKindName(s.kind)},
               {"dim", model.dim()},
               {"classes", model.classes()},
               {"seed", s.seed},
               {"epochs", s.epochs},
               {"learning_rate", s.learning_rate},
               {"l2", s.l2},
               {"batch_size", s.batch_size},
               {"hidden_width", s.hidden_width},
               {"knn_k", s.knn_k},
               {"blob", stem + ".f32"}};
  if (model.kind() == ModelKind::kKnn) {
    desc["rows"] = model.neighbor_labels_.size();
    desc["labels"] = model.neighbor_labels_;
    desc["ids"] = model.neighbor_ids_;
    RETURN_IF_ERROR(internal::WriteBlob(dir / (stem + ".f32"),
                                        std::span<const float>(model.neighbors_)));
  } else {
    std::vector<float> params(model.params_.begin(), model.params_.end());
    desc["parameter_count"] = params.size();
    RETURN_IF_ERROR(
        internal::WriteBlob(dir / (stem + ".f32"), std::span<const float>(params)));
  }
  std::ofstream out(dir / (stem + ".json"), std::ios::trunc);
  out << desc.dump(2) << "\n";
  if (!out) return absl::DataLossError("cannot write model descriptor");
  return absl::OkStatus();
}

absl::StatusOr<Model> LoadModel(const std::filesystem::path& descriptor) {
  std::ifstream in(descriptor);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", descriptor.string()));
  Model m;
  std::string blob;
  json desc;
  try {
    in >> desc;
    ASSIGN_OR_RETURN(m.spec_.kind, ParseModelKind(desc.at("kind").get<std::string>()));
    m.dim_ = desc.at("dim").get<size_t>();
    m.classes_ = desc.at("classes").get<uint32_t>();
    m.spec_.seed = desc.at("seed").get<uint64_t>();
    m.spec_.epochs = desc.at("epochs").get<int>();
    m.spec_.learning_rate = desc.at("learning_rate").get<double>();
    m.spec_.l2 = desc.at("l2").get<double>();
    m.spec_.batch_size = desc.at("batch_size").get<int>();
    m.spec_.hidden_width = desc.at("hidden_width").get<int>();
    m.spec_.knn_k = desc.at("knn_k").get<int>();
    blob = desc.at("blob").get<std::string>();
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad model descriptor: ", e.what()));
  }
  RETURN_IF_ERROR(m.spec_.Validate());
  const auto blob_path = descriptor.parent_path() / blob;
  try {
    if (m.kind() == ModelKind::kKnn) {
      const size_t rows = desc.at("rows").get<size_t>();
      m.neighbor_labels_ = desc.at("labels").get<std::vector<uint32_t>>();
      m.neighbor_ids_ = desc.at("ids").get<std::vector<uint64_t>>();
      if (m.neighbor_labels_.size() != rows || m.neighbor_ids_.size() != rows) {
        return absl::InvalidArgumentError("k-NN descriptor rows mismatch");
      }
      ASSIGN_OR_RETURN(m.neighbors_, internal::ReadBlob<float>(blob_path, rows * m.dim_));
    } else {
      const size_t count = ModelMath::ParameterCount(m.spec_, m.dim_, m.classes_);
      ASSIGN_OR_RETURN(const auto params, internal::ReadBlob<float>(blob_path, count));
      m.params_.assign(params.begin(), params.end());
    }
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad model descriptor: ", e.what()));
  }
  return m;
}

}  // namespace shapval
