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

#include "shapval/dataset.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "absl/strings/str_cat.h"
#include "json.hpp"
#include "blob_io.h"
#include "shapval/status_macros.h"

namespace shapval {
namespace {

using json = nlohmann::json;
using internal::ReadBlob;
using internal::WriteBlob;

absl::Status CheckIndices(size_t n, std::span<const size_t> indices) {
  for (size_t i : indices) {
    if (i >= n) {
      return absl::OutOfRangeError(
          absl::StrCat("row index ", i, " out of range for ", n, " rows"));
    }
  }
  return absl::OkStatus();
}

}  // namespace

Dataset::Dataset(DatasetParts parts) : parts_(std::move(parts)) {
  if (!parts_.features.empty()) {
    const auto [lo, hi] =
        std::minmax_element(parts_.features.begin(), parts_.features.end());
    feature_min_ = *lo;
    feature_max_ = *hi;
  }
  max_id_ = *std::max_element(parts_.ids.begin(), parts_.ids.end());
}

absl::StatusOr<Dataset> Dataset::Create(DatasetParts parts) {
  const size_t n = parts.labels.size();
  if (n == 0) return absl::InvalidArgumentError("dataset must have N >= 1");
  if (parts.dim == 0) return absl::InvalidArgumentError("dataset must have d >= 1");
  if (parts.class_count < 2) {
    return absl::InvalidArgumentError("dataset must have at least 2 classes");
  }
  if (parts.features.size() != n * parts.dim || parts.ids.size() != n) {
    return absl::InvalidArgumentError(absl::StrCat(
        "shape mismatch: ", parts.features.size(), " features, ",
        parts.labels.size(), " labels, ", parts.ids.size(), " ids, d=",
        parts.dim));
  }
  if (parts.image_shape && parts.image_shape->size() != parts.dim) {
    return absl::InvalidArgumentError("image shape does not match d");
  }
  for (size_t i = 0; i < n; ++i) {
    if (parts.labels[i] >= parts.class_count) {
      return absl::InvalidArgumentError(
          absl::StrCat("label ", parts.labels[i], " at row ", i,
                       " is out of range for ", parts.class_count, " classes"));
    }
  }
  for (size_t i = 0; i < parts.features.size(); ++i) {
    if (!std::isfinite(parts.features[i])) {
      return absl::InvalidArgumentError(
          absl::StrCat("non-finite feature at row ", i / parts.dim));
    }
  }
  std::unordered_set<uint64_t> seen;
  seen.reserve(n);
  for (uint64_t id : parts.ids) {
    if (!seen.insert(id).second) {
      return absl::InvalidArgumentError(absl::StrCat("duplicate sample id ", id));
    }
  }
  return Dataset(std::move(parts));
}

absl::StatusOr<std::vector<size_t>> Dataset::PositionsOf(
    std::span<const uint64_t> ids) const {
  std::unordered_map<uint64_t, size_t> where;
  where.reserve(size());
  for (size_t i = 0; i < size(); ++i) where.emplace(parts_.ids[i], i);
  std::vector<size_t> out;
  out.reserve(ids.size());
  for (uint64_t id : ids) {
    auto it = where.find(id);
    if (it == where.end()) return absl::NotFoundError(absl::StrCat("unknown id ", id));
    out.push_back(it->second);
  }
  return out;
}

absl::Status SplitSet::Validate(size_t n) const {
  const std::vector<const std::vector<size_t>*> all = {
      &train, &validation, &test, &shadow, &member_pool, &nonmember_pool};
  for (const auto* split : all) RETURN_IF_ERROR(CheckIndices(n, *split));
  auto disjoint = [](const std::vector<size_t>& a, const std::vector<size_t>& b) {
    std::unordered_set<size_t> s(a.begin(), a.end());
    return std::none_of(b.begin(), b.end(), [&](size_t i) { return s.contains(i); });
  };
  if (!disjoint(member_pool, nonmember_pool)) {
    return absl::InvalidArgumentError("member and nonmember pools overlap");
  }
  if (!disjoint(train, validation)) {
    return absl::InvalidArgumentError("train and validation splits overlap");
  }
  return absl::OkStatus();
}

absl::StatusOr<std::vector<std::vector<size_t>>> PartitionIndices(
    size_t n, std::span<const double> fractions, uint64_t seed) {
  std::vector<size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<std::vector<size_t>> out;
  size_t offset = 0;
  for (size_t s = 0; s < fractions.size(); ++s) {
    const double f = fractions[s];
    size_t count;
    if (f < 0.0) {
      if (s + 1 != fractions.size()) {
        return absl::InvalidArgumentError("only the last split may take the rest");
      }
      count = n - offset;
    } else {
      count = static_cast<size_t>(std::floor(f * static_cast<double>(n)));
    }
    if (offset + count > n) {
      return absl::InvalidArgumentError("split fractions exceed the dataset");
    }
    out.emplace_back(perm.begin() + offset, perm.begin() + offset + count);
    offset += count;
  }
  return out;
}

absl::StatusOr<std::filesystem::path> SaveDataset(
    const Dataset& ds, const std::filesystem::path& dir,
    const std::string& stem) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return absl::UnavailableError(absl::StrCat("cannot create ", dir.string()));
  const std::string features_name = stem + ".f32";
  const std::string labels_name = stem + ".u32";
  RETURN_IF_ERROR(WriteBlob(dir / features_name, ds.features()));
  RETURN_IF_ERROR(WriteBlob(dir / labels_name, ds.labels()));

  json manifest = {{"n", ds.size()},
                   {"d", ds.dim()},
                   {"c", ds.class_count()},
                   {"features", features_name},
                   {"labels", labels_name}};
  if (const auto& shape = ds.image_shape()) {
    manifest["image_shape"] = {shape->height, shape->width, shape->channels};
  }
  const auto path = dir / (stem + ".json");
  std::ofstream out(path, std::ios::trunc);
  out << manifest.dump(2) << "\n";
  if (!out) return absl::DataLossError(absl::StrCat("cannot write ", path.string()));
  return path;
}

absl::StatusOr<Dataset> LoadDataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) {
    return absl::NotFoundError(
        absl::StrCat("cannot open manifest ", manifest_path.string()));
  }
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad manifest: ", e.what()));
  }
  DatasetParts parts;
  size_t n = 0;
  std::string features_name, labels_name;
  try {
    n = manifest.at("n").get<size_t>();
    parts.dim = manifest.at("d").get<size_t>();
    parts.class_count = manifest.at("c").get<uint32_t>();
    features_name = manifest.at("features").get<std::string>();
    labels_name = manifest.at("labels").get<std::string>();
    if (manifest.contains("image_shape")) {
      const auto shape = manifest["image_shape"].get<std::vector<int>>();
      if (shape.size() != 3) {
        return absl::InvalidArgumentError("image_shape must be [H, W, Ch]");
      }
      parts.image_shape = ImageShape{shape[0], shape[1], shape[2]};
    }
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("bad manifest: ", e.what()));
  }
  const auto base = manifest_path.parent_path();
  ASSIGN_OR_RETURN(parts.features, ReadBlob<float>(base / features_name, n * parts.dim));
  ASSIGN_OR_RETURN(parts.labels, ReadBlob<uint32_t>(base / labels_name, n));
  parts.ids.resize(n);
  std::iota(parts.ids.begin(), parts.ids.end(), uint64_t{0});
  return Dataset::Create(std::move(parts));
}

absl::StatusOr<Dataset> MakeGaussianMixture(const GaussianMixtureParams& p) {
  if (p.classes < 2 || p.per_class < 1 || p.dim < 1) {
    return absl::InvalidArgumentError(
        "gaussian mixture needs classes >= 2, per_class >= 1, dim >= 1");
  }
  if (!(p.sep >= 0.0) || !std::isfinite(p.sep)) {
    return absl::InvalidArgumentError("gaussian mixture needs finite sep >= 0");
  }
  if (!(p.label_noise >= 0.0 && p.label_noise <= 1.0)) {
    return absl::InvalidArgumentError("label_noise must lie in [0, 1]");
  }
  DatasetParts parts;
  parts.dim = p.dim;
  parts.class_count = p.classes;
  parts.image_shape = p.image_shape;
  const size_t n = p.classes * p.per_class;
  parts.features.resize(n * p.dim);
  parts.labels.resize(n);
  parts.ids.resize(n);

  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  size_t row = 0;
  for (uint32_t c = 0; c < p.classes; ++c) {
    const size_t hot = (c + p.center_shift) % p.dim;
    for (size_t j = 0; j < p.per_class; ++j, ++row) {
      float* x = parts.features.data() + row * p.dim;
      for (size_t f = 0; f < p.dim; ++f) {
        const double center = f == hot ? p.sep : 0.0;
        x[f] = static_cast<float>(center + noise(rng));
      }
      parts.labels[row] = c;
      parts.ids[row] = row;
    }
  }
  if (p.label_noise > 0.0) {
    // Separate stream so features do not depend on the noise rate.
    std::mt19937_64 flip_rng(p.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<uint32_t> other(0, p.classes - 2);
    for (auto& y : parts.labels) {
      const bool flip = coin(flip_rng) < p.label_noise;
      const uint32_t z = other(flip_rng);
      if (flip) y = z >= y ? z + 1 : z;
    }
  }
  return Dataset::Create(std::move(parts));
}

absl::StatusOr<Transform> ParseTransform(std::string_view name) {
  if (name == "hflip") return Transform::kHorizontalFlip;
  if (name == "vflip") return Transform::kVerticalFlip;
  if (name == "grayscale") return Transform::kGrayscale;
  return absl::InvalidArgumentError(absl::StrCat("unknown transform '", std::string(name), "'"));
}

std::string TransformName(Transform t) {
  switch (t) {
    case Transform::kHorizontalFlip:
      return "hflip";
    case Transform::kVerticalFlip:
      return "vflip";
    case Transform::kGrayscale:
      return "grayscale";
  }
  return "unknown";
}

namespace {

// Pixel layout is (row, column, channel), channel fastest.
void ApplyTransform(Transform t, const ImageShape& s, std::span<float> img) {
  const size_t h = s.height, w = s.width, ch = s.channels;
  auto at = [&](size_t r, size_t c, size_t k) -> float& {
    return img[(r * w + c) * ch + k];
  };
  switch (t) {
    case Transform::kHorizontalFlip:
      for (size_t r = 0; r < h; ++r)
        for (size_t c = 0; c < w / 2; ++c)
          for (size_t k = 0; k < ch; ++k) std::swap(at(r, c, k), at(r, w - 1 - c, k));
      break;
    case Transform::kVerticalFlip:
      for (size_t r = 0; r < h / 2; ++r)
        for (size_t c = 0; c < w; ++c)
          for (size_t k = 0; k < ch; ++k) std::swap(at(r, c, k), at(h - 1 - r, c, k));
      break;
    case Transform::kGrayscale: {
      if (ch == 1) break;
      for (size_t r = 0; r < h; ++r) {
        for (size_t c = 0; c < w; ++c) {
          const float red = at(r, c, 0), green = at(r, c, 1), blue = at(r, c, 2);
          const double lum = 0.299 * red + 0.587 * green + 0.114 * blue;
          const float lo = std::min({red, green, blue});
          const float hi = std::max({red, green, blue});
          // Clamping to the channel range keeps gray pixels bit-identical.
          const float y = std::clamp(static_cast<float>(lum), lo, hi);
          at(r, c, 0) = at(r, c, 1) = at(r, c, 2) = y;
        }
      }
      break;
    }
  }
}

}  // namespace

absl::StatusOr<Dataset> Augment(const Dataset& ds,
                                std::span<const size_t> indices,
                                std::span<const Transform> transforms,
                                const ImageShape& shape) {
  if (shape.channels != 1 && shape.channels != 3) {
    return absl::InvalidArgumentError("image channels must be 1 or 3");
  }
  if (shape.height <= 0 || shape.width <= 0 || shape.size() != ds.dim()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "image shape ", shape.height, "x", shape.width, "x", shape.channels,
        " does not match d=", ds.dim()));
  }
  RETURN_IF_ERROR(CheckIndices(ds.size(), indices));
  DatasetParts parts = ds.parts();
  std::unordered_set<size_t> done;
  for (size_t i : indices) {
    if (!done.insert(i).second) continue;
    std::span<float> img(parts.features.data() + i * ds.dim(), ds.dim());
    for (Transform t : transforms) ApplyTransform(t, shape, img);
  }
  return Dataset::Create(std::move(parts));
}

absl::StatusOr<Dataset> AppendCopies(
    const Dataset& ds, std::span<const size_t> indices,
    std::optional<std::span<const uint32_t>> labels) {
  RETURN_IF_ERROR(CheckIndices(ds.size(), indices));
  if (labels && labels->size() != indices.size()) {
    return absl::InvalidArgumentError("one label per appended row required");
  }
  DatasetParts parts = ds.parts();
  uint64_t next_id = ds.max_id() + 1;
  for (size_t j = 0; j < indices.size(); ++j) {
    const auto row = ds.row(indices[j]);
    parts.features.insert(parts.features.end(), row.begin(), row.end());
    parts.labels.push_back(labels ? (*labels)[j] : ds.label(indices[j]));
    parts.ids.push_back(next_id++);
  }
  return Dataset::Create(std::move(parts));
}

absl::StatusOr<Dataset> Subset(const Dataset& ds,
                               std::span<const size_t> indices) {
  RETURN_IF_ERROR(CheckIndices(ds.size(), indices));
  DatasetParts parts;
  parts.dim = ds.dim();
  parts.class_count = ds.class_count();
  parts.image_shape = ds.image_shape();
  for (size_t i : indices) {
    const auto row = ds.row(i);
    parts.features.insert(parts.features.end(), row.begin(), row.end());
    parts.labels.push_back(ds.label(i));
    parts.ids.push_back(ds.id(i));
  }
  return Dataset::Create(std::move(parts));
}

}  // namespace shapval
