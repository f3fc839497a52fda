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

#ifndef SHAPVAL_DATASET_H_
#define SHAPVAL_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace shapval {

struct ImageShape {
  int height = 0;
  int width = 0;
  int channels = 0;

  size_t size() const {
    return static_cast<size_t>(height) * width * channels;
  }
  bool operator==(const ImageShape&) const = default;
};

// Raw storage behind a Dataset. Mutating experiments copy the parts out, edit
// them and build a new Dataset, which re-validates every invariant.
struct DatasetParts {
  std::vector<float> features;  // row-major, size() * dim
  std::vector<uint32_t> labels;
  std::vector<uint64_t> ids;
  size_t dim = 0;
  uint32_t class_count = 0;
  std::optional<ImageShape> image_shape;
};

// Immutable labelled feature matrix. Ids are unique and stay attached to their
// rows through subsetting, duplication and augmentation so that importance
// vectors computed on different variants can be joined.
class Dataset {
 public:
  static absl::StatusOr<Dataset> Create(DatasetParts parts);

  size_t size() const { return parts_.labels.size(); }
  size_t dim() const { return parts_.dim; }
  uint32_t class_count() const { return parts_.class_count; }
  const std::optional<ImageShape>& image_shape() const {
    return parts_.image_shape;
  }

  std::span<const float> row(size_t i) const {
    return {parts_.features.data() + i * parts_.dim, parts_.dim};
  }
  uint32_t label(size_t i) const { return parts_.labels[i]; }
  uint64_t id(size_t i) const { return parts_.ids[i]; }

  std::span<const float> features() const { return parts_.features; }
  std::span<const uint32_t> labels() const { return parts_.labels; }
  std::span<const uint64_t> ids() const { return parts_.ids; }

  float feature_min() const { return feature_min_; }
  float feature_max() const { return feature_max_; }
  uint64_t max_id() const { return max_id_; }

  const DatasetParts& parts() const { return parts_; }

  // Row positions in the same order as `ids`; NotFound for unknown ids.
  absl::StatusOr<std::vector<size_t>> PositionsOf(
      std::span<const uint64_t> ids) const;

  bool operator==(const Dataset& other) const {
    return parts_.features == other.parts_.features &&
           parts_.labels == other.parts_.labels &&
           parts_.ids == other.parts_.ids && parts_.dim == other.parts_.dim &&
           parts_.class_count == other.parts_.class_count &&
           parts_.image_shape == other.parts_.image_shape;
  }

 private:
  explicit Dataset(DatasetParts parts);

  DatasetParts parts_;
  float feature_min_ = 0.0f;
  float feature_max_ = 0.0f;
  uint64_t max_id_ = 0;
};

// Named disjoint index sets over one Dataset. Unused splits stay empty.
struct SplitSet {
  std::vector<size_t> train;
  std::vector<size_t> validation;
  std::vector<size_t> test;
  std::vector<size_t> shadow;
  std::vector<size_t> member_pool;
  std::vector<size_t> nonmember_pool;

  absl::Status Validate(size_t n) const;
};

// Splits [0, n) by a seeded permutation into consecutive chunks whose sizes
// are floor(fraction * n); the final chunk with fraction < 0 takes the rest.
absl::StatusOr<std::vector<std::vector<size_t>>> PartitionIndices(
    size_t n, std::span<const double> fractions, uint64_t seed);

// manifest.json + <stem>.f32 + <stem>.u32 in `dir`. Returns the manifest path.
absl::StatusOr<std::filesystem::path> SaveDataset(
    const Dataset& ds, const std::filesystem::path& dir,
    const std::string& stem);
absl::StatusOr<Dataset> LoadDataset(const std::filesystem::path& manifest);

struct GaussianMixtureParams {
  uint64_t seed = 1;
  uint32_t classes = 10;
  size_t per_class = 100;
  size_t dim = 64;
  double sep = 4.0;
  // Class c is centred at sep * e_{(c + center_shift) mod dim}.
  size_t center_shift = 0;
  // Fraction of rows whose label is replaced by a uniformly drawn other class.
  double label_noise = 0.0;
  std::optional<ImageShape> image_shape;
};

// Class-major rows (all of class 0, then class 1, ...), unit-variance
// isotropic noise, ids 0..N-1.
absl::StatusOr<Dataset> MakeGaussianMixture(const GaussianMixtureParams& p);

enum class Transform { kHorizontalFlip, kVerticalFlip, kGrayscale };

absl::StatusOr<Transform> ParseTransform(std::string_view name);
std::string TransformName(Transform t);

// Replaces the selected rows by their transformed pixels, applying
// `transforms` left to right; every other row is left untouched.
absl::StatusOr<Dataset> Augment(const Dataset& ds,
                                std::span<const size_t> indices,
                                std::span<const Transform> transforms,
                                const ImageShape& shape);

// Appends copies of rows `indices` (in order) with ids max_id+1, max_id+2, ...
// Labels are replaced by `labels` when given (one per appended row).
absl::StatusOr<Dataset> AppendCopies(
    const Dataset& ds, std::span<const size_t> indices,
    std::optional<std::span<const uint32_t>> labels = std::nullopt);

// Rows `indices` in the given order, ids preserved.
absl::StatusOr<Dataset> Subset(const Dataset& ds,
                               std::span<const size_t> indices);

}  // namespace shapval

#endif  // SHAPVAL_DATASET_H_
