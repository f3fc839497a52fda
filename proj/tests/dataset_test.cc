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

#include <filesystem>
#include <fstream>
#include <vector>

#include "gtest/gtest.h"
#include "shapval/model.h"
#include "test_util.h"

namespace shapval {
namespace {

namespace fs = std::filesystem;
using testing::MakeDataset;
using testing::Range;
using testing::TempDir;

void WriteBytes(const fs::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void WriteManifest(const fs::path& dir, int c) {
  std::ofstream(dir / "m.json")
      << R"({"n":4,"d":2,"c":)" << c << R"(,"features":"m.f32","labels":"m.u32"})";
}

TEST(DatasetTest, LoadsSmallestWellFormedFile) {
  const auto dir = TempDir("smallest");
  WriteManifest(dir, 2);
  std::vector<float> f = {0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<uint32_t> y = {0, 1, 1, 0};
  WriteBytes(dir / "m.f32", {reinterpret_cast<char*>(f.data()),
                             reinterpret_cast<char*>(f.data()) + 32});
  WriteBytes(dir / "m.u32", {reinterpret_cast<char*>(y.data()),
                             reinterpret_cast<char*>(y.data()) + 16});
  auto ds = LoadDataset(dir / "m.json");
  ASSERT_TRUE(ds.ok()) << ds.status();
  EXPECT_EQ(ds->size(), 4u);
  EXPECT_EQ(ds->dim(), 2u);
  EXPECT_EQ(ds->row(3)[1], 7.0f);
  EXPECT_EQ(ds->label(2), 1u);
  EXPECT_EQ(ds->id(3), 3u);
}

TEST(DatasetTest, RejectsOffByOneBlob) {
  const auto dir = TempDir("offbyone");
  WriteManifest(dir, 2);
  WriteBytes(dir / "m.f32", std::vector<char>(33, 0));
  WriteBytes(dir / "m.u32", std::vector<char>(16, 0));
  auto ds = LoadDataset(dir / "m.json");
  EXPECT_FALSE(ds.ok());
}

TEST(DatasetTest, RejectsLabelOutOfRange) {
  const auto dir = TempDir("range");
  WriteManifest(dir, 3);
  WriteBytes(dir / "m.f32", std::vector<char>(32, 0));
  std::vector<uint32_t> y = {0, 1, 5, 2};
  WriteBytes(dir / "m.u32", {reinterpret_cast<char*>(y.data()),
                             reinterpret_cast<char*>(y.data()) + 16});
  auto ds = LoadDataset(dir / "m.json");
  ASSERT_FALSE(ds.ok());
  EXPECT_EQ(ds.status().code(), absl::StatusCode::kInvalidArgument);
}

TEST(DatasetTest, MissingManifestIsNotFound) {
  auto ds = LoadDataset("/nonexistent/shapval/m.json");
  EXPECT_EQ(ds.status().code(), absl::StatusCode::kNotFound);
}

TEST(DatasetTest, SaveLoadRoundTripIsBitExact) {
  GaussianMixtureParams p;
  p.classes = 3;
  p.per_class = 7;
  p.dim = 4;
  p.image_shape = ImageShape{2, 2, 1};
  auto ds = MakeGaussianMixture(p);
  ASSERT_TRUE(ds.ok());
  const auto dir = TempDir("roundtrip");
  auto manifest = SaveDataset(*ds, dir, "data");
  ASSERT_TRUE(manifest.ok());
  auto back = LoadDataset(*manifest);
  ASSERT_TRUE(back.ok()) << back.status();
  EXPECT_TRUE(*back == *ds);
}

TEST(DatasetTest, CreateRejectsDuplicateIds) {
  DatasetParts p;
  p.features = {0, 1};
  p.labels = {0, 1};
  p.ids = {4, 4};
  p.dim = 1;
  p.class_count = 2;
  EXPECT_FALSE(Dataset::Create(p).ok());
}

TEST(GaussianMixtureTest, SameSeedSameBytes) {
  GaussianMixtureParams p;
  p.per_class = 20;
  p.dim = 5;
  p.label_noise = 0.2;
  auto a = MakeGaussianMixture(p);
  auto b = MakeGaussianMixture(p);
  ASSERT_TRUE(a.ok() && b.ok());
  EXPECT_TRUE(*a == *b);
  p.seed = 2;
  auto c = MakeGaussianMixture(p);
  EXPECT_FALSE(*a == *c);
}

TEST(GaussianMixtureTest, LabelNoiseFlipsToOtherClasses) {
  GaussianMixtureParams p;
  p.classes = 4;
  p.per_class = 500;
  p.dim = 2;
  auto clean = MakeGaussianMixture(p);
  p.label_noise = 0.25;
  auto noisy = MakeGaussianMixture(p);
  ASSERT_TRUE(clean.ok() && noisy.ok());
  size_t flipped = 0;
  for (size_t i = 0; i < clean->size(); ++i) {
    EXPECT_EQ(clean->row(i)[0], noisy->row(i)[0]);
    flipped += clean->label(i) != noisy->label(i);
  }
  EXPECT_NEAR(static_cast<double>(flipped) / clean->size(), 0.25, 0.04);
  p.label_noise = 1.5;
  EXPECT_FALSE(MakeGaussianMixture(p).ok());
}

double HeldOutOneNn(double sep, uint64_t seed) {
  GaussianMixtureParams p;
  p.seed = seed;
  p.classes = 2;
  p.per_class = 10;
  p.dim = 2;
  p.sep = sep;
  auto ds = MakeGaussianMixture(p);
  EXPECT_TRUE(ds.ok());
  std::vector<size_t> train, test;
  for (size_t i = 0; i < ds->size(); ++i) (i % 2 ? test : train).push_back(i);
  ModelSpec spec;
  spec.kind = ModelKind::kKnn;
  auto m = Train(spec, *ds, train);
  EXPECT_TRUE(m.ok());
  return *EvaluateAccuracy(*m, *ds, test);
}

TEST(GaussianMixtureTest, WideSeparationIsPerfectlyClassified) {
  EXPECT_EQ(HeldOutOneNn(100.0, 1), 1.0);
}

TEST(GaussianMixtureTest, ZeroSeparationIsChance) {
  double sum = 0.0;
  for (uint64_t s = 1; s <= 20; ++s) sum += HeldOutOneNn(0.0, s);
  const double mean = sum / 20;
  EXPECT_GE(mean, 0.35);
  EXPECT_LE(mean, 0.65);
}

TEST(AugmentTest, HorizontalFlipIsAnInvolution) {
  GaussianMixtureParams p;
  p.per_class = 5;
  p.dim = 12;
  p.image_shape = ImageShape{2, 2, 3};
  auto ds = MakeGaussianMixture(p);
  ASSERT_TRUE(ds.ok());
  const std::vector<size_t> idx = {1, 4, 7};
  const std::vector<Transform> t = {Transform::kHorizontalFlip};
  auto once = Augment(*ds, idx, t, *p.image_shape);
  ASSERT_TRUE(once.ok());
  EXPECT_FALSE(*once == *ds);
  auto twice = Augment(*once, idx, t, *p.image_shape);
  ASSERT_TRUE(twice.ok());
  EXPECT_TRUE(*twice == *ds);
}

TEST(AugmentTest, VerticalFlipSwapsRows) {
  const ImageShape shape{2, 2, 1};
  auto ds = MakeDataset({1, 2, 3, 4, 5, 6, 7, 8}, {0, 1}, 4, 2, shape);
  const std::vector<size_t> idx = {0};
  const std::vector<Transform> t = {Transform::kVerticalFlip};
  auto out = Augment(ds, idx, t, shape);
  ASSERT_TRUE(out.ok());
  const std::vector<float> want = {3, 4, 1, 2};
  EXPECT_EQ(std::vector<float>(out->row(0).begin(), out->row(0).end()), want);
  EXPECT_EQ(out->row(1)[0], 5.0f);
  EXPECT_EQ(out->id(0), 0u);
}

TEST(AugmentTest, GrayscaleFixesGrayImages) {
  const ImageShape shape{1, 2, 3};
  auto ds = MakeDataset({2, 2, 2, 7, 7, 7}, {0}, 6, 2, shape);
  const std::vector<size_t> idx = {0};
  const std::vector<Transform> t = {Transform::kGrayscale};
  auto out = Augment(ds, idx, t, shape);
  ASSERT_TRUE(out.ok());
  EXPECT_TRUE(*out == ds);
}

TEST(AppendCopiesTest, AssignsFreshIdsAndLabels) {
  auto ds = MakeDataset({0, 1, 2}, {0, 1, 0}, 1, 2);
  const std::vector<size_t> idx = {2, 2};
  const std::vector<uint32_t> labels = {1, 1};
  auto out = AppendCopies(ds, idx, std::span<const uint32_t>(labels));
  ASSERT_TRUE(out.ok());
  ASSERT_EQ(out->size(), 5u);
  EXPECT_EQ(out->id(3), 3u);
  EXPECT_EQ(out->id(4), 4u);
  EXPECT_EQ(out->row(4)[0], 2.0f);
  EXPECT_EQ(out->label(4), 1u);
}

TEST(PartitionTest, ChunksAreDisjointAndComplete) {
  const std::vector<double> fr = {0.5, 0.25, -1};
  auto parts = PartitionIndices(10, fr, 3);
  ASSERT_TRUE(parts.ok());
  ASSERT_EQ(parts->size(), 3u);
  EXPECT_EQ((*parts)[0].size(), 5u);
  EXPECT_EQ((*parts)[1].size(), 2u);
  EXPECT_EQ((*parts)[2].size(), 3u);
  std::vector<size_t> all;
  for (const auto& p : *parts) all.insert(all.end(), p.begin(), p.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, Range(0, 10));
}

}  // namespace
}  // namespace shapval
