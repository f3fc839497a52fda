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

#include "shapval/dynamics.h"

#include <algorithm>
#include <set>
#include <vector>

#include "gtest/gtest.h"
#include "test_util.h"

namespace shapval {
namespace {

using testing::Range;

struct Task {
  Dataset ds;
  std::vector<size_t> train, val;
};

Task MakeTask(size_t per_class = 100) {
  GaussianMixtureParams p;
  p.classes = 3;
  p.per_class = per_class;
  p.dim = 16;
  p.sep = 2.0;
  p.label_noise = 0.1;
  p.image_shape = ImageShape{4, 4, 1};
  auto ds = MakeGaussianMixture(p);
  EXPECT_TRUE(ds.ok());
  const std::vector<double> fr = {0.7, -1};
  auto parts = PartitionIndices(ds->size(), fr, 3);
  EXPECT_TRUE(parts.ok());
  return {*std::move(ds), (*parts)[0], (*parts)[1]};
}

TEST(OnionTest, ZeroRemovalIsANoOp) {
  const Task t = MakeTask();
  auto iv = KnnShapley(t.ds, t.train, t.val);
  ASSERT_TRUE(iv.ok());
  auto r = OnionEffect(t.ds, t.train, t.val, *iv, RemoveSide::kTop, 0, {});
  ASSERT_TRUE(r.ok());
  EXPECT_TRUE(r->band_ids.empty());
  for (const auto& d : r->deltas.rows) EXPECT_EQ(d.delta, 0.0);
}

TEST(OnionTest, ArmsShareTheBand) {
  const Task t = MakeTask();
  auto iv = KnnShapley(t.ds, t.train, t.val);
  ASSERT_TRUE(iv.ok());
  const size_t rc = t.train.size() / 5;
  auto top = OnionEffect(t.ds, t.train, t.val, *iv, RemoveSide::kTop, rc, {});
  auto bottom = OnionEffect(t.ds, t.train, t.val, *iv, RemoveSide::kBottom, rc, {});
  ASSERT_TRUE(top.ok() && bottom.ok());
  EXPECT_EQ(top->band_ids, bottom->band_ids);
  EXPECT_EQ(top->band_ids.size(), rc);
  EXPECT_EQ(top->removed_ids.size(), rc);
  // Removed rows are the extremes; none of them is in the band.
  const std::set<uint64_t> band(top->band_ids.begin(), top->band_ids.end());
  for (uint64_t id : top->removed_ids) EXPECT_EQ(band.count(id), 0u);
  for (uint64_t id : bottom->removed_ids) EXPECT_EQ(band.count(id), 0u);
  double min_removed = 1e300, max_band = -1e300;
  for (size_t i = 0; i < iv->size(); ++i) {
    if (band.count(iv->ids[i])) max_band = std::max(max_band, iv->values[i]);
    if (std::count(top->removed_ids.begin(), top->removed_ids.end(), iv->ids[i])) {
      min_removed = std::min(min_removed, iv->values[i]);
    }
  }
  EXPECT_GE(min_removed, max_band);
  EXPECT_LE(top->frac_increased + top->frac_decreased, 1.0 + 1e-12);
}

TEST(OnionTest, RejectsOversizedRemoval) {
  const Task t = MakeTask();
  auto iv = KnnShapley(t.ds, t.train, t.val);
  ASSERT_TRUE(iv.ok());
  const size_t rc = t.train.size() / 3 + 1;
  EXPECT_FALSE(OnionEffect(t.ds, t.train, t.val, *iv, RemoveSide::kTop, rc, {}).ok());
}

TEST(DuplicateTest, ZeroCopiesChangeNothing) {
  const Task t = MakeTask();
  const std::vector<size_t> targets(t.train.begin(), t.train.begin() + 10);
  auto r = DuplicateMislabel(t.ds, t.train, t.val, targets, 0, 1, {});
  ASSERT_TRUE(r.ok()) << r.status();
  for (const auto& d : r->deltas.rows) EXPECT_EQ(d.delta, 0.0);
  EXPECT_TRUE(r->copy_ids.empty());
}

TEST(DuplicateTest, GroupsAndLabels) {
  const Task t = MakeTask();
  const std::vector<size_t> targets(t.train.begin(), t.train.begin() + 10);
  auto r = DuplicateMislabel(t.ds, t.train, t.val, targets, 4, 1, {});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->deltas.GroupSize("target"), 10u);
  EXPECT_EQ(r->deltas.GroupSize("control"), 10u);
  EXPECT_EQ(r->copy_ids.size(), 40u);
  ASSERT_EQ(r->wrong_labels.size(), 10u);
  for (size_t i = 0; i < targets.size(); ++i) {
    EXPECT_NE(r->wrong_labels[i], t.ds.label(targets[i]));
  }
  std::set<uint64_t> target_ids;
  for (size_t r0 : targets) target_ids.insert(t.ds.id(r0));
  for (const auto& d : r->deltas.rows) {
    EXPECT_EQ(d.group == "target", target_ids.count(d.id) == 1);
    EXPECT_LE(d.id, t.ds.max_id());
  }
  for (uint64_t id : r->copy_ids) EXPECT_GT(id, t.ds.max_id());
}

TEST(DeltaReportTest, GroupStatistics) {
  DeltaReport rep;
  rep.rows = {{1, 0, 1, 1.0, "a"}, {2, 0, -3, -3.0, "a"}, {3, 0, 0, 0.0, "b"}};
  EXPECT_EQ(rep.GroupSize("a"), 2u);
  EXPECT_EQ(rep.CountIf("a", true), 1u);
  EXPECT_EQ(rep.CountIf("a", false), 1u);
  EXPECT_EQ(rep.CountIf("b", true), 0u);
  EXPECT_DOUBLE_EQ(rep.MeanDelta("a"), -1.0);
  EXPECT_DOUBLE_EQ(rep.MeanAbsDelta("a"), 2.0);
}

TEST(AugmentationTest, IdentityTransformLeavesValues) {
  const Task t = MakeTask();
  const std::vector<size_t> idx(t.train.begin(), t.train.begin() + 20);
  const std::vector<Transform> flip2 = {Transform::kHorizontalFlip,
                                        Transform::kHorizontalFlip};
  for (auto mode : {AugmentMode::kReplace, AugmentMode::kAdd}) {
    auto r = AugmentationImpact(t.ds, t.train, t.val, idx, flip2, mode, {});
    ASSERT_TRUE(r.ok()) << r.status();
    ASSERT_FALSE(r->rows.empty());
    for (const auto& d : r->rows) EXPECT_EQ(d.delta, 0.0);
  }
}

TEST(AugmentationTest, SymmetricImagesAreFlipInvariant) {
  Task t = MakeTask();
  DatasetParts p = t.ds.parts();
  for (size_t r = 0; r < t.ds.size(); ++r) {
    float* row = p.features.data() + r * 16;
    for (int y = 0; y < 4; ++y) {
      row[y * 4 + 3] = row[y * 4 + 0];
      row[y * 4 + 2] = row[y * 4 + 1];
    }
  }
  auto sym = Dataset::Create(p);
  ASSERT_TRUE(sym.ok());
  const std::vector<size_t> idx(t.train.begin(), t.train.begin() + 30);
  const std::vector<Transform> flip = {Transform::kHorizontalFlip};
  auto r = AugmentationImpact(*sym, t.train, t.val, idx, flip, AugmentMode::kReplace, {});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->GroupSize("augmented"), 30u);
  for (const auto& d : r->rows) EXPECT_EQ(d.delta, 0.0);
}

TEST(AugmentationTest, AddModeGroups) {
  const Task t = MakeTask();
  const std::vector<size_t> idx(t.train.begin(), t.train.begin() + 20);
  const std::vector<Transform> flip = {Transform::kVerticalFlip};
  auto r = AugmentationImpact(t.ds, t.train, t.val, idx, flip, AugmentMode::kAdd, {});
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->GroupSize("added"), 20u);
  EXPECT_EQ(r->GroupSize("original"), 20u);
}

TEST(ShadowTest, FullShadowIsPerfectlyCorrelated) {
  const Task t = MakeTask();
  auto r = ShadowImportanceFor(t.ds, t.train, t.train, t.val, {});
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR(r->correlation.pearson, 1.0, 1e-12);
  EXPECT_EQ(r->full.values, r->shadow.values);
}

TEST(ShadowTest, TwoSampleShadowIsUndefined) {
  const Task t = MakeTask();
  const std::vector<size_t> two(t.train.begin(), t.train.begin() + 2);
  auto r = ShadowImportanceFor(t.ds, t.train, two, t.val, {});
  EXPECT_EQ(r.status().code(), absl::StatusCode::kFailedPrecondition);
}

}  // namespace
}  // namespace shapval
