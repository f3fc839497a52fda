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

#include "shapval/steal.h"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "test_util.h"

namespace shapval {
namespace {

using testing::Range;

ImportanceVector Distinct(const Dataset& ds, const std::vector<size_t>& rows) {
  ImportanceVector iv;
  for (size_t r : rows) {
    iv.ids.push_back(ds.id(r));
    iv.values.push_back(std::sin(static_cast<double>(r) * 1.7));
  }
  return iv;
}

std::vector<size_t> Sorted(std::vector<size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

TEST(SelectQueriesTest, FullBudgetSelectsEverything) {
  auto ds = testing::RandomDataset(20, 2, 2, 1);
  const auto pool = Range(0, 20);
  const auto iv = Distinct(ds, pool);
  for (auto sel : {Selection::kTop, Selection::kBottom, Selection::kRandom}) {
    auto q = SelectQueries(ds, iv, pool, 20, sel, 3);
    ASSERT_TRUE(q.ok());
    EXPECT_EQ(Sorted(*q), pool);
  }
}

TEST(SelectQueriesTest, BudgetOnePicksExtremes) {
  auto ds = testing::RandomDataset(20, 2, 2, 1);
  const auto pool = Range(0, 20);
  const auto iv = Distinct(ds, pool);
  const size_t hi = std::max_element(iv.values.begin(), iv.values.end()) - iv.values.begin();
  const size_t lo = std::min_element(iv.values.begin(), iv.values.end()) - iv.values.begin();
  EXPECT_EQ(*SelectQueries(ds, iv, pool, 1, Selection::kTop, 0), std::vector<size_t>{hi});
  EXPECT_EQ(*SelectQueries(ds, iv, pool, 1, Selection::kBottom, 0), std::vector<size_t>{lo});
}

TEST(SelectQueriesTest, TopAndBottomAreDisjointAndOrderFree) {
  auto ds = testing::RandomDataset(30, 2, 2, 1);
  auto pool = Range(0, 30);
  const auto iv = Distinct(ds, pool);
  auto top = SelectQueries(ds, iv, pool, 15, Selection::kTop, 0);
  auto bottom = SelectQueries(ds, iv, pool, 15, Selection::kBottom, 0);
  ASSERT_TRUE(top.ok() && bottom.ok());
  const auto st = Sorted(*top), sb = Sorted(*bottom);
  std::vector<size_t> both;
  std::set_intersection(st.begin(), st.end(), sb.begin(), sb.end(), std::back_inserter(both));
  EXPECT_TRUE(both.empty());
  std::mt19937_64 rng(9);
  std::shuffle(pool.begin(), pool.end(), rng);
  EXPECT_EQ(*SelectQueries(ds, iv, pool, 15, Selection::kTop, 0), *top);
  EXPECT_EQ(*SelectQueries(ds, iv, pool, 15, Selection::kBottom, 0), *bottom);
}

TEST(SelectQueriesTest, RejectsBadBudgets) {
  auto ds = testing::RandomDataset(10, 2, 2, 1);
  const auto pool = Range(0, 10);
  const auto iv = Distinct(ds, pool);
  EXPECT_FALSE(SelectQueries(ds, iv, pool, 0, Selection::kTop, 0).ok());
  EXPECT_FALSE(SelectQueries(ds, iv, pool, 11, Selection::kTop, 0).ok());
  EXPECT_FALSE(ParseSelection("middle").ok());
}

TEST(ClassEntropyTest, KnownHistograms) {
  std::vector<uint32_t> uniform;
  for (uint32_t c = 0; c < 10; ++c) uniform.insert(uniform.end(), 7, c);
  EXPECT_NEAR(*ClassEntropy(uniform, 10), std::log2(10.0), 1e-12);
  EXPECT_NEAR(*ClassEntropy(uniform, 10), 3.3219, 1e-3);
  EXPECT_EQ(*ClassEntropy(std::vector<uint32_t>(5, 3), 10), 0.0);
  EXPECT_DOUBLE_EQ(*ClassEntropy(std::vector<uint32_t>{0, 1, 1, 0}, 2), 1.0);
  EXPECT_FALSE(ClassEntropy(std::vector<uint32_t>{4}, 2).ok());
}

struct Task {
  Dataset ds;
  std::vector<size_t> train, pool, val, test;
};

Task MakeTask() {
  GaussianMixtureParams p;
  p.classes = 4;
  p.per_class = 400;
  p.dim = 8;
  p.sep = 3.0;
  auto ds = MakeGaussianMixture(p);
  EXPECT_TRUE(ds.ok());
  const std::vector<double> fr = {0.25, 0.25, 0.25, -1};
  auto parts = PartitionIndices(ds->size(), fr, 2);
  EXPECT_TRUE(parts.ok());
  return {*std::move(ds), (*parts)[0], (*parts)[1], (*parts)[2], (*parts)[3]};
}

ModelSpec Mlp() {
  ModelSpec s;
  s.hidden_width = 32;
  s.epochs = 30;
  return s;
}

TEST(StealTest, FullPoolApproachesTheTarget) {
  const Task t = MakeTask();
  auto target = Train(Mlp(), t.ds, t.train);
  ASSERT_TRUE(target.ok());
  const double target_acc = *EvaluateAccuracy(*target, t.ds, t.test);
  auto iv = KnnShapley(t.ds, t.pool, t.val);
  ASSERT_TRUE(iv.ok());
  StealRun run{t.pool.size(), Selection::kRandom, 0, false, Mlp()};
  auto r = Steal(run, *target, t.ds, t.pool, *iv, t.ds, t.test);
  ASSERT_TRUE(r.ok()) << r.status();
  EXPECT_NEAR(r->accuracy, target_acc, 0.02);
  EXPECT_EQ(r->queries.size(), t.pool.size());
  EXPECT_NEAR(r->query_class_entropy, 2.0, 0.05);
}

TEST(StealTest, RandomBudgetCurveRises) {
  const Task t = MakeTask();
  auto target = Train(Mlp(), t.ds, t.train);
  ASSERT_TRUE(target.ok());
  auto iv = KnnShapley(t.ds, t.pool, t.val);
  ASSERT_TRUE(iv.ok());
  const std::vector<size_t> budgets = {10, 40, 160};
  const std::vector<Selection> sel = {Selection::kRandom};
  const std::vector<uint64_t> seeds = {0, 1, 2, 3, 4};
  auto rows = StealSweep(*target, Mlp(), t.ds, t.pool, *iv, t.ds, t.test, budgets, sel,
                         seeds, false, 2);
  ASSERT_TRUE(rows.ok());
  EXPECT_EQ(rows->size(), 15u);
  const auto summary = SummarizeSteal(*rows);
  ASSERT_EQ(summary.size(), 3u);
  for (size_t i = 1; i < summary.size(); ++i) {
    EXPECT_GE(summary[i].mean_accuracy, summary[i - 1].mean_accuracy - 0.02);
  }
  for (const auto& s : summary) {
    EXPECT_LE(s.min_accuracy, s.mean_accuracy);
    EXPECT_GE(s.max_accuracy, s.mean_accuracy);
  }
  auto again = StealSweep(*target, Mlp(), t.ds, t.pool, *iv, t.ds, t.test, budgets, sel,
                          seeds, false, 1);
  ASSERT_TRUE(again.ok());
  for (size_t i = 0; i < rows->size(); ++i) {
    EXPECT_EQ((*rows)[i].accuracy, (*again)[i].accuracy);
  }
}

}  // namespace
}  // namespace shapval
