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

#include "shapval/valuation.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "gtest/gtest.h"
#include "shapval/model.h"
#include "test_util.h"

namespace shapval {
namespace {

using testing::MakeDataset;
using testing::OracleShapley;
using testing::OracleUtility;
using testing::RandomDataset;
using testing::Range;

TEST(KnnShapleyTest, SingleMatchingPointGetsOne) {
  auto ds = MakeDataset({0.0f, 0.5f}, {1, 1}, 1, 2);
  ValuationOptions o;
  o.k = 1;
  auto iv = KnnShapley(ds, std::vector<size_t>{0}, std::vector<size_t>{1}, o);
  ASSERT_TRUE(iv.ok());
  EXPECT_DOUBLE_EQ(iv->values[0], 1.0);
}

TEST(KnnShapleyTest, NearMismatchFarMatch) {
  // Validation point at 0 with label 0; near train point mismatched, far matched.
  auto ds = MakeDataset({1.0f, 2.0f, 0.0f}, {1, 0, 0}, 1, 2);
  ValuationOptions o;
  o.k = 1;
  auto iv = KnnShapley(ds, std::vector<size_t>{0, 1}, std::vector<size_t>{2}, o);
  ASSERT_TRUE(iv.ok());
  EXPECT_NEAR(iv->values[0], -0.5, 1e-15);
  EXPECT_NEAR(iv->values[1], 0.5, 1e-15);
  const auto oracle = OracleShapley(ds, {0, 1}, {2}, 1);
  EXPECT_NEAR(oracle[0], -0.5, 1e-15);
  EXPECT_NEAR(oracle[1], 0.5, 1e-15);
}

TEST(KnnShapleyTest, MatchesSubsetOracle) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    for (int k : {1, 2, 3, 6}) {
      const size_t n = 2 + seed % 7;
      auto ds = RandomDataset(n + 3, 2, 3, seed);
      const auto train = Range(0, n), val = Range(n, n + 3);
      ValuationOptions o;
      o.k = k;
      auto iv = KnnShapley(ds, train, val, o);
      ASSERT_TRUE(iv.ok());
      const auto want = OracleShapley(ds, train, val, k);
      for (size_t i = 0; i < n; ++i) {
        EXPECT_NEAR(iv->values[i], want[i], 1e-12) << "seed " << seed << " k " << k;
      }
      auto brute = ShapleyBruteForce(ds, train, val, o);
      ASSERT_TRUE(brute.ok());
      for (size_t i = 0; i < n; ++i) EXPECT_NEAR(brute->values[i], want[i], 1e-12);
    }
  }
}

TEST(KnnShapleyTest, SinglePointAgreesWithBruteForce) {
  auto ds = RandomDataset(3, 2, 2, 9);
  ValuationOptions o;
  o.k = 3;
  auto a = KnnShapley(ds, Range(0, 1), Range(1, 3), o);
  auto b = ShapleyBruteForce(ds, Range(0, 1), Range(1, 3), o);
  ASSERT_TRUE(a.ok() && b.ok());
  EXPECT_DOUBLE_EQ(a->values[0], b->values[0]);
}

TEST(KnnShapleyTest, EfficiencyPerValidationPoint) {
  auto ds = RandomDataset(60, 3, 4, 5);
  const auto train = Range(0, 50);
  for (size_t v = 50; v < 60; ++v) {
    for (int k : {1, 3, 6}) {
      auto s = KnnShapleyForPoint(ds, train, v, k);
      ASSERT_TRUE(s.ok());
      const double sum = std::accumulate(s->begin(), s->end(), 0.0);
      EXPECT_NEAR(sum, KnnUtility(ds, train, v, k), 1e-12);
      EXPECT_NEAR(sum, OracleUtility(ds, train, v, k), 1e-12);
    }
  }
}

TEST(KnnShapleyTest, IncrementsObeyRecursionBound) {
  auto ds = RandomDataset(41, 2, 2, 11);
  const auto train = Range(0, 40);
  const size_t v = 40;
  for (int k : {1, 2, 6}) {
    auto s = KnnShapleyForPoint(ds, train, v, k);
    ASSERT_TRUE(s.ok());
    std::vector<size_t> order = train;
    auto dist = [&](size_t r) {
      double d = 0.0;
      for (size_t j = 0; j < ds.dim(); ++j) {
        const double t = double(ds.row(r)[j]) - double(ds.row(v)[j]);
        d += t * t;
      }
      return d;
    };
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return std::make_pair(dist(a), ds.id(a)) < std::make_pair(dist(b), ds.id(b));
    });
    for (size_t i = 1; i < order.size(); ++i) {
      const double inc = (*s)[order[i - 1]] - (*s)[order[i]];
      const double bound = std::min<double>(k, i) / (double(k) * i);
      EXPECT_LE(std::abs(inc), bound + 1e-15) << "rank " << i << " k " << k;
    }
    const double far = (*s)[order.back()];
    EXPECT_LE(std::abs(far), std::min<double>(k, 40) / (k * 40.0) + 1e-15);
  }
}

TEST(KnnShapleyTest, PermutationInvariant) {
  auto ds = RandomDataset(80, 3, 3, 21);
  auto train = Range(0, 70);
  const auto val = Range(70, 80);
  auto a = KnnShapley(ds, train, val);
  std::mt19937_64 rng(4);
  std::shuffle(train.begin(), train.end(), rng);
  auto b = KnnShapley(ds, train, val);
  ASSERT_TRUE(a.ok() && b.ok());
  for (size_t i = 0; i < train.size(); ++i) {
    EXPECT_NEAR(b->values[i], a->values[train[i]], 1e-12);
    EXPECT_EQ(b->ids[i], a->ids[train[i]]);
  }
}

TEST(KnnShapleyTest, ThreadCountDoesNotChangeBits) {
  auto ds = RandomDataset(300, 4, 3, 8);
  ValuationOptions one, many;
  many.threads = 8;
  auto a = KnnShapley(ds, Range(0, 200), Range(200, 300), one);
  auto b = KnnShapley(ds, Range(0, 200), Range(200, 300), many);
  ASSERT_TRUE(a.ok() && b.ok());
  EXPECT_EQ(a->values, b->values);
}

TEST(KnnShapleyTest, DuplicatesShareValue) {
  auto ds = MakeDataset({0.3f, 0.3f, -1.0f, 2.0f, 0.0f, 0.5f}, {1, 1, 0, 1, 1, 0}, 1, 2);
  ValuationOptions o;
  o.k = 2;
  auto iv = KnnShapley(ds, Range(0, 4), Range(4, 6), o);
  ASSERT_TRUE(iv.ok());
  EXPECT_NEAR(iv->values[0], iv->values[1], 1e-15);
  const auto oracle = OracleShapley(ds, Range(0, 4), Range(4, 6), 2);
  EXPECT_NEAR(oracle[0], oracle[1], 1e-15);
}

TEST(KnnShapleyTest, SumAggregationScalesMean) {
  auto ds = RandomDataset(30, 2, 2, 3);
  ValuationOptions mean, sum;
  sum.aggregation = Aggregation::kSum;
  auto a = KnnShapley(ds, Range(0, 20), Range(20, 30), mean);
  auto b = KnnShapley(ds, Range(0, 20), Range(20, 30), sum);
  ASSERT_TRUE(a.ok() && b.ok());
  for (size_t i = 0; i < 20; ++i) EXPECT_NEAR(b->values[i], 10 * a->values[i], 1e-12);
}

TEST(KnnShapleyTest, RejectsOverlapAndEmptyInputs) {
  auto ds = RandomDataset(10, 2, 2, 3);
  EXPECT_FALSE(KnnShapley(ds, Range(0, 5), Range(4, 8)).ok());
  EXPECT_FALSE(KnnShapley(ds, {}, Range(4, 8)).ok());
  EXPECT_FALSE(KnnShapley(ds, Range(0, 4), {}).ok());
  EXPECT_FALSE(ShapleyBruteForce(ds, Range(0, 10), Range(0, 0)).ok());
}

ModelSpec OneNn() {
  ModelSpec s;
  s.kind = ModelKind::kKnn;
  s.knn_k = 1;
  return s;
}

TEST(LeaveOneOutTest, ExactDuplicateHasZeroValue) {
  auto ds = MakeDataset({0.0f, 0.0f, 3.0f, 0.1f, 2.9f}, {0, 0, 1, 0, 1}, 1, 2);
  auto iv = LeaveOneOut(ds, Range(0, 3), Range(3, 5), OneNn());
  ASSERT_TRUE(iv.ok());
  EXPECT_EQ(iv->values[1], 0.0);
}

TEST(LeaveOneOutTest, SoleClassMemberHelps) {
  auto ds = MakeDataset({0.0f, 0.2f, 3.0f, 0.1f, 2.9f}, {0, 0, 1, 0, 1}, 1, 2);
  auto iv = LeaveOneOut(ds, Range(0, 3), Range(3, 5), OneNn());
  ASSERT_TRUE(iv.ok());
  EXPECT_GT(iv->values[2], 0.0);
}

TEST(LeaveOneOutTest, ConstantUtilityGivesZeros) {
  auto ds = MakeDataset({0.0f, 0.1f, 0.2f, 5.0f}, {0, 0, 0, 0}, 1, 2);
  auto iv = LeaveOneOut(ds, Range(0, 3), Range(3, 4), OneNn());
  ASSERT_TRUE(iv.ok());
  for (double v : iv->values) EXPECT_EQ(v, 0.0);
}

ImportanceVector Ascending(size_t n) {
  ImportanceVector iv;
  for (size_t i = 0; i < n; ++i) {
    iv.ids.push_back(i);
    iv.values.push_back(static_cast<double>((i * 7919) % n));
  }
  return iv;
}

TEST(BinnedStatisticTest, EqualCountBins) {
  const auto iv = Ascending(50000);
  std::vector<double> y(50000, 1.0);
  auto bins = BinnedStatistic(iv, y, 200);
  ASSERT_TRUE(bins.ok());
  ASSERT_EQ(bins->size(), 200u);
  for (const auto& b : *bins) {
    EXPECT_EQ(b.count, 250u);
    EXPECT_EQ(b.sum, 250.0);
  }
  EXPECT_LT((*bins)[0].mean_importance, (*bins)[1].mean_importance);
}

TEST(BinnedStatisticTest, RemainderGoesToLastBin) {
  const auto iv = Ascending(10);
  std::vector<double> y(10, 0.0);
  auto bins = BinnedStatistic(iv, y, 3);
  ASSERT_TRUE(bins.ok());
  EXPECT_EQ((*bins)[0].count, 3u);
  EXPECT_EQ((*bins)[2].count, 4u);
  for (const auto& b : *bins) EXPECT_EQ(b.sum, 0.0);
}

TEST(BinnedStatisticTest, OneBinSumsEverything) {
  const auto iv = Ascending(7);
  std::vector<double> y = {1, 2, 3, 4, 5, 6, 7.5};
  auto bins = BinnedStatistic(iv, y, 1);
  ASSERT_TRUE(bins.ok());
  EXPECT_DOUBLE_EQ((*bins)[0].sum, 28.5);
}

TEST(RankCorrelationTest, IdentityAndNegation) {
  const std::vector<double> a = {0.3, -1.0, 2.0, 5.0, 0.0};
  std::vector<double> neg;
  for (double v : a) neg.push_back(-v);
  auto same = RankCorrelation(a, a);
  auto opp = RankCorrelation(a, neg);
  ASSERT_TRUE(same.ok() && opp.ok());
  EXPECT_NEAR(same->pearson, 1.0, 1e-12);
  EXPECT_NEAR(opp->pearson, -1.0, 1e-12);
  EXPECT_NEAR(opp->spearman, -1.0, 1e-12);
}

TEST(RankCorrelationTest, NoisyCopyKeepsRankOrder) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> a(1000), b(1000);
  for (size_t i = 0; i < a.size(); ++i) {
    a[i] = u(rng);
    b[i] = a[i] + 0.1 * (u(rng) - 0.5);
  }
  auto c = RankCorrelation(a, b);
  ASSERT_TRUE(c.ok());
  EXPECT_GT(c->spearman, 0.9);
}

TEST(RankCorrelationTest, DegenerateInputsFail) {
  const std::vector<double> flat = {1, 1, 1, 1};
  const std::vector<double> ramp = {1, 2, 3, 4};
  EXPECT_EQ(RankCorrelation(flat, ramp).status().code(),
            absl::StatusCode::kFailedPrecondition);
  EXPECT_FALSE(RankCorrelation(std::vector<double>{1, 2}, std::vector<double>{2, 1}).ok());
}

TEST(RankCorrelationTest, AverageRanksShareTies) {
  const std::vector<double> v = {10, 20, 10, 30};
  EXPECT_EQ(AverageRanks(v), (std::vector<double>{1.5, 3, 1.5, 4}));
}

TEST(ImportanceIoTest, CsvRoundTrip) {
  auto ds = RandomDataset(30, 2, 2, 2);
  auto iv = KnnShapley(ds, Range(0, 20), Range(20, 30));
  ASSERT_TRUE(iv.ok());
  const auto dir = testing::TempDir("importance");
  ASSERT_TRUE(WriteImportanceCsv(*iv, dir / "iv.csv").ok());
  auto back = ReadImportanceCsv(dir / "iv.csv");
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(back->ids, iv->ids);
  EXPECT_EQ(back->values, iv->values);
  EXPECT_TRUE(SaveImportance(*iv, dir, "iv").ok());
  EXPECT_TRUE(std::filesystem::exists(dir / "iv.f32"));
}

}  // namespace
}  // namespace shapval
