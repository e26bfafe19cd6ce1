/*
 * Copyright 2026 The byzsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include <gtest/gtest.h>

#include "byzsim/attacks.hpp"
#include "oracles.hpp"

namespace byzsim {
namespace {

GradientSet NormalSet(std::size_t n, std::size_t d, double mu, double sd, std::uint64_t seed) {
  Rng rng(seed);
  GradientSet gs(n, GradientVector(d));
  for (auto& g : gs) {
    for (double& v : g) v = rng.Normal(mu, sd);
  }
  return gs;
}

AttackContext Ctx(GradientSet honest, std::size_t m) {
  AttackContext c;
  c.n = honest.size() + m;
  c.m = m;
  c.honest = std::move(honest);
  return c;
}

TEST(LieTest, FormulaExample) {
  const GradientVector g = LieFromStats(GradientVector{1, -2}, GradientVector{0.5, 1}, 0.3);
  EXPECT_NEAR(g[0], 0.85, 1e-15);
  EXPECT_NEAR(g[1], -2.3, 1e-15);
}

TEST(LieTest, ZeroFactorGivesMean) {
  const auto ctx = Ctx(NormalSet(12, 5, 0.3, 1.0, 1), 3);
  EXPECT_EQ(CraftLie(ctx, 0.0), Mean(ctx.honest));
}

TEST(LieTest, DistanceFromMeanIsZTimesStdNorm) {
  const auto ctx = Ctx(NormalSet(40, 10, 0.0, 1.0, 2), 10);
  const GradientVector g = CraftLie(ctx, 0.3);
  const double expect = 0.3 * L2Norm(CoordwiseStd(ctx.honest));
  EXPECT_NEAR(Distance(g, Mean(ctx.honest)), expect, 1e-14);
}

TEST(LieTest, AllClientEstimationUsesOwnGradients) {
  auto ctx = Ctx(NormalSet(8, 3, 0.0, 1.0, 3), 2);
  ctx.own = NormalSet(2, 3, 5.0, 1.0, 4);
  GradientSet all = ctx.honest;
  all.insert(all.end(), ctx.own.begin(), ctx.own.end());
  const GradientVector expect = LieFromStats(Mean(all), CoordwiseStd(all), 0.5);
  EXPECT_EQ(CraftLie(ctx, 0.5, LieEstimation::kAllClients), expect);
  ctx.own.clear();
  EXPECT_THROW(CraftLie(ctx, 0.5, LieEstimation::kAllClients), Error);
}

TEST(LieTest, RejectsByzantineMajority) {
  auto ctx = Ctx(NormalSet(5, 2, 0, 1, 1), 5);
  EXPECT_THROW(CraftLie(ctx, 0.3), Error);
}

TEST(LieZMaxTest, MatchesSeriesOracle) {
  EXPECT_NEAR(LieZMax(50, 10), oracle::InvPhiSeries(0.6), 1e-9);
  EXPECT_NEAR(LieZMax(50, 10), 0.2533471031357997, 1e-9);
  EXPECT_NEAR(LieZMax(50, 25), oracle::InvPhiSeries(0.96), 1e-9);
  EXPECT_NEAR(LieZMax(50, 25), 1.7506860712521692, 1e-9);
}

TEST(LieZMaxTest, HalfRatioGivesZero) {
  // n = 10: s = 6, (10 - 6) / (10 - m) = 0.5 at m = 2.
  EXPECT_NEAR(LieZMax(10, 2), 0.0, 1e-9);
}

TEST(LieZMaxTest, BracketsTheQuantile) {
  Rng rng(77);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 3 + rng.UniformInt(300);
    const std::size_t s = n / 2 + 1;
    // ratio < 1 needs n - m > n - s, i.e. m < s.
    const std::size_t m = 1 + rng.UniformInt(std::min(s - 1, n - 1));
    const double ratio = static_cast<double>(n - s) / static_cast<double>(n - m);
    if (!(ratio > 0.0 && ratio < 1.0)) continue;
    const double z = LieZMax(n, m);
    EXPECT_LT(NormalCdf(z), ratio);
    EXPECT_LE(ratio, NormalCdf(z + 1e-6));
  }
  EXPECT_THROW(LieZMax(10, 0), Error);
  EXPECT_THROW(LieZMax(4, 3), Error);  // ratio (4-3)/(4-3) = 1
}

TEST(ByzMeanTest, HandExample) {
  // Honest {1, 3, 5}, m = 2, inner LIE with z = 1.
  const AttackContext ctx = Ctx({{1}, {3}, {5}}, 2);
  AttackSpec inner;
  inner.kind = AttackKind::kLie;
  inner.z = 1.0;
  const ByzMeanResult r = CraftByzMean(ctx, inner, 0);
  EXPECT_EQ(r.m1, 1u);
  EXPECT_EQ(r.m2, 1u);
  const double g1 = 3.0 - std::sqrt(8.0 / 3.0);
  EXPECT_NEAR(r.g_m1[0], g1, 1e-14);
  EXPECT_NEAR(r.g_m2[0], 4.0 * g1 - 9.0, 1e-13);
  EXPECT_NEAR((9.0 + r.g_m1[0] + r.g_m2[0]) / 5.0, g1, 1e-14);
}

TEST(ByzMeanTest, MeanOfAllEqualsInnerVector) {
  for (AttackKind inner_kind : {AttackKind::kLie, AttackKind::kRandom, AttackKind::kMinMax}) {
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto ctx = Ctx(NormalSet(40, 20, 0.2, 1.0, s), 10);
      AttackSpec spec;
      spec.kind = AttackKind::kByzMean;
      auto inner = std::make_shared<AttackSpec>();
      inner->kind = inner_kind;
      spec.byzmean_inner = inner;
      GradientSet all = CraftAttack(spec, ctx, s);
      ASSERT_EQ(all.size(), 10u);
      const GradientVector g_m1 = all.front();
      all.insert(all.end(), ctx.honest.begin(), ctx.honest.end());
      // Independent re-summation in reverse order.
      for (std::size_t j = 0; j < 20; ++j) {
        double sum = 0.0;
        for (std::size_t i = all.size(); i-- > 0;) sum += all[i][j];
        EXPECT_NEAR(sum / 50.0, g_m1[j], 1e-9);
      }
    }
  }
}

TEST(ByzMeanTest, Errors) {
  EXPECT_THROW(CraftByzMean(Ctx({{1}, {2}, {3}}, 1), AttackSpec(), 0), Error);
  AttackSpec nested;
  nested.kind = AttackKind::kByzMean;
  EXPECT_THROW(CraftByzMean(Ctx(NormalSet(6, 2, 0, 1, 1), 2), nested, 0), Error);
}

TEST(MinMaxTest, OneDimensionalClosedForm) {
  const auto ctx = Ctx({{0}, {2}}, 0);
  const GradientVector g = CraftMinMax(ctx, GradientVector{-1}, 1e-9);
  EXPECT_NEAR(g[0], 0.0, 1e-8);
  // Grid oracle: largest feasible gamma on a fine grid.
  double best = 0.0;
  for (int k = 0; k <= 40000; ++k) {
    const double gam = k * 1e-4;
    if (std::max(std::abs(1 - gam), std::abs(-1 - gam)) <= 2.0) best = gam;
  }
  EXPECT_NEAR(1.0 - g[0], best, 1e-4);
}

TEST(MinSumTest, OneDimensionalClosedForm) {
  const auto ctx = Ctx({{0}, {2}}, 0);
  const GradientVector g = CraftMinSum(ctx, GradientVector{-1}, 1e-9);
  EXPECT_NEAR(g[0], 0.0, 1e-8);
  double best = 0.0;
  for (int k = 0; k <= 40000; ++k) {
    const double gam = k * 1e-4;
    if ((1 - gam) * (1 - gam) + (-1 - gam) * (-1 - gam) <= 4.0) best = gam;
  }
  EXPECT_NEAR(1.0 - g[0], best, 1e-4);
}

TEST(MinMaxTest, ZeroGammaFeasible) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto h = NormalSet(15, 4, 0, 1, s);
    EXPECT_LE(MinMaxObjective(h, Mean(h)), MinMaxBudget(h));
    EXPECT_LE(MinSumObjective(h, Mean(h)), MinSumBudget(h));
  }
}

TEST(MinMaxTest, BoundaryOnBothSides) {
  const double tol = 1e-6;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto ctx = Ctx(NormalSet(40, 10, 0, 1, 100 + s), 10);
    const GradientVector p = DefaultPerturbation(ctx.honest, PerturbationKind::kInverseStd);
    const GradientVector avg = Mean(ctx.honest);
    for (int which = 0; which < 2; ++which) {
      const GradientVector g = which == 0 ? CraftMinMax(ctx, p, tol) : CraftMinSum(ctx, p, tol);
      // Recover gamma from the output along the perturbation.
      const double gamma = Dot(Difference(g, avg), p) / Dot(p, p);
      GradientVector over = avg;
      Axpy(gamma * (1 + 10 * tol), p, over);
      if (which == 0) {
        EXPECT_LE(MinMaxObjective(ctx.honest, g), MinMaxBudget(ctx.honest));
        EXPECT_GT(MinMaxObjective(ctx.honest, over), MinMaxBudget(ctx.honest));
      } else {
        EXPECT_LE(MinSumObjective(ctx.honest, g), MinSumBudget(ctx.honest));
        EXPECT_GT(MinSumObjective(ctx.honest, over), MinSumBudget(ctx.honest));
      }
    }
  }
}

TEST(MinMaxTest, ZeroPerturbationRejected) {
  const auto ctx = Ctx(NormalSet(5, 3, 0, 1, 1), 1);
  EXPECT_THROW(CraftMinMax(ctx, GradientVector(3, 0.0), 1e-6), Error);
}

TEST(MinMaxTest, IdenticalHonestGivesZeroGamma) {
  const auto ctx = Ctx({{1.0, 1.0}, {1.0, 1.0}}, 0);
  const GradientVector g = CraftMinMax(ctx, GradientVector{1, 0}, 1e-6);
  EXPECT_EQ(g, (GradientVector{1.0, 1.0}));
}

TEST(MinMaxTest, BracketFailureReported) {
  // gamma* = 5e15 lies past 64 doublings of 1e-6.
  const auto ctx = Ctx({{0.0}, {1e16}}, 0);
  try {
    CraftMinMax(ctx, GradientVector{-1.0}, 1e-6);
    FAIL() << "expected a bracket failure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBracketFailed);
  }
}

TEST(RandomTest, DeterministicAndCalibrated) {
  EXPECT_EQ(CraftRandom(100, 0, 0.5, 9), CraftRandom(100, 0, 0.5, 9));
  EXPECT_NE(CraftRandom(100, 0, 0.5, 9), CraftRandom(100, 0, 0.5, 10));
  const GradientVector g = CraftRandom(10000, 0.0, 0.5, 123);
  double mean = 0.0;
  for (double v : g) mean += v;
  mean /= g.size();
  double var = 0.0;
  for (double v : g) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / g.size());
  EXPECT_LE(std::abs(mean), 0.02);
  EXPECT_GE(sd, 0.48);
  EXPECT_LE(sd, 0.52);
  EXPECT_THROW(CraftRandom(3, 0, 0, 1), Error);
}

TEST(NoiseTest, AddsCalibratedNoise) {
  const GradientVector h = CraftRandom(5000, 1.0, 2.0, 5);
  EXPECT_EQ(CraftNoise(h, 0.0, 0.0, 3), h);
  const GradientVector g = CraftNoise(h, 0.0, 0.5, 3);
  EXPECT_EQ(g, CraftNoise(h, 0.0, 0.5, 3));
  const GradientVector diff = Difference(g, h);
  double var = 0.0;
  for (double v : diff) var += v * v;
  EXPECT_NEAR(std::sqrt(var / diff.size()), 0.5, 0.02);
}

TEST(SignFlipTest, NegatesAndScales) {
  EXPECT_EQ(CraftSignFlip(GradientVector{1, -2}), (GradientVector{-1, 2}));
  const GradientVector g = CraftRandom(50, 0, 1, 4);
  EXPECT_DOUBLE_EQ(L2Norm(CraftSignFlip(g)), L2Norm(g));
  EXPECT_NEAR(L2Norm(CraftSignFlip(g, 100)), 100 * L2Norm(g), 1e-12 * L2Norm(g) * 100);
}

TEST(CraftAttackTest, ShapesAndDeterminism) {
  auto ctx = Ctx(NormalSet(20, 6, 0.1, 1, 5), 5);
  ctx.own = NormalSet(5, 6, 0.1, 1, 6);
  for (AttackKind k : {AttackKind::kNone, AttackKind::kRandom, AttackKind::kNoise,
                       AttackKind::kSignFlip, AttackKind::kLabelFlip, AttackKind::kLie,
                       AttackKind::kByzMean, AttackKind::kMinMax, AttackKind::kMinSum}) {
    AttackSpec spec;
    spec.kind = k;
    const GradientSet a = CraftAttack(spec, ctx, 17);
    EXPECT_EQ(a.size(), 5u) << AttackKindName(k);
    EXPECT_EQ(a, CraftAttack(spec, ctx, 17)) << AttackKindName(k);
    for (const auto& g : a) EXPECT_TRUE(AllFinite(g));
  }
  AttackSpec lie;
  lie.kind = AttackKind::kLie;
  const GradientSet a = CraftAttack(lie, ctx, 0);
  for (const auto& g : a) EXPECT_EQ(g, a.front());
}

}  // namespace
}  // namespace byzsim
