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

#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "byzsim/attacks.hpp"
#include "byzsim/gradients.hpp"
#include "oracles.hpp"

namespace byzsim {
namespace {

TEST(L2NormTest, Examples) {
  EXPECT_DOUBLE_EQ(L2Norm(GradientVector{3, 4}), 5.0);
  EXPECT_DOUBLE_EQ(L2Norm(GradientVector{0, 0, 0}), 0.0);
  EXPECT_DOUBLE_EQ(L2Norm(GradientVector{1, 1, 1, 1}), 2.0);
}

TEST(L2NormTest, AbsoluteHomogeneity) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    GradientVector g(17);
    for (double& v : g) v = rng.Normal();
    const double a = rng.Normal() * 5;
    EXPECT_NEAR(L2Norm(Scaled(g, a)), std::abs(a) * L2Norm(g), 1e-12 * (1 + std::abs(a)) * L2Norm(g));
  }
}

TEST(SignStatsTest, Examples) {
  const SignStats s = ComputeSignStats(GradientVector{1, -1, 0, 2});
  EXPECT_DOUBLE_EQ(s.pos_frac, 0.5);
  EXPECT_DOUBLE_EQ(s.neg_frac, 0.25);
  EXPECT_DOUBLE_EQ(s.zero_frac, 0.25);
  const SignStats t = ComputeSignStats(GradientVector{-1, -1});
  EXPECT_DOUBLE_EQ(t.pos_frac, 0.0);
  EXPECT_DOUBLE_EQ(t.neg_frac, 1.0);
  EXPECT_DOUBLE_EQ(t.zero_frac, 0.0);
}

TEST(SignStatsTest, SubsetAndErrors) {
  const GradientVector g{1, -1, 0, 2};
  CoordinateSubset sub{{1, 2}, 0};
  const SignStats s = ComputeSignStats(g, &sub);
  EXPECT_DOUBLE_EQ(s.neg_frac, 0.5);
  EXPECT_DOUBLE_EQ(s.zero_frac, 0.5);
  CoordinateSubset empty{{}, 0};
  try {
    ComputeSignStats(g, &empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
  CoordinateSubset bad{{7}, 0};
  EXPECT_THROW(ComputeSignStats(g, &bad), Error);
}

TEST(SignStatsTest, ZeroEpsilonBand) {
  const GradientVector g{1e-9, -1e-9, 0.0, 1.0};
  EXPECT_DOUBLE_EQ(ComputeSignStats(g).zero_frac, 0.25);
  EXPECT_DOUBLE_EQ(ComputeSignStats(g, nullptr, 1e-6).zero_frac, 0.75);
}

TEST(SignStatsTest, FractionsSumToOne) {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    GradientVector g(1 + rng.UniformInt(40));
    for (double& v : g) v = rng.Uniform() < 0.2 ? 0.0 : rng.Normal();
    const SignStats s = ComputeSignStats(g);
    EXPECT_NEAR(s.pos_frac + s.neg_frac + s.zero_frac, 1.0, 1e-12);
  }
}

TEST(SignStatsTest, StandardNormalPositiveFraction) {
  // Exact binomial probability that 450 <= #positive <= 550 out of 1000.
  const double inside = 1.0 - oracle::BinomTailOutside(1000, 0.5, 450, 550);
  EXPECT_NEAR(inside, 0.99861, 1e-5);
  Rng rng(2024);
  GradientVector g(1000);
  for (double& v : g) v = rng.Normal();
  const double p = ComputeSignStats(g).pos_frac;
  EXPECT_GE(p, 0.45);
  EXPECT_LE(p, 0.55);
}

TEST(CosineTest, Examples) {
  EXPECT_DOUBLE_EQ(CosineSimilarity(GradientVector{1, 0}, GradientVector{2, 0}), 1.0);
  EXPECT_DOUBLE_EQ(CosineSimilarity(GradientVector{1, 0}, GradientVector{0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(CosineSimilarity(GradientVector{1, 0}, GradientVector{-3, 0}), -1.0);
  EXPECT_THROW(CosineSimilarity(GradientVector{0, 0}, GradientVector{1, 0}), Error);
}

TEST(CosineTest, ScaleBehaviour) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    GradientVector a(9), b(9);
    for (double& v : a) v = rng.Normal();
    for (double& v : b) v = rng.Normal();
    const double c = CosineSimilarity(a, b);
    const double alpha = 0.1 + 10 * rng.Uniform();
    EXPECT_NEAR(CosineSimilarity(Scaled(a, alpha), b), c, 1e-12);
    EXPECT_NEAR(CosineSimilarity(Scaled(a, -alpha), b), -c, 1e-12);
  }
}

TEST(MeanTest, Examples) {
  EXPECT_EQ(Mean({{1, 1}, {3, 3}}), (GradientVector{2, 2}));
  EXPECT_EQ(Mean({{0.7}}), (GradientVector{0.7}));
  EXPECT_EQ(Mean({{1, 0}, {0, 1}, {-1, -1}}), (GradientVector{0, 0}));
  EXPECT_THROW(Mean({}), Error);
  EXPECT_THROW(Mean({{1, 2}, {1}}), Error);
}

TEST(StdTest, Examples) {
  EXPECT_EQ(CoordwiseStd({{0}, {2}}), (GradientVector{1.0}));
  EXPECT_EQ(CoordwiseStd({{4.5}, {4.5}, {4.5}}), (GradientVector{0.0}));
  EXPECT_EQ(CoordwiseStd({{1, 0}, {3, 4}}), (GradientVector{1.0, 2.0}));
  EXPECT_THROW(CoordwiseStd({{1}}), Error);
}

TEST(StdTest, PopulationNotSample) {
  // Divides by n: three points 0, 1, 2 give sqrt(2/3), not 1.
  EXPECT_NEAR(CoordwiseStd({{0}, {1}, {2}})[0], std::sqrt(2.0 / 3.0), 1e-15);
}

TEST(StdTest, IdenticalVectorsGiveZero) {
  const GradientVector g{1.5, -2.25, 0.0, 3.0};
  EXPECT_EQ(CoordwiseStd(GradientSet(7, g)), GradientVector(4, 0.0));
}

TEST(StdTest, LieCraftLeavesHonestStatsUnchanged) {
  Rng rng(8);
  GradientSet honest(30, GradientVector(6));
  for (auto& g : honest) {
    for (double& v : g) v = rng.Normal(1.0, 2.0);
  }
  const GradientVector mu = Mean(honest), sd = CoordwiseStd(honest);
  AttackContext ctx{honest, {}, 40, 10};
  (void)CraftLie(ctx, 0.7);
  EXPECT_EQ(Mean(honest), mu);
  EXPECT_EQ(CoordwiseStd(honest), sd);
}

TEST(SampleCoordinatesTest, SizeUniquenessDeterminism) {
  for (std::size_t d : {1u, 7u, 30u, 100u, 1000u}) {
    for (double rho : {0.01, 0.1, 0.33, 1.0}) {
      const auto a = SampleCoordinates(d, rho, 42);
      const auto b = SampleCoordinates(d, rho, 42);
      EXPECT_EQ(a.indices, b.indices);
      std::size_t k = static_cast<std::size_t>(std::ceil(rho * d - 1e-9));
      k = std::max<std::size_t>(1, std::min(k, d));
      EXPECT_EQ(a.indices.size(), k);
      EXPECT_TRUE(std::is_sorted(a.indices.begin(), a.indices.end()));
      EXPECT_EQ(std::set<std::size_t>(a.indices.begin(), a.indices.end()).size(), k);
      for (auto j : a.indices) EXPECT_LT(j, d);
    }
  }
  EXPECT_EQ(SampleCoordinates(30, 0.1, 1).indices.size(), 3u);
  EXPECT_NE(SampleCoordinates(1000, 0.1, 1).indices, SampleCoordinates(1000, 0.1, 2).indices);
  EXPECT_THROW(SampleCoordinates(10, 0.0, 1), Error);
}

}  // namespace
}  // namespace byzsim
