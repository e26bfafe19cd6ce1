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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "byzsim/error.hpp"
#include "byzsim/rng.hpp"

namespace byzsim {

// A flat model-parameter-shaped vector. All vectors exchanged in one round
// share the same length.
using GradientVector = std::vector<double>;
using GradientSpan = std::span<const double>;
using GradientSet = std::vector<GradientVector>;

struct SignStats {
  double pos_frac = 0.0;
  double neg_frac = 0.0;
  double zero_frac = 0.0;
};

// Sorted, unique coordinate indices in [0, d) drawn without replacement.
struct CoordinateSubset {
  std::vector<std::size_t> indices;
  std::uint64_t seed = 0;
};

inline void CheckSameDim(const GradientSet& gs, const char* who) {
  if (gs.empty()) {
    Fail(ErrorCode::kEmptyInput, std::string(who) + ": empty gradient list");
  }
  const std::size_t d = gs.front().size();
  for (const auto& g : gs) {
    if (g.size() != d) {
      Fail(ErrorCode::kDimensionMismatch,
           std::string(who) + ": gradients differ in dimension");
    }
  }
}

inline double Dot(GradientSpan a, GradientSpan b) {
  Require(a.size() == b.size(), ErrorCode::kDimensionMismatch,
          "Dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

inline double L2Norm(GradientSpan g) { return std::sqrt(Dot(g, g)); }

inline double SquaredDistance(GradientSpan a, GradientSpan b) {
  Require(a.size() == b.size(), ErrorCode::kDimensionMismatch,
          "SquaredDistance: dimension mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double t = a[j] - b[j];
    s += t * t;
  }
  return s;
}

inline double Distance(GradientSpan a, GradientSpan b) {
  return std::sqrt(SquaredDistance(a, b));
}

inline GradientVector Scaled(GradientSpan g, double alpha) {
  GradientVector out(g.begin(), g.end());
  for (double& v : out) v *= alpha;
  return out;
}

inline GradientVector Sum(GradientSpan a, GradientSpan b) {
  Require(a.size() == b.size(), ErrorCode::kDimensionMismatch,
          "Sum: dimension mismatch");
  GradientVector out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] + b[j];
  return out;
}

inline GradientVector Difference(GradientSpan a, GradientSpan b) {
  Require(a.size() == b.size(), ErrorCode::kDimensionMismatch,
          "Difference: dimension mismatch");
  GradientVector out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = a[j] - b[j];
  return out;
}

// y += alpha * x
inline void Axpy(double alpha, GradientSpan x, GradientVector& y) {
  Require(x.size() == y.size(), ErrorCode::kDimensionMismatch,
          "Axpy: dimension mismatch");
  for (std::size_t j = 0; j < x.size(); ++j) y[j] += alpha * x[j];
}

inline bool AllFinite(GradientSpan g) {
  return std::all_of(g.begin(), g.end(),
                     [](double v) { return std::isfinite(v); });
}

// Fractions of positive, negative and zero entries. An entry counts as zero
// when |v| <= zero_eps; the default of exactly 0.0 counts only true zeros.
inline SignStats ComputeSignStats(GradientSpan g,
                                  const CoordinateSubset* subset = nullptr,
                                  double zero_eps = 0.0) {
  std::size_t pos = 0, neg = 0, zero = 0;
  auto count = [&](double v) {
    if (v > zero_eps) {
      ++pos;
    } else if (v < -zero_eps) {
      ++neg;
    } else {
      ++zero;
    }
  };
  std::size_t total = 0;
  if (subset != nullptr) {
    Require(!subset->indices.empty(), ErrorCode::kEmptyInput,
            "ComputeSignStats: empty coordinate subset");
    for (std::size_t j : subset->indices) {
      Require(j < g.size(), ErrorCode::kInvalidArgument,
              "ComputeSignStats: subset index out of range");
      count(g[j]);
    }
    total = subset->indices.size();
  } else {
    Require(!g.empty(), ErrorCode::kEmptyInput,
            "ComputeSignStats: empty gradient");
    for (double v : g) count(v);
    total = g.size();
  }
  const double inv = 1.0 / static_cast<double>(total);
  SignStats s;
  s.pos_frac = static_cast<double>(pos) * inv;
  s.neg_frac = static_cast<double>(neg) * inv;
  s.zero_frac = static_cast<double>(zero) * inv;
  return s;
}

inline double CosineSimilarity(GradientSpan a, GradientSpan b) {
  const double na = L2Norm(a);
  const double nb = L2Norm(b);
  Require(na > 0.0 && nb > 0.0, ErrorCode::kInvalidArgument,
          "CosineSimilarity: zero-norm input");
  const double c = Dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

// Coordinate-wise arithmetic mean. Summation runs in list order so results
// are reproducible bit for bit.
inline GradientVector Mean(const GradientSet& gs) {
  CheckSameDim(gs, "Mean");
  GradientVector out(gs.front().size(), 0.0);
  for (const auto& g : gs) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += g[j];
  }
  const double inv = 1.0 / static_cast<double>(gs.size());
  for (double& v : out) v *= inv;
  return out;
}

// Coordinate-wise population standard deviation (divides by n).
inline GradientVector CoordwiseStd(const GradientSet& gs) {
  CheckSameDim(gs, "CoordwiseStd");
  Require(gs.size() >= 2, ErrorCode::kInvalidArgument,
          "CoordwiseStd: need at least two gradients");
  const GradientVector mu = Mean(gs);
  GradientVector var(mu.size(), 0.0);
  for (const auto& g : gs) {
    for (std::size_t j = 0; j < mu.size(); ++j) {
      const double t = g[j] - mu[j];
      var[j] += t * t;
    }
  }
  const double inv = 1.0 / static_cast<double>(gs.size());
  for (double& v : var) v = std::sqrt(v * inv);
  return var;
}

// Draws ceil(ratio * d) distinct coordinates. Same (d, ratio, seed) always
// yields the same subset.
inline CoordinateSubset SampleCoordinates(std::size_t d, double ratio,
                                          std::uint64_t seed) {
  Require(d > 0, ErrorCode::kInvalidArgument, "SampleCoordinates: d == 0");
  Require(ratio > 0.0 && ratio <= 1.0, ErrorCode::kInvalidArgument,
          "SampleCoordinates: ratio must be in (0, 1]");
  // The small slack keeps products like 0.1 * 30 from rounding up to 4.
  std::size_t k = static_cast<std::size_t>(
      std::ceil(ratio * static_cast<double>(d) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, d);
  CoordinateSubset subset;
  subset.seed = seed;
  if (k == d) {
    subset.indices.resize(d);
    std::iota(subset.indices.begin(), subset.indices.end(), std::size_t{0});
    return subset;
  }
  std::vector<std::size_t> perm(d);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.UniformInt(d - i);
    std::swap(perm[i], perm[j]);
  }
  subset.indices.assign(perm.begin(), perm.begin() + k);
  std::sort(subset.indices.begin(), subset.indices.end());
  return subset;
}

}  // namespace byzsim
