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
#include <limits>
#include <utility>
#include <vector>

#include "byzsim/error.hpp"
#include "byzsim/gradients.hpp"
#include "byzsim/rng.hpp"

namespace byzsim {

// Per-client feature vector for the sign filter. The first three entries are
// the positive, zero and negative fractions when built by the sign filter.
struct FeatureRow {
  std::vector<double> values;
  std::size_t client_index = 0;
};

struct ClusterAssignment {
  std::vector<int> labels;
  std::vector<std::vector<double>> modes;
};

enum class KernelKind { kFlat, kGaussian };

namespace detail {

inline void CheckRows(const std::vector<FeatureRow>& rows, const char* who) {
  if (rows.empty()) Fail(ErrorCode::kEmptyInput, std::string(who) + ": no rows");
  const std::size_t k = rows.front().values.size();
  for (const auto& r : rows) {
    if (r.values.size() != k) {
      Fail(ErrorCode::kDimensionMismatch,
           std::string(who) + ": rows differ in dimension");
    }
  }
}

}  // namespace detail

// Shifts every row to the (kernel-weighted) mean of the rows near it until it
// moves less than tol, then merges converged points closer than bandwidth/2
// in row order and labels each row by the nearest mode.
inline ClusterAssignment MeanShift(const std::vector<FeatureRow>& rows,
                                   double bandwidth, double tol = 1e-6,
                                   int max_iter = 300,
                                   KernelKind kernel = KernelKind::kFlat) {
  detail::CheckRows(rows, "MeanShift");
  Require(bandwidth > 0.0, ErrorCode::kInvalidArgument,
          "MeanShift: bandwidth must be positive");
  const std::size_t n = rows.size();
  const std::size_t k = rows.front().values.size();
  const double bw2 = bandwidth * bandwidth;
  std::vector<std::vector<double>> points(n);
  std::vector<double> next(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x = rows[i].values;
    for (int it = 0; it < max_iter; ++it) {
      std::fill(next.begin(), next.end(), 0.0);
      double wsum = 0.0;
      for (const auto& r : rows) {
        const double dist2 = SquaredDistance(x, r.values);
        double w;
        if (kernel == KernelKind::kFlat) {
          w = dist2 <= bw2 ? 1.0 : 0.0;
        } else {
          w = std::exp(-0.5 * dist2 / bw2);
        }
        if (w == 0.0) continue;
        wsum += w;
        for (std::size_t c = 0; c < k; ++c) next[c] += w * r.values[c];
      }
      if (wsum == 0.0) break;
      for (double& v : next) v /= wsum;
      const double move = Distance(next, x);
      x = next;
      if (move < tol) break;
    }
    points[i] = std::move(x);
  }
  ClusterAssignment out;
  const double merge2 = 0.25 * bw2;
  for (std::size_t i = 0; i < n; ++i) {
    bool merged = false;
    for (const auto& mode : out.modes) {
      if (SquaredDistance(points[i], mode) <= merge2) {
        merged = true;
        break;
      }
    }
    if (!merged) out.modes.push_back(points[i]);
  }
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int label = 0;
    for (std::size_t c = 0; c < out.modes.size(); ++c) {
      const double dist2 = SquaredDistance(points[i], out.modes[c]);
      if (dist2 < best) {
        best = dist2;
        label = static_cast<int>(c);
      }
    }
    out.labels[i] = label;
  }
  // Drop modes that ended up without members and keep labels dense.
  std::vector<int> remap(out.modes.size(), -1);
  std::vector<std::vector<double>> kept;
  for (std::size_t i = 0; i < n; ++i) {
    int& r = remap[static_cast<std::size_t>(out.labels[i])];
    if (r < 0) {
      r = static_cast<int>(kept.size());
      kept.push_back(out.modes[static_cast<std::size_t>(out.labels[i])]);
    }
    out.labels[i] = r;
  }
  out.modes = std::move(kept);
  return out;
}

// Nearest-rank quantile of all pairwise row distances; 1e-3 when that is 0.
inline double EstimateBandwidth(const std::vector<FeatureRow>& rows,
                                double quantile) {
  detail::CheckRows(rows, "EstimateBandwidth");
  Require(rows.size() >= 2, ErrorCode::kInvalidArgument,
          "EstimateBandwidth: need at least two rows");
  Require(quantile > 0.0 && quantile <= 1.0, ErrorCode::kInvalidArgument,
          "EstimateBandwidth: quantile must be in (0, 1]");
  std::vector<double> dists;
  dists.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      dists.push_back(Distance(rows[i].values, rows[j].values));
    }
  }
  std::sort(dists.begin(), dists.end());
  const double p = static_cast<double>(dists.size());
  std::size_t idx = static_cast<std::size_t>(std::ceil(quantile * p - 1e-9));
  idx = std::clamp<std::size_t>(idx, 1, dists.size()) - 1;
  const double bw = dists[idx];
  return bw > 0.0 ? bw : 1e-3;
}

namespace detail {

struct LloydResult {
  std::vector<int> labels;
  std::vector<std::vector<double>> centers;
  double sse = 0.0;
};

inline LloydResult Lloyd2(const std::vector<FeatureRow>& rows,
                          std::vector<double> c0, std::vector<double> c1,
                          int max_iter) {
  const std::size_t n = rows.size();
  const std::size_t k = c0.size();
  LloydResult r;
  r.labels.assign(n, -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int l = SquaredDistance(rows[i].values, c1) <
                            SquaredDistance(rows[i].values, c0)
                        ? 1
                        : 0;
      if (l != r.labels[i]) {
        r.labels[i] = l;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<double> s0(k, 0.0), s1(k, 0.0);
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = r.labels[i] == 0 ? s0 : s1;
      (r.labels[i] == 0 ? n0 : n1)++;
      for (std::size_t c = 0; c < k; ++c) s[c] += rows[i].values[c];
    }
    // An emptied cluster keeps its previous center.
    if (n0 > 0) {
      for (std::size_t c = 0; c < k; ++c) c0[c] = s0[c] / static_cast<double>(n0);
    }
    if (n1 > 0) {
      for (std::size_t c = 0; c < k; ++c) c1[c] = s1[c] / static_cast<double>(n1);
    }
  }
  r.centers = {std::move(c0), std::move(c1)};
  for (std::size_t i = 0; i < n; ++i) {
    r.sse += SquaredDistance(rows[i].values,
                             r.centers[static_cast<std::size_t>(r.labels[i])]);
  }
  return r;
}

// Centroids of the 2-partition with least within-cluster SSE, with row 0
// fixed in the first part. Exponential in the row count.
inline std::pair<std::vector<double>, std::vector<double>> BestSplitCentroids(
    const std::vector<FeatureRow>& rows) {
  const std::size_t n = rows.size();
  const std::size_t k = rows.front().values.size();
  double total_sq = 0.0;
  std::vector<double> total(k, 0.0);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < k; ++c) {
      total[c] += r.values[c];
      total_sq += r.values[c] * r.values[c];
    }
  }
  double best_sse = std::numeric_limits<double>::infinity();
  std::uint64_t best_mask = 0;
  std::vector<double> s1(k);
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << (n - 1)); ++mask) {
    std::fill(s1.begin(), s1.end(), 0.0);
    std::size_t n1 = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (!((mask >> (i - 1)) & 1u)) continue;
      ++n1;
      for (std::size_t c = 0; c < k; ++c) s1[c] += rows[i].values[c];
    }
    double q0 = 0.0, q1 = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double a = total[c] - s1[c];
      q0 += a * a;
      q1 += s1[c] * s1[c];
    }
    const double sse = total_sq - q0 / static_cast<double>(n - n1) -
                       q1 / static_cast<double>(n1);
    if (sse < best_sse) {
      best_sse = sse;
      best_mask = mask;
    }
  }
  std::vector<double> c0(k, 0.0), c1(k, 0.0);
  std::size_t n1 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool one = i > 0 && ((best_mask >> (i - 1)) & 1u);
    n1 += one;
    auto& c = one ? c1 : c0;
    for (std::size_t j = 0; j < k; ++j) c[j] += rows[i].values[j];
  }
  for (double& v : c0) v /= static_cast<double>(n - n1);
  for (double& v : c1) v /= static_cast<double>(n1);
  return {c0, c1};
}

}  // namespace detail

// Two-cluster Lloyd iteration. The first start is the farthest pair of rows.
// Up to kExactRows rows, the centroids of the minimum-SSE 2-partition (found
// by enumeration) are one more start, which Lloyd leaves in place. Up to
// kPairRows every pair of rows is also a start; beyond that, `restarts`
// seeded random pairs. The lowest SSE wins and labels are normalized so
// row 0 is in cluster 0.
inline ClusterAssignment KMeans2(const std::vector<FeatureRow>& rows,
                                 std::uint64_t seed, int max_iter = 100,
                                 int restarts = 8) {
  detail::CheckRows(rows, "KMeans2");
  const std::size_t n = rows.size();
  Require(n >= 2, ErrorCode::kInvalidArgument, "KMeans2: need at least two rows");
  std::size_t fa = 0, fb = 1;
  double far = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d2 = SquaredDistance(rows[i].values, rows[j].values);
      if (d2 > far) {
        far = d2;
        fa = i;
        fb = j;
      }
    }
  }
  detail::LloydResult best =
      detail::Lloyd2(rows, rows[fa].values, rows[fb].values, max_iter);
  auto consider = [&](std::size_t a, std::size_t b) {
    detail::LloydResult cand =
        detail::Lloyd2(rows, rows[a].values, rows[b].values, max_iter);
    if (cand.sse < best.sse - 1e-15) best = std::move(cand);
  };
  constexpr std::size_t kExactRows = 16;
  constexpr std::size_t kPairRows = 64;
  if (far > 0.0 && n <= kExactRows) {
    const auto [c0, c1] = detail::BestSplitCentroids(rows);
    detail::LloydResult cand = detail::Lloyd2(rows, c0, c1, max_iter);
    if (cand.sse < best.sse - 1e-15) best = std::move(cand);
  }
  if (far > 0.0 && n <= kPairRows) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) consider(a, b);
    }
  } else if (far > 0.0) {
    Rng rng(seed);
    for (int s = 0; s < restarts; ++s) {
      const std::size_t a = rng.UniformInt(n);
      std::size_t b = rng.UniformInt(n - 1);
      if (b >= a) ++b;
      consider(a, b);
    }
  }
  ClusterAssignment out;
  out.labels = best.labels;
  out.modes = best.centers;
  if (out.labels[0] == 1) {
    for (int& l : out.labels) l = 1 - l;
    std::swap(out.modes[0], out.modes[1]);
  }
  return out;
}

// Client indices of the most populous cluster. Ties go to the cluster whose
// mode has the larger positive-plus-negative fraction, then the lower id.
inline std::vector<std::size_t> LargestCluster(
    const ClusterAssignment& assign, const std::vector<FeatureRow>& rows) {
  Require(assign.labels.size() == rows.size(), ErrorCode::kInvalidArgument,
          "LargestCluster: label count differs from row count");
  Require(!rows.empty(), ErrorCode::kEmptyInput, "LargestCluster: no rows");
  std::size_t num = assign.modes.size();
  for (int l : assign.labels) {
    Require(l >= 0, ErrorCode::kInvalidArgument, "LargestCluster: bad label");
    num = std::max(num, static_cast<std::size_t>(l) + 1);
  }
  std::vector<std::size_t> counts(num, 0);
  for (int l : assign.labels) ++counts[static_cast<std::size_t>(l)];
  auto signed_mass = [&](std::size_t c) {
    if (c >= assign.modes.size() || assign.modes[c].size() < 3) return 0.0;
    return assign.modes[c][0] + assign.modes[c][2];
  };
  std::size_t best = 0;
  for (std::size_t c = 1; c < num; ++c) {
    if (counts[c] > counts[best] ||
        (counts[c] == counts[best] && signed_mass(c) > signed_mass(best))) {
      best = c;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<std::size_t>(assign.labels[i]) == best) {
      out.push_back(rows[i].client_index);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace byzsim
