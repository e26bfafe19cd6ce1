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
#include <numeric>
#include <string>
#include <vector>

#include "byzsim/error.hpp"
#include "byzsim/gradients.hpp"

namespace byzsim {

inline GradientVector AggMean(const GradientSet& gs) { return Mean(gs); }

namespace detail {

inline double MedianOfSorted(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double MedianOf(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return MedianOfSorted(v);
}

}  // namespace detail

// Per coordinate: drop the k largest and k smallest values, average the rest.
inline GradientVector AggTrimmedMean(const GradientSet& gs, std::size_t k) {
  CheckSameDim(gs, "AggTrimmedMean");
  const std::size_t n = gs.size();
  Require(2 * k < n, ErrorCode::kInvalidArgument,
          "AggTrimmedMean: need 2k < n");
  const std::size_t d = gs.front().size();
  GradientVector out(d);
  std::vector<double> col(n);
  const double inv = 1.0 / static_cast<double>(n - 2 * k);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = gs[i][j];
    std::sort(col.begin(), col.end());
    double s = 0.0;
    for (std::size_t i = k; i < n - k; ++i) s += col[i];
    out[j] = s * inv;
  }
  return out;
}

inline GradientVector AggCoordwiseMedian(const GradientSet& gs) {
  CheckSameDim(gs, "AggCoordwiseMedian");
  const std::size_t n = gs.size();
  const std::size_t d = gs.front().size();
  GradientVector out(d);
  std::vector<double> col(n);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = gs[i][j];
    std::sort(col.begin(), col.end());
    out[j] = detail::MedianOfSorted(col);
  }
  return out;
}

inline double GeoMedObjective(const GradientSet& gs, GradientSpan x) {
  double s = 0.0;
  for (const auto& g : gs) s += Distance(x, g);
  return s;
}

// Weiszfeld iteration from the mean. Each distance gets 1e-12 added so an
// iterate that lands on a data point stays well defined.
inline GradientVector AggGeoMed(const GradientSet& gs, double tol = 1e-7,
                                int max_iter = 1000) {
  CheckSameDim(gs, "AggGeoMed");
  GradientVector x = Mean(gs);
  const std::size_t d = x.size();
  GradientVector best = x;
  double best_obj = GeoMedObjective(gs, x);
  GradientVector next(d);
  for (int it = 0; it < max_iter; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    double wsum = 0.0;
    for (const auto& g : gs) {
      const double w = 1.0 / (Distance(x, g) + 1e-12);
      wsum += w;
      for (std::size_t j = 0; j < d; ++j) next[j] += w * g[j];
    }
    for (double& v : next) v /= wsum;
    const double move = Distance(next, x);
    x.swap(next);
    const double obj = GeoMedObjective(gs, x);
    if (obj <= best_obj) {
      best_obj = obj;
      best = x;
    }
    if (move < tol) break;
  }
  return best;
}

// Sum of squared distances from each gradient to its n - m - 2 nearest
// neighbours.
inline std::vector<double> KrumScores(const GradientSet& gs, std::size_t m) {
  CheckSameDim(gs, "KrumScores");
  const std::size_t n = gs.size();
  Require(n >= m + 3, ErrorCode::kInvalidArgument,
          "KrumScores: need n - m - 2 >= 1");
  const std::size_t nb = n - m - 2;
  std::vector<std::vector<double>> d2(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d2[i][j] = d2[j][i] = SquaredDistance(gs[i], gs[j]);
    }
  }
  std::vector<double> scores(n);
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row.push_back(d2[i][j]);
    }
    std::sort(row.begin(), row.end());
    scores[i] = std::accumulate(row.begin(), row.begin() + nb, 0.0);
  }
  return scores;
}

// Indices of the k lowest Krum scores, ascending by (score, index).
inline std::vector<std::size_t> MultiKrumSelect(const GradientSet& gs,
                                                std::size_t m,
                                                std::size_t k_select) {
  const std::vector<double> scores = KrumScores(gs, m);
  Require(k_select >= 1 && k_select <= gs.size(), ErrorCode::kInvalidArgument,
          "MultiKrumSelect: k_select out of range");
  std::vector<std::size_t> order(gs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  order.resize(k_select);
  return order;
}

inline GradientVector MeanOfIndices(const GradientSet& gs,
                                    std::vector<std::size_t> idx) {
  Require(!idx.empty(), ErrorCode::kEmptyInput, "MeanOfIndices: empty set");
  std::sort(idx.begin(), idx.end());
  GradientVector out(gs[idx.front()].size(), 0.0);
  for (std::size_t i : idx) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += gs[i][j];
  }
  const double inv = 1.0 / static_cast<double>(idx.size());
  for (double& v : out) v *= inv;
  return out;
}

inline GradientVector AggMultiKrum(const GradientSet& gs, std::size_t m,
                                   std::size_t k_select) {
  return MeanOfIndices(gs, MultiKrumSelect(gs, m, k_select));
}

inline GradientVector AggMultiKrum(const GradientSet& gs, std::size_t m) {
  Require(gs.size() > m, ErrorCode::kInvalidArgument,
          "AggMultiKrum: m must be below n");
  return AggMultiKrum(gs, m, gs.size() - m);
}

// Repeated Krum picks theta = n - 2m gradients, removing each winner before
// rescoring. When few candidates remain the neighbour count shrinks to what
// is available.
inline std::vector<std::size_t> BulyanSelect(const GradientSet& gs,
                                             std::size_t m) {
  CheckSameDim(gs, "BulyanSelect");
  const std::size_t n = gs.size();
  Require(n >= 4 * m + 3, ErrorCode::kInvalidArgument,
          "BulyanSelect: need n >= 4m + 3");
  const std::size_t theta = n - 2 * m;
  std::vector<std::vector<double>> d2(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      d2[i][j] = d2[j][i] = SquaredDistance(gs[i], gs[j]);
    }
  }
  std::vector<std::size_t> remaining(n);
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});
  std::vector<std::size_t> selected;
  std::vector<double> row;
  while (selected.size() < theta) {
    const std::size_t r = remaining.size();
    std::size_t best_pos = 0;
    if (r > 1) {
      const std::size_t nb =
          std::min(r - 1, r >= m + 3 ? r - m - 2 : std::size_t{1});
      double best_score = 0.0;
      for (std::size_t p = 0; p < r; ++p) {
        row.clear();
        for (std::size_t q = 0; q < r; ++q) {
          if (q != p) row.push_back(d2[remaining[p]][remaining[q]]);
        }
        std::sort(row.begin(), row.end());
        const double s = std::accumulate(row.begin(), row.begin() + nb, 0.0);
        // remaining stays in ascending index order, so strict < keeps the
        // lowest index on ties.
        if (p == 0 || s < best_score) {
          best_score = s;
          best_pos = p;
        }
      }
    }
    selected.push_back(remaining[best_pos]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best_pos));
  }
  return selected;
}

inline GradientVector AggBulyan(const GradientSet& gs, std::size_t m) {
  const std::vector<std::size_t> sel = BulyanSelect(gs, m);
  const std::size_t theta = sel.size();
  const std::size_t beta = theta - 2 * m;
  const std::size_t d = gs.front().size();
  GradientVector out(d);
  std::vector<double> col(theta);
  std::vector<double> picked(beta);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < theta; ++i) col[i] = gs[sel[i]][j];
    std::sort(col.begin(), col.end());
    const double med = detail::MedianOfSorted(col);
    std::vector<double> by_gap = col;
    std::stable_sort(by_gap.begin(), by_gap.end(), [&](double a, double b) {
      return std::abs(a - med) < std::abs(b - med);
    });
    picked.assign(by_gap.begin(), by_gap.begin() + beta);
    std::sort(picked.begin(), picked.end());
    double s = 0.0;
    for (double v : picked) s += v;
    out[j] = s / static_cast<double>(beta);
  }
  return out;
}

}  // namespace byzsim
