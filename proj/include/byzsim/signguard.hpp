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
#include <iterator>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "byzsim/aggregators.hpp"
#include "byzsim/clustering.hpp"
#include "byzsim/error.hpp"
#include "byzsim/gradients.hpp"

namespace byzsim {

enum class SignGuardVariant { kPlain, kSim, kDist };

enum class ClusterMethod { kMeanShift, kKMeans2 };

// Reference gradient for the Sim / Dist feature.
enum class ReferencePolicy { kPreviousAggregate, kPairwiseMedian };

struct SignGuardConfig {
  double norm_lower = 0.1;
  double norm_upper = 3.0;
  double coord_ratio = 0.1;
  SignGuardVariant variant = SignGuardVariant::kPlain;
  double bandwidth_quantile = 0.5;
  std::uint64_t seed = 0;
  bool enable_thresholding = true;
  bool enable_clustering = true;
  bool enable_clipping = true;
  ReferencePolicy reference = ReferencePolicy::kPreviousAggregate;
  KernelKind kernel = KernelKind::kFlat;
  ClusterMethod cluster_method = ClusterMethod::kMeanShift;
  double zero_eps = 0.0;
  double mean_shift_tol = 1e-6;
  int mean_shift_max_iter = 300;

  void Validate() const {
    Require(norm_lower > 0.0 && norm_lower <= 1.0 && norm_upper >= 1.0,
            ErrorCode::kInvalidArgument,
            "SignGuardConfig: need 0 < norm_lower <= 1 <= norm_upper");
    Require(coord_ratio > 0.0 && coord_ratio <= 1.0,
            ErrorCode::kInvalidArgument,
            "SignGuardConfig: coord_ratio must be in (0, 1]");
    Require(bandwidth_quantile > 0.0 && bandwidth_quantile <= 1.0,
            ErrorCode::kInvalidArgument,
            "SignGuardConfig: bandwidth_quantile must be in (0, 1]");
    Require(zero_eps >= 0.0, ErrorCode::kInvalidArgument,
            "SignGuardConfig: zero_eps must be >= 0");
  }
};

struct FilterOutcome {
  std::vector<std::size_t> s1;
  std::vector<std::size_t> s2;
  std::vector<std::size_t> trusted;
  double median_norm = 0.0;
  std::vector<FeatureRow> features;
  CoordinateSubset subset;
  double bandwidth = 0.0;
  std::size_t num_clusters = 0;
};

struct NormFilterResult {
  std::vector<std::size_t> s1;
  double median_norm = 0.0;
};

inline NormFilterResult NormFilter(const GradientSet& gs, double lower,
                                   double upper) {
  CheckSameDim(gs, "NormFilter");
  std::vector<double> norms(gs.size());
  for (std::size_t i = 0; i < gs.size(); ++i) norms[i] = L2Norm(gs[i]);
  NormFilterResult r;
  r.median_norm = detail::MedianOf(norms);
  for (std::size_t i = 0; i < gs.size(); ++i) {
    if (r.median_norm == 0.0) {
      if (norms[i] == 0.0) r.s1.push_back(i);
      continue;
    }
    const double ratio = norms[i] / r.median_norm;
    if (ratio >= lower && ratio <= upper) r.s1.push_back(i);
  }
  return r;
}

// The gradient whose median cosine similarity to the others is highest.
inline std::size_t PairwiseMedianReferenceIndex(const GradientSet& gs) {
  CheckSameDim(gs, "PairwiseMedianReference");
  const std::size_t n = gs.size();
  Require(n >= 3, ErrorCode::kInvalidArgument,
          "PairwiseMedianReference: need at least three gradients");
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = L2Norm(gs[i]);
  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double c = 0.0;
      if (norms[i] > 0.0 && norms[j] > 0.0) {
        c = std::clamp(Dot(gs[i], gs[j]) / (norms[i] * norms[j]), -1.0, 1.0);
      }
      sim[i][j] = sim[j][i] = c;
    }
  }
  std::size_t best = 0;
  double best_med = -2.0;
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row.push_back(sim[i][j]);
    }
    const double med = detail::MedianOf(row);
    if (med > best_med) {
      best_med = med;
      best = i;
    }
  }
  return best;
}

inline GradientVector PairwiseMedianReference(const GradientSet& gs) {
  return gs[PairwiseMedianReferenceIndex(gs)];
}

// Per-client feature rows: sign fractions on the subset, plus a similarity or
// distance to the reference for the Sim / Dist variants. Without a previous
// aggregate the reference is the coordinate-wise median (or the pairwise
// median gradient, by policy).
inline std::vector<FeatureRow> BuildFeatures(
    const GradientSet& gs, const CoordinateSubset& subset,
    SignGuardVariant variant, const GradientVector* prev_global,
    double median_norm, ReferencePolicy policy = ReferencePolicy::kPreviousAggregate,
    double zero_eps = 0.0) {
  CheckSameDim(gs, "BuildFeatures");
  GradientVector reference;
  if (variant != SignGuardVariant::kPlain) {
    if (policy == ReferencePolicy::kPairwiseMedian && gs.size() >= 3) {
      reference = PairwiseMedianReference(gs);
    } else if (prev_global != nullptr && !prev_global->empty()) {
      Require(prev_global->size() == gs.front().size(),
              ErrorCode::kDimensionMismatch,
              "BuildFeatures: reference dimension mismatch");
      reference = *prev_global;
    } else {
      reference = AggCoordwiseMedian(gs);
    }
  }
  const double ref_norm = reference.empty() ? 0.0 : L2Norm(reference);
  std::vector<FeatureRow> rows(gs.size());
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const SignStats s = ComputeSignStats(gs[i], &subset, zero_eps);
    rows[i].client_index = i;
    rows[i].values = {s.pos_frac, s.zero_frac, s.neg_frac};
    if (variant == SignGuardVariant::kSim) {
      const double gn = L2Norm(gs[i]);
      double c = 0.0;
      if (gn > 0.0 && ref_norm > 0.0) {
        c = std::clamp(Dot(gs[i], reference) / (gn * ref_norm), -1.0, 1.0);
      }
      rows[i].values.push_back(c);
    } else if (variant == SignGuardVariant::kDist) {
      const double scale = median_norm > 0.0 ? median_norm : 1.0;
      rows[i].values.push_back(Distance(gs[i], reference) / scale);
    }
  }
  return rows;
}

struct SignGuardResult {
  GradientVector global;
  FilterOutcome outcome;
};

// Norm filter, sign clustering, intersection, then the mean of the trusted
// gradients each scaled by min(1, M / ||g||). Disabled stages pass everyone.
// Throws kAllFiltered when nothing survives.
inline SignGuardResult SignGuardAggregate(const GradientSet& gs,
                                          const SignGuardConfig& cfg,
                                          const GradientVector* prev_global) {
  CheckSameDim(gs, "SignGuardAggregate");
  cfg.Validate();
  const std::size_t n = gs.size();
  const std::size_t d = gs.front().size();
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;

  SignGuardResult res;
  FilterOutcome& out = res.outcome;
  const NormFilterResult nf = NormFilter(gs, cfg.norm_lower, cfg.norm_upper);
  out.median_norm = nf.median_norm;
  out.s1 = cfg.enable_thresholding ? nf.s1 : all;

  out.subset = SampleCoordinates(d, cfg.coord_ratio, cfg.seed);
  if (cfg.enable_clustering) {
    out.features = BuildFeatures(gs, out.subset, cfg.variant, prev_global,
                                 nf.median_norm, cfg.reference, cfg.zero_eps);
    if (n == 1) {
      out.s2 = all;
      out.num_clusters = 1;
    } else {
      ClusterAssignment ca;
      if (cfg.cluster_method == ClusterMethod::kKMeans2) {
        ca = KMeans2(out.features, cfg.seed);
      } else {
        out.bandwidth =
            EstimateBandwidth(out.features, cfg.bandwidth_quantile);
        ca = MeanShift(out.features, out.bandwidth, cfg.mean_shift_tol,
                       cfg.mean_shift_max_iter, cfg.kernel);
      }
      out.num_clusters =
          std::set<int>(ca.labels.begin(), ca.labels.end()).size();
      out.s2 = LargestCluster(ca, out.features);
    }
  } else {
    out.s2 = all;
  }

  std::set_intersection(out.s1.begin(), out.s1.end(), out.s2.begin(),
                        out.s2.end(), std::back_inserter(out.trusted));
  if (out.trusted.empty()) {
    Fail(ErrorCode::kAllFiltered, "SignGuardAggregate: all clients filtered");
  }

  res.global.assign(d, 0.0);
  for (std::size_t i : out.trusted) {
    double factor = 1.0;
    if (cfg.enable_clipping) {
      const double gn = L2Norm(gs[i]);
      if (gn > 0.0) factor = std::min(1.0, nf.median_norm / gn);
    }
    for (std::size_t j = 0; j < d; ++j) res.global[j] += factor * gs[i][j];
  }
  const double inv = 1.0 / static_cast<double>(out.trusted.size());
  for (double& v : res.global) v *= inv;
  return res;
}

}  // namespace byzsim
