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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "byzsim/aggregators.hpp"
#include "byzsim/error.hpp"
#include "byzsim/gradients.hpp"
#include "byzsim/signguard.hpp"

namespace byzsim {

enum class DefenseKind {
  kMean,
  kTrMean,
  kMedian,
  kGeoMed,
  kMultiKrum,
  kBulyan,
  kSignGuard,
  kSignGuardSim,
  kSignGuardDist,
};

inline const char* DefenseKindName(DefenseKind k) {
  switch (k) {
    case DefenseKind::kMean: return "mean";
    case DefenseKind::kTrMean: return "trmean";
    case DefenseKind::kMedian: return "median";
    case DefenseKind::kGeoMed: return "geomed";
    case DefenseKind::kMultiKrum: return "multikrum";
    case DefenseKind::kBulyan: return "bulyan";
    case DefenseKind::kSignGuard: return "signguard";
    case DefenseKind::kSignGuardSim: return "signguard-sim";
    case DefenseKind::kSignGuardDist: return "signguard-dist";
  }
  return "unknown";
}

inline bool IsSignGuard(DefenseKind k) {
  return k == DefenseKind::kSignGuard || k == DefenseKind::kSignGuardSim ||
         k == DefenseKind::kSignGuardDist;
}

struct DefenseSpec {
  DefenseKind kind = DefenseKind::kMean;
  // Byzantine count handed to the baselines that need it. SignGuard ignores it.
  std::optional<std::size_t> byz_count_hint;
  std::optional<std::size_t> trim_k;
  std::optional<std::size_t> krum_select;
  double weiszfeld_tol = 1e-7;
  int weiszfeld_max_iter = 1000;
  SignGuardConfig signguard;
};

struct AggregationResult {
  GradientVector global;
  // Clients whose gradients entered the output; every client for rules that
  // do not select.
  std::vector<std::size_t> selected;
  bool fallback = false;
  std::optional<FilterOutcome> filter;
};

// Applies the configured rule. round_seed drives SignGuard's coordinate
// sampling. An empty SignGuard trusted set falls back to the coordinate-wise
// median and sets `fallback`.
inline AggregationResult Aggregate(const DefenseSpec& spec,
                                   const GradientSet& gs,
                                   const GradientVector* prev_global,
                                   std::uint64_t round_seed) {
  CheckSameDim(gs, "Aggregate");
  const std::size_t n = gs.size();
  const std::size_t hint = spec.byz_count_hint.value_or(0);
  Require(2 * hint < n, ErrorCode::kInvalidArgument,
          "Aggregate: byz_count_hint must be below n/2");
  AggregationResult r;
  auto everyone = [&]() {
    r.selected.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.selected[i] = i;
  };
  switch (spec.kind) {
    case DefenseKind::kMean:
      r.global = AggMean(gs);
      everyone();
      break;
    case DefenseKind::kTrMean:
      r.global = AggTrimmedMean(gs, spec.trim_k.value_or(hint));
      everyone();
      break;
    case DefenseKind::kMedian:
      r.global = AggCoordwiseMedian(gs);
      everyone();
      break;
    case DefenseKind::kGeoMed:
      r.global = AggGeoMed(gs, spec.weiszfeld_tol, spec.weiszfeld_max_iter);
      everyone();
      break;
    case DefenseKind::kMultiKrum: {
      r.selected = MultiKrumSelect(gs, hint, spec.krum_select.value_or(n - hint));
      r.global = MeanOfIndices(gs, r.selected);
      std::sort(r.selected.begin(), r.selected.end());
      break;
    }
    case DefenseKind::kBulyan:
      r.global = AggBulyan(gs, hint);
      r.selected = BulyanSelect(gs, hint);
      std::sort(r.selected.begin(), r.selected.end());
      break;
    case DefenseKind::kSignGuard:
    case DefenseKind::kSignGuardSim:
    case DefenseKind::kSignGuardDist: {
      SignGuardConfig cfg = spec.signguard;
      cfg.seed = round_seed;
      cfg.variant = spec.kind == DefenseKind::kSignGuard
                        ? SignGuardVariant::kPlain
                        : (spec.kind == DefenseKind::kSignGuardSim
                               ? SignGuardVariant::kSim
                               : SignGuardVariant::kDist);
      try {
        SignGuardResult sg = SignGuardAggregate(gs, cfg, prev_global);
        r.global = std::move(sg.global);
        r.selected = sg.outcome.trusted;
        r.filter = std::move(sg.outcome);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kAllFiltered) throw;
        r.global = AggCoordwiseMedian(gs);
        r.fallback = true;
      }
      break;
    }
  }
  return r;
}

}  // namespace byzsim
