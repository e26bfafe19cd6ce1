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
#include <memory>
#include <string>
#include <vector>

#include "byzsim/error.hpp"
#include "byzsim/gradients.hpp"
#include "byzsim/normal.hpp"
#include "byzsim/rng.hpp"

namespace byzsim {

enum class AttackKind {
  kNone,
  kRandom,
  kNoise,
  kSignFlip,
  kLabelFlip,
  kLie,
  kByzMean,
  kMinMax,
  kMinSum,
};

inline const char* AttackKindName(AttackKind k) {
  switch (k) {
    case AttackKind::kNone: return "none";
    case AttackKind::kRandom: return "random";
    case AttackKind::kNoise: return "noise";
    case AttackKind::kSignFlip: return "signflip";
    case AttackKind::kLabelFlip: return "labelflip";
    case AttackKind::kLie: return "lie";
    case AttackKind::kByzMean: return "byzmean";
    case AttackKind::kMinMax: return "minmax";
    case AttackKind::kMinSum: return "minsum";
  }
  return "unknown";
}

// Direction added to the honest average by the Min-Max / Min-Sum searches.
enum class PerturbationKind { kInverseStd, kInverseUnit, kInverseSign };

// Which gradients the LIE attacker uses to estimate mean and std.
enum class LieEstimation { kBenign, kAllClients };

struct AttackSpec {
  AttackKind kind = AttackKind::kNone;
  double z = 0.3;
  double noise_mu = 0.0;
  double noise_sigma = 0.5;
  double flip_scale = 1.0;
  double gamma_tol = 1e-6;
  PerturbationKind perturbation = PerturbationKind::kInverseStd;
  LieEstimation lie_estimation = LieEstimation::kBenign;
  // Attack that produces the first ByzMean group's vector. Null means LIE
  // with this AttackSpec's z.
  std::shared_ptr<const AttackSpec> byzmean_inner;
};

// What the omniscient attacker sees in one round.
struct AttackContext {
  GradientSet honest;  // the n - m benign submissions
  GradientSet own;     // optional: what each Byzantine client would honestly send
  std::size_t n = 0;
  std::size_t m = 0;
};

inline void ValidateContext(const AttackContext& ctx) {
  Require(ctx.n > 0, ErrorCode::kInvalidArgument, "attack: n must be positive");
  Require(2 * ctx.m < ctx.n, ErrorCode::kInvalidArgument,
          "attack: Byzantine count must be below n/2");
  Require(ctx.honest.size() == ctx.n - ctx.m, ErrorCode::kInvalidArgument,
          "attack: expected n - m honest gradients");
  CheckSameDim(ctx.honest, "attack");
  if (!ctx.own.empty()) {
    Require(ctx.own.size() == ctx.m, ErrorCode::kInvalidArgument,
            "attack: expected m own gradients");
    for (const auto& g : ctx.own) {
      Require(g.size() == ctx.honest.front().size(),
              ErrorCode::kDimensionMismatch, "attack: own gradient dimension");
    }
  }
}

// Element-wise mean - z * std.
inline GradientVector LieFromStats(GradientSpan mu, GradientSpan sigma,
                                   double z) {
  Require(mu.size() == sigma.size(), ErrorCode::kDimensionMismatch,
          "LieFromStats: dimension mismatch");
  GradientVector g(mu.size());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = mu[j] - z * sigma[j];
  return g;
}

inline GradientVector CraftLie(const AttackContext& ctx, double z,
                               LieEstimation est = LieEstimation::kBenign) {
  ValidateContext(ctx);
  Require(z >= 0.0, ErrorCode::kInvalidArgument, "CraftLie: z must be >= 0");
  if (est == LieEstimation::kBenign) {
    Require(ctx.honest.size() >= 2, ErrorCode::kInvalidArgument,
            "CraftLie: need at least two honest gradients");
    return LieFromStats(Mean(ctx.honest), CoordwiseStd(ctx.honest), z);
  }
  Require(ctx.own.size() == ctx.m, ErrorCode::kInvalidArgument,
          "CraftLie: all-client estimation needs the Byzantine clients' own "
          "gradients");
  GradientSet all = ctx.honest;
  all.insert(all.end(), ctx.own.begin(), ctx.own.end());
  Require(all.size() >= 2, ErrorCode::kInvalidArgument,
          "CraftLie: need at least two gradients");
  return LieFromStats(Mean(all), CoordwiseStd(all), z);
}

// Largest z that keeps the crafted vector inside the majority's spread.
inline double LieZMax(std::size_t n, std::size_t m) {
  Require(m > 0 && m < n, ErrorCode::kInvalidArgument,
          "LieZMax: need 0 < m < n");
  const double s = static_cast<double>(n / 2 + 1);
  const double ratio =
      (static_cast<double>(n) - s) / static_cast<double>(n - m);
  Require(ratio > 0.0 && ratio < 1.0, ErrorCode::kInvalidArgument,
          "LieZMax: quantile argument outside (0, 1)");
  return NormalQuantile(ratio);
}

inline GradientVector CraftRandom(std::size_t d, double mu, double sigma,
                                  std::uint64_t seed) {
  Require(sigma > 0.0, ErrorCode::kInvalidArgument,
          "CraftRandom: sigma must be positive");
  Rng rng(seed);
  GradientVector g(d);
  for (double& v : g) v = rng.Normal(mu, sigma);
  return g;
}

inline GradientVector CraftNoise(GradientSpan honest_g, double mu,
                                 double sigma, std::uint64_t seed) {
  Require(sigma >= 0.0, ErrorCode::kInvalidArgument,
          "CraftNoise: sigma must be non-negative");
  Rng rng(seed);
  GradientVector g(honest_g.begin(), honest_g.end());
  for (double& v : g) v += rng.Normal(mu, sigma);
  return g;
}

inline GradientVector CraftSignFlip(GradientSpan honest_g, double r = 1.0) {
  return Scaled(honest_g, -r);
}

inline GradientVector DefaultPerturbation(const GradientSet& honest,
                                          PerturbationKind kind) {
  const GradientVector mu = Mean(honest);
  GradientVector p(mu.size());
  switch (kind) {
    case PerturbationKind::kInverseStd: {
      Require(honest.size() >= 2, ErrorCode::kInvalidArgument,
              "perturbation: std needs two gradients");
      p = Scaled(CoordwiseStd(honest), -1.0);
      break;
    }
    case PerturbationKind::kInverseUnit: {
      const double nrm = L2Norm(mu);
      Require(nrm > 0.0, ErrorCode::kInvalidArgument,
              "perturbation: zero honest mean");
      p = Scaled(mu, -1.0 / nrm);
      break;
    }
    case PerturbationKind::kInverseSign: {
      for (std::size_t j = 0; j < mu.size(); ++j) {
        p[j] = mu[j] > 0.0 ? -1.0 : (mu[j] < 0.0 ? 1.0 : 0.0);
      }
      break;
    }
  }
  return p;
}

namespace detail {

// Largest gamma in [0, inf) with feasible(gamma), assuming the feasible set is
// an interval starting at 0. Doubling from 1e-6 brackets it, bisection
// narrows it to a relative width of tol. Returns the feasible end.
template <typename Feasible>
double SearchGamma(Feasible feasible, double tol, const char* who) {
  Require(tol > 0.0, ErrorCode::kInvalidArgument,
          std::string(who) + ": tolerance must be positive");
  double lo = 0.0;
  double hi = 1e-6;
  int doublings = 0;
  while (feasible(hi)) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 64) {
      Fail(ErrorCode::kBracketFailed,
           std::string(who) + ": constraint never became active");
    }
  }
  for (int it = 0; it < 2000; ++it) {
    if (lo > 0.0 && hi - lo <= tol * lo) break;
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (feasible(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

inline GradientVector Shifted(GradientSpan base, GradientSpan dir,
                              double gamma) {
  GradientVector g(base.begin(), base.end());
  Axpy(gamma, dir, g);
  return g;
}

}  // namespace detail

// max_i ||g - g_i|| over honest i.
inline double MinMaxObjective(const GradientSet& honest, GradientSpan g) {
  double best = 0.0;
  for (const auto& h : honest) best = std::max(best, Distance(g, h));
  return best;
}

inline double MinMaxBudget(const GradientSet& honest) {
  double best = 0.0;
  for (std::size_t i = 0; i < honest.size(); ++i) {
    for (std::size_t j = i + 1; j < honest.size(); ++j) {
      best = std::max(best, Distance(honest[i], honest[j]));
    }
  }
  return best;
}

// sum_i ||g - g_i||^2 over honest i.
inline double MinSumObjective(const GradientSet& honest, GradientSpan g) {
  double s = 0.0;
  for (const auto& h : honest) s += SquaredDistance(g, h);
  return s;
}

inline double MinSumBudget(const GradientSet& honest) {
  double best = 0.0;
  for (const auto& a : honest) best = std::max(best, MinSumObjective(honest, a));
  return best;
}

inline GradientVector CraftMinMax(const AttackContext& ctx,
                                  GradientSpan perturbation, double tol) {
  ValidateContext(ctx);
  Require(perturbation.size() == ctx.honest.front().size(),
          ErrorCode::kDimensionMismatch, "CraftMinMax: perturbation dimension");
  Require(L2Norm(perturbation) > 0.0, ErrorCode::kInvalidArgument,
          "CraftMinMax: zero perturbation");
  const GradientVector avg = Mean(ctx.honest);
  const double budget = MinMaxBudget(ctx.honest);
  const double gamma = detail::SearchGamma(
      [&](double g) {
        return MinMaxObjective(ctx.honest,
                               detail::Shifted(avg, perturbation, g)) <= budget;
      },
      tol, "CraftMinMax");
  return detail::Shifted(avg, perturbation, gamma);
}

inline GradientVector CraftMinSum(const AttackContext& ctx,
                                  GradientSpan perturbation, double tol) {
  ValidateContext(ctx);
  Require(perturbation.size() == ctx.honest.front().size(),
          ErrorCode::kDimensionMismatch, "CraftMinSum: perturbation dimension");
  Require(L2Norm(perturbation) > 0.0, ErrorCode::kInvalidArgument,
          "CraftMinSum: zero perturbation");
  const GradientVector avg = Mean(ctx.honest);
  const double budget = MinSumBudget(ctx.honest);
  const double gamma = detail::SearchGamma(
      [&](double g) {
        return MinSumObjective(ctx.honest,
                               detail::Shifted(avg, perturbation, g)) <= budget;
      },
      tol, "CraftMinSum");
  return detail::Shifted(avg, perturbation, gamma);
}

struct ByzMeanResult {
  GradientVector g_m1;
  GradientVector g_m2;
  std::size_t m1 = 0;
  std::size_t m2 = 0;
};

inline GradientVector CraftSingle(const AttackSpec& spec,
                                  const AttackContext& ctx,
                                  std::uint64_t seed);

// Splits the Byzantine clients so that the mean over all n submissions lands
// exactly on g_m1.
inline ByzMeanResult CraftByzMean(const AttackContext& ctx,
                                  const AttackSpec& inner,
                                  std::uint64_t seed) {
  ValidateContext(ctx);
  Require(ctx.m >= 2, ErrorCode::kInvalidArgument,
          "CraftByzMean: need at least two Byzantine clients");
  Require(inner.kind != AttackKind::kByzMean, ErrorCode::kInvalidArgument,
          "CraftByzMean: inner attack cannot be ByzMean");
  ByzMeanResult r;
  r.m1 = ctx.m / 2;
  r.m2 = ctx.m - r.m1;
  Require(r.m2 > 0, ErrorCode::kInvalidArgument, "CraftByzMean: m2 == 0");
  r.g_m1 = CraftSingle(inner, ctx, seed);
  const std::size_t d = r.g_m1.size();
  GradientVector honest_sum(d, 0.0);
  for (const auto& h : ctx.honest) {
    for (std::size_t j = 0; j < d; ++j) honest_sum[j] += h[j];
  }
  const double a = static_cast<double>(ctx.n - r.m1);
  const double inv_m2 = 1.0 / static_cast<double>(r.m2);
  r.g_m2.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    r.g_m2[j] = (a * r.g_m1[j] - honest_sum[j]) * inv_m2;
  }
  // Identity check, relative to the magnitudes involved.
  const double n = static_cast<double>(ctx.n);
  for (std::size_t j = 0; j < d; ++j) {
    const double total = honest_sum[j] + static_cast<double>(r.m1) * r.g_m1[j] +
                         static_cast<double>(r.m2) * r.g_m2[j];
    const double scale =
        1.0 + std::abs(r.g_m1[j]) + std::abs(honest_sum[j]) / n;
    if (std::abs(total / n - r.g_m1[j]) > 1e-9 * scale) {
      Fail(ErrorCode::kInvalidArgument,
           "CraftByzMean: mean identity violated (non-finite input?)");
    }
  }
  return r;
}

// One vector of the given attack, used both directly and as ByzMean's inner
// attack. Attacks that transform a client's own gradient fall back to the
// honest mean when no own gradient is supplied.
inline GradientVector CraftSingle(const AttackSpec& spec,
                                  const AttackContext& ctx,
                                  std::uint64_t seed) {
  ValidateContext(ctx);
  const std::size_t d = ctx.honest.front().size();
  auto base = [&]() {
    return ctx.own.empty() ? Mean(ctx.honest) : ctx.own.front();
  };
  switch (spec.kind) {
    case AttackKind::kLie:
      return CraftLie(ctx, spec.z, spec.lie_estimation);
    case AttackKind::kRandom:
      return CraftRandom(d, spec.noise_mu, spec.noise_sigma, seed);
    case AttackKind::kNoise:
      return CraftNoise(base(), spec.noise_mu, spec.noise_sigma, seed);
    case AttackKind::kSignFlip:
      return CraftSignFlip(base(), spec.flip_scale);
    case AttackKind::kMinMax:
      return CraftMinMax(ctx, DefaultPerturbation(ctx.honest, spec.perturbation),
                         spec.gamma_tol);
    case AttackKind::kMinSum:
      return CraftMinSum(ctx, DefaultPerturbation(ctx.honest, spec.perturbation),
                         spec.gamma_tol);
    default:
      Fail(ErrorCode::kInvalidArgument,
           std::string("CraftSingle: attack '") + AttackKindName(spec.kind) +
               "' does not produce a single vector");
  }
}

// The m submissions of the Byzantine clients, in client order. For None and
// LabelFlip the attack lives outside gradient crafting, so the clients' own
// gradients are passed through.
inline GradientSet CraftAttack(const AttackSpec& spec, const AttackContext& ctx,
                               std::uint64_t seed) {
  ValidateContext(ctx);
  GradientSet out;
  if (ctx.m == 0) return out;
  auto need_own = [&]() {
    Require(ctx.own.size() == ctx.m, ErrorCode::kInvalidArgument,
            std::string("CraftAttack: '") + AttackKindName(spec.kind) +
                "' needs the Byzantine clients' own gradients");
  };
  const std::size_t d = ctx.honest.front().size();
  switch (spec.kind) {
    case AttackKind::kNone:
    case AttackKind::kLabelFlip:
      need_own();
      return ctx.own;
    case AttackKind::kRandom:
      for (std::size_t i = 0; i < ctx.m; ++i) {
        out.push_back(CraftRandom(d, spec.noise_mu, spec.noise_sigma,
                                  DeriveSeed(seed, {i})));
      }
      return out;
    case AttackKind::kNoise:
      need_own();
      for (std::size_t i = 0; i < ctx.m; ++i) {
        out.push_back(CraftNoise(ctx.own[i], spec.noise_mu, spec.noise_sigma,
                                 DeriveSeed(seed, {i})));
      }
      return out;
    case AttackKind::kSignFlip:
      need_own();
      for (const auto& g : ctx.own) out.push_back(CraftSignFlip(g, spec.flip_scale));
      return out;
    case AttackKind::kByzMean: {
      AttackSpec inner;
      if (spec.byzmean_inner) {
        inner = *spec.byzmean_inner;
      } else {
        inner.kind = AttackKind::kLie;
        inner.z = spec.z;
        inner.lie_estimation = spec.lie_estimation;
      }
      const ByzMeanResult r = CraftByzMean(ctx, inner, seed);
      out.assign(r.m1, r.g_m1);
      out.insert(out.end(), r.m2, r.g_m2);
      return out;
    }
    case AttackKind::kLie:
    case AttackKind::kMinMax:
    case AttackKind::kMinSum:
      out.assign(ctx.m, CraftSingle(spec, ctx, seed));
      return out;
  }
  return out;
}

}  // namespace byzsim
