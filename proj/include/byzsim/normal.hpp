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

#include <cmath>
#include <numbers>

#include "byzsim/error.hpp"

namespace byzsim {

inline double NormalCdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

// Inverse of NormalCdf by bisection. Returns the largest bracket point z with
// NormalCdf(z) < p; the bracket is shrunk below abs_tol.
inline double NormalQuantile(double p, double abs_tol = 1e-12) {
  Require(p > 0.0 && p < 1.0, ErrorCode::kInvalidArgument,
          "NormalQuantile: probability must lie in (0, 1)");
  double lo = -40.0;
  double hi = 40.0;
  while (hi - lo > abs_tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (NormalCdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace byzsim
