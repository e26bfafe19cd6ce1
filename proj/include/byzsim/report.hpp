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

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "byzsim/analysis.hpp"
#include "byzsim/error.hpp"
#include "byzsim/simulation.hpp"

namespace byzsim {

// Shortest round-trip decimal form, fixed across platforms.
inline std::string FormatReal(double v) {
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline constexpr const char* kRoundsCsvHeader =
    "round,attack,honest_selected_rate,malicious_selected_rate,train_loss,"
    "full_grad_norm_sq,test_accuracy,global_grad_norm,honest_pos,honest_neg,"
    "honest_zero,mal_pos,mal_neg,mal_zero,fallback,num_clusters,selected";

inline constexpr const char* kSignTraceCsvHeader =
    "round,honest_pos,honest_neg,honest_zero,mal_pos,mal_neg,mal_zero";

namespace detail {

inline void AppendSigns(std::string& s, const std::optional<SignStats>& st) {
  if (st) {
    s += FormatReal(st->pos_frac) + "," + FormatReal(st->neg_frac) + "," +
         FormatReal(st->zero_frac);
  } else {
    s += ",,";
  }
}

}  // namespace detail

// Malicious sign columns stay empty in rounds without an attack; `selected`
// lists client ids separated by ';'.
inline std::string RoundsCsv(const std::vector<RoundReport>& rounds) {
  std::string s = std::string(kRoundsCsvHeader) + "\n";
  for (const auto& r : rounds) {
    s += std::to_string(r.round) + "," + AttackKindName(r.attack) + "," +
         FormatReal(r.honest_selected_rate) + "," +
         FormatReal(r.malicious_selected_rate) + "," + FormatReal(r.train_loss) +
         "," + FormatReal(r.full_grad_norm_sq) + "," +
         FormatReal(r.test_accuracy) + "," + FormatReal(r.global_grad_norm) + ",";
    detail::AppendSigns(s, r.honest_signs);
    s += ",";
    detail::AppendSigns(s, r.malicious_signs);
    s += std::string(",") + (r.fallback ? "1" : "0") + "," +
         std::to_string(r.num_clusters) + ",";
    for (std::size_t k = 0; k < r.selected.size(); ++k) {
      if (k) s += ";";
      s += std::to_string(r.selected[k]);
    }
    s += "\n";
  }
  return s;
}

inline std::string SignTraceCsv(const std::vector<SignTraceRow>& rows) {
  std::string s = std::string(kSignTraceCsvHeader) + "\n";
  for (const auto& r : rows) {
    s += std::to_string(r.round) + ",";
    detail::AppendSigns(s, r.honest);
    s += ",";
    detail::AppendSigns(s, r.malicious);
    s += "\n";
  }
  return s;
}

inline nlohmann::json SummaryJson(const ExperimentSummary& s,
                                  const ExperimentConfig& cfg,
                                  const std::string& cell) {
  nlohmann::json j;
  j["cell"] = cell;
  j["attack"] = AttackKindName(cfg.attack.kind);
  j["defense"] = DefenseKindName(cfg.defense.kind);
  j["seed"] = cfg.seed;
  j["rounds"] = s.rounds;
  j["byzantine_clients"] = cfg.ByzantineCount();
  j["best_accuracy"] = s.best_accuracy;
  j["final_accuracy"] = s.final_accuracy;
  j["mean_honest_selected_rate"] = s.mean_honest_selected_rate;
  j["mean_malicious_selected_rate"] = s.mean_malicious_selected_rate;
  j["fallback_rounds"] = s.fallback_rounds;
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  j["baseline_best_accuracy"] = opt(s.baseline_best_accuracy);
  j["baseline_final_accuracy"] = opt(s.baseline_final_accuracy);
  j["attack_impact_best"] = opt(s.attack_impact_best);
  j["attack_impact_final"] = opt(s.attack_impact_final);
  return j;
}

// Writes through a temporary file and renames it into place.
inline void WriteFileAtomic(const std::filesystem::path& path,
                            const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorCode::kIo, "cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) Fail(ErrorCode::kIo, "write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

// First unused <root>/<prefix>-<k> directory, created.
inline std::filesystem::path FreshDirectory(const std::filesystem::path& root,
                                            const std::string& prefix) {
  std::filesystem::create_directories(root);
  for (int k = 0;; ++k) {
    const auto dir = root / (prefix + "-" + std::to_string(k));
    if (std::filesystem::create_directory(dir)) return dir;
  }
}

}  // namespace byzsim
