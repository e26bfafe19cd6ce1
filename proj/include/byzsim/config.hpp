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
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "byzsim/attacks.hpp"
#include "byzsim/defense.hpp"
#include "byzsim/error.hpp"
#include "byzsim/simulation.hpp"

namespace byzsim {

using Json = nlohmann::json;

// One attack x defense combination of a config file.
struct GridCell {
  std::string name;
  ExperimentConfig config;
};

struct RunPlan {
  std::vector<GridCell> cells;
  bool grid = false;  // attack or defense was given as a list
  std::string output_dir = "out";
  std::size_t workers = 1;
  bool baseline = true;
  Json canonical;  // parsed config with defaults resolved, used for hashing
};

namespace detail {

// Reads the members of one JSON object and rejects any key it never asked
// for, so typos surface as errors instead of silently using defaults.
class FieldReader {
 public:
  FieldReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) Fail(ErrorCode::kConfig, path_ + ": expected an object");
  }

  bool Has(const std::string& key) {
    used_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const Json& Raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  std::string Path(const std::string& key) const { return path_ + "." + key; }

  double Number(const std::string& key, double def) {
    if (!Has(key)) return def;
    const Json& v = j_.at(key);
    if (!v.is_number()) Fail(ErrorCode::kConfig, Path(key) + ": expected a number");
    return v.get<double>();
  }

  std::uint64_t Unsigned(const std::string& key, std::uint64_t def) {
    if (!Has(key)) return def;
    const Json& v = j_.at(key);
    if (!v.is_number_unsigned()) {
      Fail(ErrorCode::kConfig, Path(key) + ": expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool Bool(const std::string& key, bool def) {
    if (!Has(key)) return def;
    const Json& v = j_.at(key);
    if (!v.is_boolean()) Fail(ErrorCode::kConfig, Path(key) + ": expected true/false");
    return v.get<bool>();
  }

  std::string String(const std::string& key, const std::string& def) {
    if (!Has(key)) return def;
    const Json& v = j_.at(key);
    if (!v.is_string()) Fail(ErrorCode::kConfig, Path(key) + ": expected a string");
    return v.get<std::string>();
  }

  void Finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) Fail(ErrorCode::kConfig, path_ + ": unknown key '" + k + "'");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename E>
E ParseEnum(const std::string& value, const std::string& path,
            std::initializer_list<std::pair<const char*, E>> table) {
  std::string names;
  for (const auto& [name, e] : table) {
    if (value == name) return e;
    names += names.empty() ? name : std::string(", ") + name;
  }
  Fail(ErrorCode::kConfig, path + ": unknown value '" + value + "' (expected one of " +
                               names + ")");
}

inline AttackKind ParseAttackKind(const std::string& s, const std::string& path) {
  return ParseEnum<AttackKind>(
      s, path,
      {{"none", AttackKind::kNone}, {"random", AttackKind::kRandom},
       {"noise", AttackKind::kNoise}, {"signflip", AttackKind::kSignFlip},
       {"labelflip", AttackKind::kLabelFlip}, {"lie", AttackKind::kLie},
       {"byzmean", AttackKind::kByzMean}, {"minmax", AttackKind::kMinMax},
       {"minsum", AttackKind::kMinSum}});
}

inline DefenseKind ParseDefenseKind(const std::string& s, const std::string& path) {
  return ParseEnum<DefenseKind>(
      s, path,
      {{"mean", DefenseKind::kMean}, {"trmean", DefenseKind::kTrMean},
       {"median", DefenseKind::kMedian}, {"geomed", DefenseKind::kGeoMed},
       {"multikrum", DefenseKind::kMultiKrum}, {"bulyan", DefenseKind::kBulyan},
       {"signguard", DefenseKind::kSignGuard},
       {"signguard-sim", DefenseKind::kSignGuardSim},
       {"signguard-dist", DefenseKind::kSignGuardDist}});
}

inline AttackSpec ParseAttack(const Json& j, const std::string& path,
                              bool allow_byzmean = true) {
  FieldReader r(j, path);
  AttackSpec a;
  a.kind = ParseAttackKind(r.String("kind", "none"), r.Path("kind"));
  if (!allow_byzmean && a.kind == AttackKind::kByzMean) {
    Fail(ErrorCode::kConfig, r.Path("kind") + ": ByzMean cannot be nested");
  }
  a.z = r.Number("z", a.z);
  a.noise_mu = r.Number("noise_mu", a.noise_mu);
  a.noise_sigma = r.Number("noise_sigma", a.noise_sigma);
  a.flip_scale = r.Number("flip_scale", a.flip_scale);
  a.gamma_tol = r.Number("gamma_tol", a.gamma_tol);
  a.perturbation = ParseEnum<PerturbationKind>(
      r.String("perturbation", "inverse_std"), r.Path("perturbation"),
      {{"inverse_std", PerturbationKind::kInverseStd},
       {"inverse_unit", PerturbationKind::kInverseUnit},
       {"inverse_sign", PerturbationKind::kInverseSign}});
  a.lie_estimation = ParseEnum<LieEstimation>(
      r.String("lie_estimation", "benign"), r.Path("lie_estimation"),
      {{"benign", LieEstimation::kBenign},
       {"all_clients", LieEstimation::kAllClients}});
  if (r.Has("inner")) {
    if (a.kind != AttackKind::kByzMean) {
      Fail(ErrorCode::kConfig, r.Path("inner") + ": only ByzMean takes an inner attack");
    }
    a.byzmean_inner = std::make_shared<const AttackSpec>(
        ParseAttack(r.Raw("inner"), r.Path("inner"), false));
  }
  r.Finish();
  if (a.z < 0.0) Fail(ErrorCode::kConfig, r.Path("z") + ": must be >= 0");
  if (a.noise_sigma <= 0.0) Fail(ErrorCode::kConfig, r.Path("noise_sigma") + ": must be > 0");
  if (a.gamma_tol <= 0.0) Fail(ErrorCode::kConfig, r.Path("gamma_tol") + ": must be > 0");
  return a;
}

inline DefenseSpec ParseDefense(const Json& j, const std::string& path) {
  FieldReader r(j, path);
  DefenseSpec d;
  d.kind = ParseDefenseKind(r.String("kind", "mean"), r.Path("kind"));
  if (r.Has("byz_count_hint")) d.byz_count_hint = r.Unsigned("byz_count_hint", 0);
  if (r.Has("trim_k")) d.trim_k = r.Unsigned("trim_k", 0);
  if (r.Has("krum_select")) d.krum_select = r.Unsigned("krum_select", 0);
  d.weiszfeld_tol = r.Number("weiszfeld_tol", d.weiszfeld_tol);
  d.weiszfeld_max_iter = static_cast<int>(r.Unsigned("weiszfeld_max_iter", 1000));
  SignGuardConfig& sg = d.signguard;
  sg.norm_lower = r.Number("norm_lower", sg.norm_lower);
  sg.norm_upper = r.Number("norm_upper", sg.norm_upper);
  sg.coord_ratio = r.Number("coord_ratio", sg.coord_ratio);
  sg.bandwidth_quantile = r.Number("bandwidth_quantile", sg.bandwidth_quantile);
  sg.enable_thresholding = r.Bool("enable_thresholding", sg.enable_thresholding);
  sg.enable_clustering = r.Bool("enable_clustering", sg.enable_clustering);
  sg.enable_clipping = r.Bool("enable_clipping", sg.enable_clipping);
  sg.zero_eps = r.Number("zero_eps", sg.zero_eps);
  sg.kernel = ParseEnum<KernelKind>(r.String("kernel", "flat"), r.Path("kernel"),
                                    {{"flat", KernelKind::kFlat},
                                     {"gaussian", KernelKind::kGaussian}});
  sg.cluster_method = ParseEnum<ClusterMethod>(
      r.String("cluster_method", "mean_shift"), r.Path("cluster_method"),
      {{"mean_shift", ClusterMethod::kMeanShift},
       {"kmeans2", ClusterMethod::kKMeans2}});
  sg.reference = ParseEnum<ReferencePolicy>(
      r.String("reference", "previous"), r.Path("reference"),
      {{"previous", ReferencePolicy::kPreviousAggregate},
       {"pairwise_median", ReferencePolicy::kPairwiseMedian}});
  r.Finish();
  try {
    sg.Validate();
  } catch (const Error& e) {
    Fail(ErrorCode::kConfig, path + ": " + e.what());
  }
  return d;
}

inline DataSource ParseDataset(const Json& j, const std::string& path,
                               std::uint64_t default_seed) {
  FieldReader r(j, path);
  DataSource src;
  const std::string kind = r.String("kind", "synthetic");
  if (kind == "synthetic") {
    SyntheticParams& p = src.synthetic;
    p.d = r.Unsigned("d", p.d);
    p.n_samples = r.Unsigned("n_samples", p.n_samples);
    p.n_classes = static_cast<int>(r.Unsigned("n_classes", 2));
    p.margin = r.Number("margin", p.margin);
    p.informative_std = r.Number("informative_std", p.informative_std);
    p.nuisance_std = r.Number("nuisance_std", p.nuisance_std);
    p.train_fraction = r.Number("train_fraction", p.train_fraction);
    p.seed = r.Unsigned("seed", default_seed);
  } else if (kind == "idx") {
    src.kind = DataSource::Kind::kIdx;
    src.train_images = r.String("train_images", "");
    src.train_labels = r.String("train_labels", "");
    src.test_images = r.String("test_images", "");
    src.test_labels = r.String("test_labels", "");
    for (const std::string* s : {&src.train_images, &src.train_labels,
                                 &src.test_images, &src.test_labels}) {
      if (s->empty()) Fail(ErrorCode::kConfig, path + ": idx needs all four file paths");
    }
  } else {
    Fail(ErrorCode::kConfig, r.Path("kind") + ": expected 'synthetic' or 'idx'");
  }
  r.Finish();
  return src;
}

inline std::string ParseErrorWithLine(const std::string& text,
                                      const nlohmann::json::parse_error& e) {
  std::size_t line = 1;
  const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
  for (std::size_t i = 0; i + 1 < upto; ++i) {
    if (text[i] == '\n') ++line;
  }
  return "line " + std::to_string(line) + ": " + e.what();
}

}  // namespace detail

// Parses a config document. seed_override, when set, replaces
// experiment.seed (and the dataset seed when that was not given explicitly).
inline RunPlan ParseRunPlan(const std::string& text,
                            std::optional<std::uint64_t> seed_override = {}) {
  Json root;
  try {
    root = Json::parse(text, nullptr, /*allow_exceptions=*/true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    Fail(ErrorCode::kConfig, detail::ParseErrorWithLine(text, e));
  }
  detail::FieldReader top(root, "config");
  RunPlan plan;
  if (!top.Has("experiment")) Fail(ErrorCode::kConfig, "config: missing 'experiment'");
  detail::FieldReader ex(top.Raw("experiment"), "experiment");
  ExperimentConfig base;
  base.seed = ex.Unsigned("seed", 0);
  if (seed_override) base.seed = *seed_override;
  base.n_clients = ex.Unsigned("n_clients", base.n_clients);
  base.byz_fraction = ex.Number("byz_fraction", base.byz_fraction);
  base.rounds = ex.Unsigned("rounds", base.rounds);
  base.learning_rate = ex.Number("learning_rate", base.learning_rate);
  base.momentum = ex.Number("momentum", base.momentum);
  base.momentum_placement = detail::ParseEnum<MomentumPlacement>(
      ex.String("momentum_placement", "client"), ex.Path("momentum_placement"),
      {{"client", MomentumPlacement::kClient}, {"server", MomentumPlacement::kServer}});
  base.weight_decay = ex.Number("weight_decay", base.weight_decay);
  base.batch_size = ex.Unsigned("batch_size", base.batch_size);
  if (ex.Has("noniid_s")) base.noniid_s = ex.Number("noniid_s", 1.0);
  base.attack_period = ex.Unsigned("attack_period", 0);
  plan.baseline = ex.Bool("baseline", true);
  if (ex.Has("model")) {
    detail::FieldReader mr(ex.Raw("model"), "experiment.model");
    base.model.kind = detail::ParseEnum<ModelKind>(
        mr.String("kind", "logreg"), mr.Path("kind"),
        {{"logreg", ModelKind::kLogisticRegression}, {"mlp", ModelKind::kMlp}});
    if (mr.Has("hidden")) {
      const Json& h = mr.Raw("hidden");
      if (!h.is_array()) Fail(ErrorCode::kConfig, mr.Path("hidden") + ": expected a list");
      for (const auto& w : h) {
        if (!w.is_number_unsigned()) {
          Fail(ErrorCode::kConfig, mr.Path("hidden") + ": expected positive integers");
        }
        base.model.hidden.push_back(w.get<std::size_t>());
      }
    }
    mr.Finish();
  }
  if (ex.Has("time_varying_attacks")) {
    const Json& list = ex.Raw("time_varying_attacks");
    if (!list.is_array() || list.empty()) {
      Fail(ErrorCode::kConfig, "experiment.time_varying_attacks: expected a non-empty list");
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
      base.time_varying_attacks.push_back(detail::ParseAttack(
          list[i], "experiment.time_varying_attacks[" + std::to_string(i) + "]"));
    }
  }
  ex.Finish();

  const std::uint64_t data_seed = DeriveSeed(base.seed, {stream::kData});
  if (top.Has("dataset")) {
    base.dataset = detail::ParseDataset(top.Raw("dataset"), "dataset", data_seed);
  } else {
    base.dataset.synthetic.seed = data_seed;
  }

  auto as_list = [&](const char* key, auto parse, auto def) {
    using T = decltype(def);
    std::vector<std::pair<std::string, T>> out;
    if (!top.Has(key)) {
      out.emplace_back("", def);
      return out;
    }
    const Json& v = top.Raw(key);
    if (v.is_array()) {
      plan.grid = true;
      if (v.empty()) Fail(ErrorCode::kConfig, std::string(key) + ": empty list");
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.emplace_back("", parse(v[i], std::string(key) + "[" + std::to_string(i) + "]"));
      }
    } else {
      out.emplace_back("", parse(v, key));
    }
    return out;
  };
  const auto attacks = as_list(
      "attack", [](const Json& j, const std::string& p) { return detail::ParseAttack(j, p); },
      AttackSpec{});
  const auto defenses = as_list(
      "defense", [](const Json& j, const std::string& p) { return detail::ParseDefense(j, p); },
      DefenseSpec{});

  if (top.Has("output")) {
    detail::FieldReader out(top.Raw("output"), "output");
    plan.output_dir = out.String("dir", plan.output_dir);
    plan.workers = std::max<std::uint64_t>(1, out.Unsigned("workers", 1));
    out.Finish();
  }
  top.Finish();

  std::set<std::string> names;
  for (const auto& [_, a] : attacks) {
    for (const auto& [__, d] : defenses) {
      GridCell cell;
      cell.config = base;
      cell.config.attack = a;
      cell.config.defense = d;
      std::string name = std::string(AttackKindName(a.kind)) + "__" + DefenseKindName(d.kind);
      // Repeated kinds in a sweep get a numeric suffix.
      std::string unique = name;
      for (int k = 2; names.count(unique); ++k) unique = name + "_" + std::to_string(k);
      names.insert(unique);
      cell.name = unique;
      try {
        cell.config.Validate();
      } catch (const Error& e) {
        Fail(ErrorCode::kConfig, e.what());
      }
      plan.cells.push_back(std::move(cell));
    }
  }
  root["experiment"]["seed"] = base.seed;
  plan.canonical = root;
  return plan;
}

inline std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline RunPlan LoadRunPlan(const std::string& path,
                           std::optional<std::uint64_t> seed_override = {}) {
  return ParseRunPlan(ReadTextFile(path), seed_override);
}

// 64-bit FNV-1a of the canonical (sorted-key, compact) JSON dump.
inline std::uint64_t ConfigHash(const Json& canonical) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string HexHash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace byzsim
