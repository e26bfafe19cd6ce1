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
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "byzsim/attacks.hpp"
#include "byzsim/datasets.hpp"
#include "byzsim/defense.hpp"
#include "byzsim/error.hpp"
#include "byzsim/gradients.hpp"
#include "byzsim/models.hpp"
#include "byzsim/rng.hpp"

namespace byzsim {

enum class ModelKind { kLogisticRegression, kMlp };

struct ModelSpec {
  ModelKind kind = ModelKind::kLogisticRegression;
  std::vector<std::size_t> hidden;
};

inline std::unique_ptr<Model> MakeModel(const ModelSpec& spec, std::size_t d_in,
                                        int n_classes) {
  if (spec.kind == ModelKind::kMlp) {
    return std::make_unique<Mlp>(d_in, spec.hidden, n_classes);
  }
  return std::make_unique<LogisticRegression>(d_in, n_classes);
}

struct DataSource {
  enum class Kind { kSynthetic, kIdx };
  Kind kind = Kind::kSynthetic;
  SyntheticParams synthetic;
  std::string train_images, train_labels, test_images, test_labels;
};

inline DatasetSplit LoadData(const DataSource& src) {
  DatasetSplit split;
  if (src.kind == DataSource::Kind::kSynthetic) {
    split = MakeSyntheticDataset(src.synthetic);
  } else {
    split.train = ReadIdx(src.train_images, src.train_labels);
    split.test = ReadIdx(src.test_images, src.test_labels);
    const int c = std::max(split.train.n_classes, split.test.n_classes);
    split.train.n_classes = split.test.n_classes = c;
    Require(split.train.d_in == split.test.d_in, ErrorCode::kDimensionMismatch,
            "LoadData: train and test image sizes differ");
  }
  split.train.Validate();
  split.test.Validate();
  return split;
}

// Where the 0.9 momentum is kept: per client on the submitted update, or on
// the server over aggregated gradients.
enum class MomentumPlacement { kClient, kServer };

struct ExperimentConfig {
  std::size_t n_clients = 50;
  double byz_fraction = 0.2;
  AttackSpec attack;
  DefenseSpec defense;
  ModelSpec model;
  DataSource dataset;
  std::size_t rounds = 100;
  double learning_rate = 0.1;
  double momentum = 0.9;
  MomentumPlacement momentum_placement = MomentumPlacement::kClient;
  double weight_decay = 5e-4;
  std::size_t batch_size = 32;
  std::optional<double> noniid_s;
  std::uint64_t seed = 0;
  // When non-empty, each epoch draws its attack uniformly from this list.
  std::vector<AttackSpec> time_varying_attacks;
  // Rounds per attack epoch; 0 means one pass over an average shard.
  std::size_t attack_period = 0;

  std::size_t ByzantineCount() const {
    return static_cast<std::size_t>(
        std::floor(byz_fraction * static_cast<double>(n_clients) + 1e-9));
  }

  void Validate() const {
    Require(n_clients >= 1, ErrorCode::kConfig, "experiment: n_clients >= 1");
    Require(byz_fraction >= 0.0 && byz_fraction < 0.5, ErrorCode::kConfig,
            "experiment: byz_fraction must be in [0, 0.5)");
    Require(learning_rate > 0.0, ErrorCode::kConfig,
            "experiment: learning_rate must be positive");
    Require(rounds >= 1, ErrorCode::kConfig, "experiment: rounds >= 1");
    Require(batch_size >= 1, ErrorCode::kConfig, "experiment: batch_size >= 1");
    Require(momentum >= 0.0 && momentum < 1.0, ErrorCode::kConfig,
            "experiment: momentum must be in [0, 1)");
    Require(weight_decay >= 0.0, ErrorCode::kConfig,
            "experiment: weight_decay must be >= 0");
    if (noniid_s) {
      Require(*noniid_s >= 0.0 && *noniid_s <= 1.0, ErrorCode::kConfig,
              "experiment: noniid_s must be in [0, 1]");
    }
    if (defense.byz_count_hint) {
      Require(2 * *defense.byz_count_hint < n_clients, ErrorCode::kConfig,
              "defense: byz_count_hint must be below n/2");
    }
    defense.signguard.Validate();
  }
};

// Splits sample indices across n clients. A fraction s is dealt uniformly at
// random; the rest is sorted by label and cut into 2n shards whose sizes top
// every client up to its balanced share, and each client receives two shards
// at random positions of the sorted order. s absent means fully IID.
inline std::vector<std::vector<std::size_t>> PartitionData(
    const std::vector<int>& labels, std::size_t n, std::optional<double> s,
    std::uint64_t seed) {
  const std::size_t total = labels.size();
  Require(n >= 1, ErrorCode::kInvalidArgument, "PartitionData: n >= 1");
  Require(total >= n, ErrorCode::kInvalidArgument,
          "PartitionData: fewer samples than clients");
  const double frac = s.value_or(1.0);
  Require(frac >= 0.0 && frac <= 1.0, ErrorCode::kInvalidArgument,
          "PartitionData: s must be in [0, 1]");
  Rng rng(seed);
  std::vector<std::size_t> perm(total);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = total - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.UniformInt(i + 1)]);
  }
  const std::size_t n_iid = std::min<std::size_t>(
      total, static_cast<std::size_t>(std::llround(frac * static_cast<double>(total))));
  std::vector<std::vector<std::size_t>> shards(n);
  for (std::size_t k = 0; k < n_iid; ++k) shards[k % n].push_back(perm[k]);

  std::vector<std::size_t> rest(perm.begin() + static_cast<std::ptrdiff_t>(n_iid),
                                perm.end());
  if (!rest.empty()) {
    std::sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) {
      return labels[a] != labels[b] ? labels[a] < labels[b] : a < b;
    });
    std::vector<std::size_t> slot_size(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t target = total / n + (i < total % n ? 1 : 0);
      const std::size_t need = target - shards[i].size();
      slot_size[2 * i] = need / 2;
      slot_size[2 * i + 1] = need - need / 2;
    }
    std::vector<std::size_t> order(2 * n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[rng.UniformInt(i + 1)]);
    }
    std::size_t pos = 0;
    for (std::size_t slot : order) {
      auto& dst = shards[slot / 2];
      for (std::size_t k = 0; k < slot_size[slot]; ++k) dst.push_back(rest[pos++]);
    }
  }
  for (auto& sh : shards) std::sort(sh.begin(), sh.end());
  return shards;
}

struct RoundReport {
  std::size_t round = 0;
  AttackKind attack = AttackKind::kNone;
  std::vector<std::size_t> selected;
  double honest_selected_rate = 0.0;
  double malicious_selected_rate = 0.0;
  // Full training-set loss and squared gradient norm at the round's starting
  // point; test accuracy after the round's update.
  double train_loss = 0.0;
  double full_grad_norm_sq = 0.0;
  double test_accuracy = 0.0;
  double global_grad_norm = 0.0;
  double update_residual = 0.0;
  SignStats honest_signs;
  std::optional<SignStats> malicious_signs;
  bool fallback = false;
  std::size_t num_clusters = 0;
};

struct ExperimentSummary {
  std::size_t rounds = 0;
  double best_accuracy = 0.0;
  double final_accuracy = 0.0;
  double mean_honest_selected_rate = 0.0;
  double mean_malicious_selected_rate = 0.0;
  std::size_t fallback_rounds = 0;
  std::optional<double> baseline_best_accuracy;
  std::optional<double> baseline_final_accuracy;
  // Accuracy drop against the no-attack Mean run with the same seed.
  std::optional<double> attack_impact_best;
  std::optional<double> attack_impact_final;
};

namespace stream {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kPartition = 2;
inline constexpr std::uint64_t kBatch = 3;
inline constexpr std::uint64_t kAttack = 4;
inline constexpr std::uint64_t kDefense = 5;
inline constexpr std::uint64_t kSchedule = 6;
inline constexpr std::uint64_t kInit = 7;
}  // namespace stream

inline SignStats AverageSignStats(const GradientSet& gs) {
  SignStats acc;
  for (const auto& g : gs) {
    const SignStats s = ComputeSignStats(g);
    acc.pos_frac += s.pos_frac;
    acc.neg_frac += s.neg_frac;
    acc.zero_frac += s.zero_frac;
  }
  const double inv = 1.0 / static_cast<double>(gs.size());
  acc.pos_frac *= inv;
  acc.neg_frac *= inv;
  acc.zero_frac *= inv;
  return acc;
}

// Synchronous training loop. Clients 0..m-1 are Byzantine.
class Simulation {
 public:
  explicit Simulation(ExperimentConfig cfg)
      : Simulation(cfg, LoadData(cfg.dataset)) {}

  Simulation(ExperimentConfig cfg, DatasetSplit data)
      : cfg_(std::move(cfg)), data_(std::move(data)) {
    cfg_.Validate();
    m_ = cfg_.ByzantineCount();
    if (!cfg_.defense.byz_count_hint) cfg_.defense.byz_count_hint = m_;
    model_ = MakeModel(cfg_.model, data_.train.d_in, data_.train.n_classes);
    params_ = model_->InitParams(DeriveSeed(cfg_.seed, {stream::kInit}));
    shards_ = PartitionData(data_.train.labels, cfg_.n_clients, cfg_.noniid_s,
                            DeriveSeed(cfg_.seed, {stream::kPartition}));
    client_momentum_.assign(cfg_.n_clients, GradientVector(params_.size(), 0.0));
    server_momentum_.assign(params_.size(), 0.0);
    period_ = cfg_.attack_period;
    if (period_ == 0) {
      const double avg = static_cast<double>(data_.train.size()) /
                         static_cast<double>(cfg_.n_clients);
      period_ = std::max<std::size_t>(
          1, static_cast<std::size_t>(
                 std::ceil(avg / static_cast<double>(cfg_.batch_size))));
    }
  }

  const ExperimentConfig& config() const { return cfg_; }
  const DatasetSplit& data() const { return data_; }
  const Model& model() const { return *model_; }
  const GradientVector& params() const { return params_; }
  std::size_t byzantine_count() const { return m_; }
  std::size_t round() const { return round_; }
  const std::vector<std::vector<std::size_t>>& shards() const { return shards_; }

  const AttackSpec& AttackForRound(std::size_t t) const {
    if (cfg_.time_varying_attacks.empty()) return cfg_.attack;
    const std::size_t epoch = t / period_;
    Rng rng(DeriveSeed(cfg_.seed, {stream::kSchedule, epoch}));
    return cfg_.time_varying_attacks[rng.UniformInt(
        cfg_.time_varying_attacks.size())];
  }

  // Stochastic gradient of client i on a fresh mini-batch.
  GradientVector LocalGradient(std::size_t client, bool flip_labels) const {
    const auto& shard = shards_[client];
    Rng rng(DeriveSeed(cfg_.seed, {stream::kBatch, round_, client}));
    std::vector<std::size_t> rows;
    if (cfg_.batch_size >= shard.size()) {
      rows = shard;
    } else {
      std::vector<std::size_t> pool = shard;
      for (std::size_t k = 0; k < cfg_.batch_size; ++k) {
        std::swap(pool[k], pool[k + rng.UniformInt(pool.size() - k)]);
      }
      rows.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cfg_.batch_size));
    }
    GradientVector g;
    BatchView batch{&data_.train, rows, flip_labels};
    model_->LossAndGradient(params_, batch, cfg_.weight_decay, &g);
    return g;
  }

  // Loss and gradient over the whole training set at the current point.
  double FullLossAndGradient(GradientVector* grad) const {
    std::vector<std::size_t> all(data_.train.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    BatchView batch{&data_.train, all, false};
    return model_->LossAndGradient(params_, batch, cfg_.weight_decay, grad);
  }

  RoundReport RunRound() {
    const std::size_t n = cfg_.n_clients;
    const AttackSpec& attack = AttackForRound(round_);
    RoundReport rep;
    rep.round = round_;
    rep.attack = attack.kind;

    GradientVector full_grad;
    rep.train_loss = FullLossAndGradient(&full_grad);
    rep.full_grad_norm_sq = Dot(full_grad, full_grad);

    const bool client_mom = cfg_.momentum_placement == MomentumPlacement::kClient &&
                            cfg_.momentum > 0.0;
    GradientSet submitted(n);
    for (std::size_t i = 0; i < n; ++i) {
      const bool flip = i < m_ && attack.kind == AttackKind::kLabelFlip;
      GradientVector g = LocalGradient(i, flip);
      if (client_mom) {
        GradientVector& buf = client_momentum_[i];
        for (std::size_t j = 0; j < g.size(); ++j) buf[j] = cfg_.momentum * buf[j] + g[j];
        submitted[i] = buf;
      } else {
        submitted[i] = std::move(g);
      }
    }

    if (m_ > 0 && attack.kind != AttackKind::kNone &&
        attack.kind != AttackKind::kLabelFlip) {
      AttackContext ctx;
      ctx.n = n;
      ctx.m = m_;
      ctx.honest.assign(submitted.begin() + static_cast<std::ptrdiff_t>(m_),
                        submitted.end());
      ctx.own.assign(submitted.begin(),
                     submitted.begin() + static_cast<std::ptrdiff_t>(m_));
      GradientSet crafted = CraftAttack(
          attack, ctx, DeriveSeed(cfg_.seed, {stream::kAttack, round_}));
      for (std::size_t i = 0; i < m_; ++i) submitted[i] = std::move(crafted[i]);
    }

    const GradientSet honest(submitted.begin() + static_cast<std::ptrdiff_t>(m_),
                             submitted.end());
    rep.honest_signs = AverageSignStats(honest);
    if (m_ > 0 && attack.kind != AttackKind::kNone) {
      const GradientSet mal(submitted.begin(),
                            submitted.begin() + static_cast<std::ptrdiff_t>(m_));
      rep.malicious_signs = AverageSignStats(mal);
    }

    const AggregationResult agg = Aggregate(
        cfg_.defense, submitted, has_prev_ ? &prev_global_ : nullptr,
        DeriveSeed(cfg_.seed, {stream::kDefense, round_}));
    rep.selected = agg.selected;
    rep.fallback = agg.fallback;
    if (agg.filter) rep.num_clusters = agg.filter->num_clusters;
    std::size_t hon = 0, mal = 0;
    for (std::size_t i : agg.selected) (i < m_ ? mal : hon)++;
    rep.honest_selected_rate =
        n > m_ ? static_cast<double>(hon) / static_cast<double>(n - m_) : 0.0;
    rep.malicious_selected_rate =
        m_ > 0 ? static_cast<double>(mal) / static_cast<double>(m_) : 0.0;
    rep.global_grad_norm = L2Norm(agg.global);

    prev_global_ = agg.global;
    has_prev_ = true;

    const GradientVector* applied = &agg.global;
    if (cfg_.momentum_placement == MomentumPlacement::kServer &&
        cfg_.momentum > 0.0) {
      for (std::size_t j = 0; j < server_momentum_.size(); ++j) {
        server_momentum_[j] = cfg_.momentum * server_momentum_[j] + agg.global[j];
      }
      applied = &server_momentum_;
    }
    double residual = 0.0;
    for (std::size_t j = 0; j < params_.size(); ++j) {
      const double step = cfg_.learning_rate * (*applied)[j];
      const double before = params_[j];
      params_[j] = before - step;
      residual = std::max(residual, std::abs((params_[j] - before) + step));
    }
    rep.update_residual = residual;
    rep.test_accuracy = Accuracy(*model_, params_, data_.test);
    ++round_;
    return rep;
  }

 private:
  ExperimentConfig cfg_;
  DatasetSplit data_;
  std::unique_ptr<Model> model_;
  GradientVector params_;
  std::vector<std::vector<std::size_t>> shards_;
  std::vector<GradientVector> client_momentum_;
  GradientVector server_momentum_;
  GradientVector prev_global_;
  bool has_prev_ = false;
  std::size_t m_ = 0;
  std::size_t round_ = 0;
  std::size_t period_ = 1;
};

struct ExperimentResult {
  std::vector<RoundReport> rounds;
  ExperimentSummary summary;
};

inline ExperimentSummary Summarize(const std::vector<RoundReport>& rounds) {
  ExperimentSummary s;
  s.rounds = rounds.size();
  if (rounds.empty()) return s;
  s.best_accuracy = -1.0;
  for (const auto& r : rounds) {
    s.best_accuracy = std::max(s.best_accuracy, r.test_accuracy);
    s.mean_honest_selected_rate += r.honest_selected_rate;
    s.mean_malicious_selected_rate += r.malicious_selected_rate;
    if (r.fallback) ++s.fallback_rounds;
  }
  const double inv = 1.0 / static_cast<double>(rounds.size());
  s.mean_honest_selected_rate *= inv;
  s.mean_malicious_selected_rate *= inv;
  s.final_accuracy = rounds.back().test_accuracy;
  return s;
}

inline ExperimentResult RunSimulation(Simulation& sim, std::size_t rounds) {
  ExperimentResult res;
  res.rounds.reserve(rounds);
  for (std::size_t t = 0; t < rounds; ++t) res.rounds.push_back(sim.RunRound());
  res.summary = Summarize(res.rounds);
  return res;
}

// The no-attack, plain-mean counterpart of cfg (same seed and data).
inline ExperimentConfig BaselineConfig(const ExperimentConfig& cfg) {
  ExperimentConfig base = cfg;
  base.attack = AttackSpec{};
  base.time_varying_attacks.clear();
  base.defense = DefenseSpec{};
  return base;
}

inline ExperimentResult RunExperiment(const ExperimentConfig& cfg,
                                      bool with_baseline = true) {
  const DatasetSplit data = LoadData(cfg.dataset);
  Simulation sim(cfg, data);
  ExperimentResult res = RunSimulation(sim, cfg.rounds);
  if (with_baseline) {
    Simulation base(BaselineConfig(cfg), data);
    const ExperimentResult b = RunSimulation(base, cfg.rounds);
    res.summary.baseline_best_accuracy = b.summary.best_accuracy;
    res.summary.baseline_final_accuracy = b.summary.final_accuracy;
    res.summary.attack_impact_best = b.summary.best_accuracy - res.summary.best_accuracy;
    res.summary.attack_impact_final =
        b.summary.final_accuracy - res.summary.final_accuracy;
  }
  return res;
}

}  // namespace byzsim
