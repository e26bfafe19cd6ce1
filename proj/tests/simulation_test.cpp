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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "byzsim/simulation.hpp"

namespace byzsim {
namespace {

ExperimentConfig SmallConfig() {
  ExperimentConfig c;
  c.n_clients = 10;
  c.byz_fraction = 0.2;
  c.rounds = 20;
  c.batch_size = 8;
  c.seed = 3;
  c.dataset.synthetic.d = 6;
  c.dataset.synthetic.n_samples = 600;
  c.dataset.synthetic.margin = 3.0;
  c.dataset.synthetic.seed = 3;
  return c;
}

std::vector<int> Balanced(std::size_t n, int c) {
  std::vector<int> l(n);
  for (std::size_t i = 0; i < n; ++i) l[i] = static_cast<int>(i % c);
  return l;
}

void ExpectPartition(const std::vector<std::vector<std::size_t>>& shards, std::size_t total) {
  std::set<std::size_t> seen;
  std::size_t count = 0;
  for (const auto& s : shards) {
    count += s.size();
    seen.insert(s.begin(), s.end());
    EXPECT_LE(s.size(), total / shards.size() + 1);
    EXPECT_GE(s.size(), total / shards.size());
  }
  EXPECT_EQ(count, total);
  EXPECT_EQ(seen.size(), total);
  EXPECT_EQ(*seen.rbegin(), total - 1);
}

TEST(PartitionTest, IidHalves) {
  const auto labels = Balanced(100, 2);
  const auto shards = PartitionData(labels, 2, 1.0, 7);
  ExpectPartition(shards, 100);
  for (const auto& s : shards) {
    int ones = 0;
    for (std::size_t i : s) ones += labels[i];
    EXPECT_NEAR(ones, 25, 10);
  }
  EXPECT_EQ(PartitionData(labels, 2, std::nullopt, 7), shards);
}

TEST(PartitionTest, SortedShardsConcentrateLabels) {
  const auto labels = Balanced(1000, 10);
  const auto shards = PartitionData(labels, 5, 0.0, 9);
  ExpectPartition(shards, 1000);
  for (const auto& s : shards) {
    std::set<int> ls;
    for (std::size_t i : s) ls.insert(labels[i]);
    EXPECT_LE(ls.size(), 2u);
  }
  const auto two = PartitionData(Balanced(100, 2), 2, 0.0, 1);
  for (const auto& s : two) {
    std::map<int, int> c;
    for (std::size_t i : s) ++c[Balanced(100, 2)[i]];
    EXPECT_LE(c.size(), 2u);
  }
}

TEST(PartitionTest, MixedCoversAndBalances) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (std::size_t total : {5000u, 5013u}) {
      ExpectPartition(PartitionData(Balanced(total, 10), 50, 0.5, seed), total);
    }
  }
  EXPECT_THROW(PartitionData(Balanced(10, 2), 11, 0.5, 0), Error);
  EXPECT_THROW(PartitionData(Balanced(10, 2), 2, 1.5, 0), Error);
}

double LossAt(const Model& m, GradientVector p, const BatchView& b, double wd) {
  return m.LossAndGradient(p, b, wd, nullptr);
}

TEST(ModelTest, FiniteDifferenceGradients) {
  SyntheticParams sp;
  sp.d = 5;
  sp.n_samples = 60;
  for (int classes : {2, 3}) {
    sp.n_classes = classes;
    const Dataset ds = MakeSyntheticDataset(sp).train;
    std::vector<std::size_t> rows{0, 3, 7, 11, 20, 31};
    const BatchView batch{&ds, rows, false};
    LogisticRegression lr(5, classes);
    Mlp mlp(5, {4, 3}, classes);
    for (const Model* m : {static_cast<const Model*>(&lr), static_cast<const Model*>(&mlp)}) {
      Rng rng(classes);
      GradientVector p = m->InitParams(5);
      for (double& v : p) v += 0.3 * rng.Normal();
      GradientVector g;
      m->LossAndGradient(p, batch, 5e-4, &g);
      ASSERT_EQ(g.size(), m->NumParams());
      const double eps = 1e-6;
      for (std::size_t j = 0; j < p.size(); ++j) {
        GradientVector a = p, b = p;
        a[j] += eps;
        b[j] -= eps;
        const double fd = (LossAt(*m, a, batch, 5e-4) - LossAt(*m, b, batch, 5e-4)) / (2 * eps);
        EXPECT_NEAR(g[j], fd, 1e-5) << "param " << j;
      }
    }
  }
}

TEST(ModelTest, SymmetricBatchGivesZeroGradient) {
  Dataset ds;
  ds.d_in = 3;
  ds.n_classes = 2;
  ds.features = {1, 2, -1, -1, -2, 1, 1, 2, -1, -1, -2, 1};
  ds.labels = {1, 1, 0, 0};
  std::vector<std::size_t> rows{0, 1, 2, 3};
  LogisticRegression lr(3, 2);
  GradientVector g;
  lr.LossAndGradient(lr.InitParams(0), BatchView{&ds, rows, false}, 5e-4, &g);
  EXPECT_EQ(g, GradientVector(4, 0.0));
}

TEST(ModelTest, LabelFlipMatchesComplementLabels) {
  SyntheticParams sp;
  sp.d = 4;
  sp.n_samples = 50;
  Dataset ds = MakeSyntheticDataset(sp).train;
  Dataset comp = ds;
  for (int& l : comp.labels) l = 1 - l;
  std::vector<std::size_t> rows{1, 2, 5, 8, 13};
  LogisticRegression lr(4, 2);
  GradientVector p{0.1, -0.2, 0.3, 0.05, -0.1}, a, b;
  lr.LossAndGradient(p, BatchView{&ds, rows, true}, 0.0, &a);
  lr.LossAndGradient(p, BatchView{&comp, rows, false}, 0.0, &b);
  EXPECT_EQ(a, b);
}

TEST(ModelTest, MinibatchGradientsAverageToFullShard) {
  SyntheticParams sp;
  sp.d = 6;
  sp.n_samples = 500;
  sp.n_classes = 3;
  const Dataset ds = MakeSyntheticDataset(sp).train;
  const auto shard = PartitionData(ds.labels, 4, 1.0, 2)[1];
  ASSERT_EQ(shard.size(), 100u);
  Mlp mlp(6, {5}, 3);
  const GradientVector p = mlp.InitParams(9);
  GradientVector full;
  mlp.LossAndGradient(p, BatchView{&ds, shard, false}, 5e-4, &full);
  GradientVector avg(full.size(), 0.0);
  for (std::size_t k = 0; k < 10; ++k) {
    std::vector<std::size_t> rows(shard.begin() + 10 * k, shard.begin() + 10 * (k + 1));
    GradientVector g;
    mlp.LossAndGradient(p, BatchView{&ds, rows, false}, 5e-4, &g);
    for (std::size_t j = 0; j < g.size(); ++j) avg[j] += g[j] / 10.0;
  }
  for (std::size_t j = 0; j < full.size(); ++j) EXPECT_NEAR(avg[j], full[j], 1e-9);
}

TEST(SimulationTest, ByzantineCountAndValidation) {
  ExperimentConfig c = SmallConfig();
  EXPECT_EQ(c.ByzantineCount(), 2u);
  c.n_clients = 50;
  EXPECT_EQ(c.ByzantineCount(), 10u);
  c.byz_fraction = 0.5;
  EXPECT_THROW(c.Validate(), Error);
  c = SmallConfig();
  c.learning_rate = 0.0;
  EXPECT_THROW(c.Validate(), Error);
  c = SmallConfig();
  c.rounds = 0;
  EXPECT_THROW(c.Validate(), Error);
}

// Recomputes one round from the public pieces and compares the update.
TEST(SimulationTest, MeanUpdateMatchesManualStep) {
  for (AttackKind kind : {AttackKind::kNone, AttackKind::kSignFlip, AttackKind::kLabelFlip}) {
    ExperimentConfig c = SmallConfig();
    c.momentum = 0.0;
    c.attack.kind = kind;
    Simulation sim(c);
    sim.RunRound();
    const GradientVector before = sim.params();
    GradientVector expect(before.size(), 0.0);
    for (std::size_t i = 0; i < c.n_clients; ++i) {
      const bool byz = i < sim.byzantine_count();
      GradientVector g = sim.LocalGradient(i, byz && kind == AttackKind::kLabelFlip);
      if (byz && kind == AttackKind::kSignFlip) g = Scaled(g, -1.0);
      for (std::size_t j = 0; j < g.size(); ++j) expect[j] += g[j];
    }
    for (double& v : expect) v /= static_cast<double>(c.n_clients);
    const RoundReport r = sim.RunRound();
    for (std::size_t j = 0; j < before.size(); ++j) {
      EXPECT_NEAR((before[j] - sim.params()[j]) / c.learning_rate, expect[j], 1e-12);
    }
    EXPECT_LE(r.update_residual, 1e-15);
    EXPECT_EQ(r.honest_selected_rate, 1.0);
    EXPECT_EQ(r.malicious_selected_rate, 1.0);
  }
}

TEST(SimulationTest, SignFlipOfMeanShrinksAggregate) {
  Rng rng(4);
  GradientSet honest(40, GradientVector(7));
  for (auto& g : honest) {
    for (double& v : g) v = rng.Normal(0.3, 1.0);
  }
  AttackContext ctx;
  ctx.n = 50;
  ctx.m = 10;
  ctx.honest = honest;
  ctx.own.assign(10, Mean(honest));
  AttackSpec spec;
  spec.kind = AttackKind::kSignFlip;
  GradientSet all = CraftAttack(spec, ctx, 0);
  all.insert(all.end(), honest.begin(), honest.end());
  const GradientVector agg = Aggregate(DefenseSpec{}, all, nullptr, 0).global;
  const GradientVector mu = Mean(honest);
  for (std::size_t j = 0; j < 7; ++j) EXPECT_NEAR(agg[j], 0.6 * mu[j], 1e-14);
}

TEST(SimulationTest, ByzMeanRandomDrivesMeanToInnerVector) {
  ExperimentConfig c = SmallConfig();
  c.momentum = 0.0;
  c.attack.kind = AttackKind::kByzMean;
  auto inner = std::make_shared<AttackSpec>();
  inner->kind = AttackKind::kRandom;
  c.attack.byzmean_inner = inner;
  Simulation sim(c);
  for (int t = 0; t < 5; ++t) {
    const GradientVector before = sim.params();
    AttackContext ctx;
    ctx.n = c.n_clients;
    ctx.m = sim.byzantine_count();
    for (std::size_t i = 0; i < c.n_clients; ++i) {
      (i < ctx.m ? ctx.own : ctx.honest).push_back(sim.LocalGradient(i, false));
    }
    const GradientVector g_m1 =
        CraftAttack(c.attack, ctx, DeriveSeed(c.seed, {stream::kAttack, sim.round()})).front();
    sim.RunRound();
    for (std::size_t j = 0; j < before.size(); ++j) {
      EXPECT_NEAR((before[j] - sim.params()[j]) / c.learning_rate, g_m1[j], 1e-9);
    }
  }
}

TEST(SimulationTest, ClientAndServerMomentum) {
  for (auto placement : {MomentumPlacement::kClient, MomentumPlacement::kServer}) {
    ExperimentConfig c = SmallConfig();
    c.attack.kind = AttackKind::kNone;
    c.momentum_placement = placement;
    Simulation sim(c);
    GradientVector buf(sim.params().size(), 0.0);
    for (int t = 0; t < 4; ++t) {
      GradientVector mean(buf.size(), 0.0);
      for (std::size_t i = 0; i < c.n_clients; ++i) {
        const GradientVector g = sim.LocalGradient(i, false);
        for (std::size_t j = 0; j < g.size(); ++j) mean[j] += g[j] / c.n_clients;
      }
      for (std::size_t j = 0; j < buf.size(); ++j) buf[j] = c.momentum * buf[j] + mean[j];
      const GradientVector before = sim.params();
      sim.RunRound();
      // Both placements apply the momentum of the mean under plain averaging.
      for (std::size_t j = 0; j < buf.size(); ++j) {
        EXPECT_NEAR((before[j] - sim.params()[j]) / c.learning_rate, buf[j], 1e-12);
      }
    }
  }
}

TEST(SimulationTest, ReportsAreDeterministic) {
  ExperimentConfig c = SmallConfig();
  c.attack.kind = AttackKind::kLie;
  c.defense.kind = DefenseKind::kSignGuardSim;
  const auto a = RunExperiment(c, false);
  const auto b = RunExperiment(c, false);
  ASSERT_EQ(a.rounds.size(), 20u);
  for (std::size_t t = 0; t < a.rounds.size(); ++t) {
    EXPECT_EQ(a.rounds[t].selected, b.rounds[t].selected);
    EXPECT_EQ(a.rounds[t].train_loss, b.rounds[t].train_loss);
    EXPECT_EQ(a.rounds[t].test_accuracy, b.rounds[t].test_accuracy);
  }
}

TEST(SimulationTest, SelectedRatesMatchRoles) {
  ExperimentConfig c = SmallConfig();
  c.attack.kind = AttackKind::kSignFlip;
  c.defense.kind = DefenseKind::kMultiKrum;
  Simulation sim(c);
  for (int t = 0; t < 5; ++t) {
    const RoundReport r = sim.RunRound();
    std::size_t hon = 0, mal = 0;
    for (std::size_t i : r.selected) (i < 2 ? mal : hon)++;
    EXPECT_DOUBLE_EQ(r.honest_selected_rate, hon / 8.0);
    EXPECT_DOUBLE_EQ(r.malicious_selected_rate, mal / 2.0);
    ASSERT_TRUE(r.malicious_signs.has_value());
  }
}

TEST(SimulationTest, TimeVaryingScheduleIsPerEpoch) {
  ExperimentConfig c = SmallConfig();
  for (AttackKind k : {AttackKind::kLie, AttackKind::kSignFlip, AttackKind::kRandom}) {
    AttackSpec s;
    s.kind = k;
    c.time_varying_attacks.push_back(s);
  }
  c.attack_period = 3;
  Simulation sim(c);
  std::set<AttackKind> kinds;
  for (std::size_t t = 0; t < 60; ++t) {
    EXPECT_EQ(sim.AttackForRound(t).kind, sim.AttackForRound(t - t % 3).kind);
    kinds.insert(sim.AttackForRound(t).kind);
  }
  EXPECT_EQ(kinds.size(), 3u);
  const RoundReport r = sim.RunRound();
  EXPECT_EQ(r.attack, sim.AttackForRound(0).kind);
}

TEST(SimulationTest, NoByzantineSignGuardTracksMean) {
  ExperimentConfig c;
  c.n_clients = 50;
  c.byz_fraction = 0.0;
  c.rounds = 300;
  c.batch_size = 4;
  c.momentum_placement = MomentumPlacement::kServer;
  c.seed = 1;
  c.dataset.synthetic.margin = 0.6;
  c.dataset.synthetic.informative_std = 0.1;
  c.dataset.synthetic.nuisance_std = 3.0;
  c.dataset.synthetic.seed = 1;
  c.defense.signguard.coord_ratio = 1.0;
  const DatasetSplit data = LoadData(c.dataset);
  Simulation base(c, data);
  const double mean_acc = RunSimulation(base, c.rounds).summary.final_accuracy;
  for (auto kind : {DefenseKind::kSignGuard, DefenseKind::kSignGuardSim, DefenseKind::kSignGuardDist}) {
    ExperimentConfig s = c;
    s.defense.kind = kind;
    Simulation sim(s, data);
    EXPECT_NEAR(RunSimulation(sim, c.rounds).summary.final_accuracy, mean_acc, 0.01)
        << DefenseKindName(kind);
  }
}

TEST(SimulationTest, BaselineImpact) {
  ExperimentConfig c = SmallConfig();
  c.attack.kind = AttackKind::kSignFlip;
  const auto r = RunExperiment(c);
  ASSERT_TRUE(r.summary.attack_impact_final.has_value());
  EXPECT_DOUBLE_EQ(*r.summary.attack_impact_final,
                   *r.summary.baseline_final_accuracy - r.summary.final_accuracy);
  EXPECT_DOUBLE_EQ(*r.summary.attack_impact_best,
                   *r.summary.baseline_best_accuracy - r.summary.best_accuracy);
}

}  // namespace
}  // namespace byzsim
