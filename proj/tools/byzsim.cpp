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

// Command-line front end: run, verify, signtrace, list.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "byzsim.hpp"

namespace fs = std::filesystem;
using byzsim::Json;

namespace {

constexpr const char* kVersion = "byzsim 0.1.0";

std::string UtcNow() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<std::uint64_t> SeedFromEnv() {
  const char* s = std::getenv("BYZSIM_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0') {
    byzsim::Fail(byzsim::ErrorCode::kConfig, "BYZSIM_SEED must be a non-negative integer");
  }
  return v;
}

struct CellOutcome {
  bool ok = false;
  std::string error;
  fs::path dir;
};

void WriteCell(const byzsim::GridCell& cell, bool baseline, const fs::path& dir) {
  const byzsim::ExperimentResult res = byzsim::RunExperiment(cell.config, baseline);
  byzsim::WriteFileAtomic(dir / "rounds.csv", byzsim::RoundsCsv(res.rounds));
  byzsim::WriteFileAtomic(dir / "signtrace.csv",
                          byzsim::SignTraceCsv(byzsim::SignTrace(res.rounds)));
  byzsim::WriteFileAtomic(
      dir / "summary.json",
      byzsim::SummaryJson(res.summary, cell.config, cell.name).dump(2) + "\n");
}

int CmdRun(const std::string& config_path, const std::string& out_override,
           std::size_t workers_override) {
  byzsim::RunPlan plan;
  try {
    plan = byzsim::LoadRunPlan(config_path, SeedFromEnv());
  } catch (const byzsim::Error& e) {
    std::cerr << "invalid config '" << config_path << "': " << e.what() << "\n";
    return 2;
  }
  if (!out_override.empty()) plan.output_dir = out_override;
  if (workers_override > 0) plan.workers = workers_override;
  const std::string hash = byzsim::HexHash(byzsim::ConfigHash(plan.canonical));
  const std::string started = UtcNow();
  const fs::path run_dir = byzsim::FreshDirectory(plan.output_dir, "run-" + hash.substr(0, 12));

  std::vector<CellOutcome> outcomes(plan.cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mu;
  auto worker = [&]() {
    for (std::size_t i = next++; i < plan.cells.size(); i = next++) {
      const auto& cell = plan.cells[i];
      CellOutcome& oc = outcomes[i];
      oc.dir = plan.grid ? run_dir / cell.name : run_dir;
      try {
        fs::create_directories(oc.dir);
        WriteCell(cell, plan.baseline, oc.dir);
        oc.ok = true;
      } catch (const std::exception& e) {
        oc.error = e.what();
        Json err = {{"cell", cell.name}, {"error", oc.error}};
        try {
          byzsim::WriteFileAtomic(oc.dir / "error.json", err.dump(2) + "\n");
        } catch (const std::exception&) {
        }
      }
      std::lock_guard<std::mutex> lock(log_mu);
      std::cerr << (oc.ok ? "done   " : "FAILED ") << cell.name
                << (oc.ok ? "" : ": " + oc.error) << "\n";
    }
  };
  const std::size_t nthreads = std::min(plan.workers, plan.cells.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  Json manifest;
  manifest["config_hash"] = hash;
  manifest["config_path"] = config_path;
  manifest["seed"] = plan.canonical["experiment"]["seed"];
  manifest["version"] = kVersion;
  manifest["started"] = started;
  manifest["finished"] = UtcNow();
  manifest["cells"] = Json::array();
  bool all_ok = true;
  for (std::size_t i = 0; i < plan.cells.size(); ++i) {
    Json c = {{"name", plan.cells[i].name},
              {"dir", outcomes[i].dir.string()},
              {"ok", outcomes[i].ok}};
    if (!outcomes[i].ok) c["error"] = outcomes[i].error;
    manifest["cells"].push_back(c);
    all_ok = all_ok && outcomes[i].ok;
  }
  byzsim::WriteFileAtomic(run_dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << run_dir.string() << "\n";
  return all_ok ? 0 : 1;
}

int CmdSignTrace(const std::string& config_path) {
  byzsim::RunPlan plan;
  try {
    plan = byzsim::LoadRunPlan(config_path, SeedFromEnv());
  } catch (const byzsim::Error& e) {
    std::cerr << "invalid config '" << config_path << "': " << e.what() << "\n";
    return 2;
  }
  if (plan.cells.size() != 1) {
    std::cerr << "signtrace expects a single attack and defense, got "
              << plan.cells.size() << " cells\n";
    return 2;
  }
  const auto res = byzsim::RunExperiment(plan.cells.front().config, false);
  std::cout << byzsim::SignTraceCsv(byzsim::SignTrace(res.rounds));
  return 0;
}

void Row(const char* name, const std::string& value, bool ok) {
  std::printf("%-34s %-24s %s\n", name, value.c_str(), ok ? "PASS" : "FAIL");
}

void Info(const char* name, const std::string& value) {
  std::printf("%-34s %s\n", name, value.c_str());
}

std::string F(double v) { return byzsim::FormatReal(v); }

int CmdProp1(const byzsim::Prop1Params& p) {
  const auto r = byzsim::VerifyProp1(p);
  Info("z", F(r.z));
  Info("trials", std::to_string(r.trials));
  const bool closer = r.exists_closer;
  const bool similar = r.exists_less_similar;
  const bool ident = r.max_identity_rel_err <= 1e-10;
  const bool bound = r.dist_malicious <= r.bound_dist * 1.1 &&
                     r.dist_malicious_honest_frame <= r.bound_dist * 1.1;
  const bool chain = r.xi_chain_violations == 0;
  Row("exists closer honest (expected)", std::to_string(r.closer_trials) + " trials", closer);
  Row("exists less similar honest", std::to_string(r.less_similar_trials) + " trials", similar);
  Row("attacker-frame identity rel err", F(r.max_identity_rel_err), ident);
  Row("E dist (all-n aggregate)", F(r.dist_malicious), bound);
  Info("E dist (honest-mean aggregate)", F(r.dist_malicious_honest_frame));
  Info("bound (1+1/n) z^2 sigma^2", F(r.bound_dist));
  Row("norm-ratio chain violations", std::to_string(r.xi_chain_violations) + "/" +
                                         std::to_string(r.xi_chain_checked), chain);
  Info("empirical z threshold", r.z_threshold ? F(*r.z_threshold) : "none up to 5");
  return closer && similar && ident && bound && chain ? 0 : 1;
}

int CmdThresholds(double mu, double sigma, double z, std::size_t n, std::size_t m) {
  const auto r = byzsim::SignFlipThresholdCheck(mu, sigma, z, n, m);
  Info("median_flips", r.median_flips ? "true" : "false");
  Info("mean_flips", r.mean_flips ? "true" : "false");
  Row("median instance agrees", F(r.median_value), r.median_instance_flips == r.median_flips);
  Row("mean instance agrees", F(r.mean_value), r.mean_instance_flips == r.mean_flips);
  Row("mean matches closed form", F(r.mean_closed_form), r.consistent);
  return r.consistent ? 0 : 1;
}

int CmdLemma1(const byzsim::Lemma1Params& p) {
  const auto r = byzsim::VerifyLemma1(p);
  Info("excluded clients", std::to_string(r.excluded));
  Info("kappa_hat", F(r.kappa_hat));
  Info("sigma_hat", F(r.sigma_hat));
  Info("bound", F(r.bound));
  Row("empirical deviation <= bound", F(r.empirical_dev), r.holds);
  return r.holds ? 0 : 1;
}

int CmdTheorem1(const byzsim::Theorem1Params& p, bool eta_given) {
  const auto t = byzsim::Theorem1Constants(p);
  Row("delta1 >= 0", F(t.delta1), t.delta1 >= 0.0);
  Row("delta2 >= 0", F(t.delta2), t.delta2 >= 0.0);
  Info("learning-rate bound", F(t.lr_bound));
  bool ok = t.delta1 >= 0.0 && t.delta2 >= 0.0;
  if (eta_given) {
    Row("eta within bound", F(p.eta), t.lr_ok);
    ok = ok && t.lr_ok;
  }
  return ok ? 0 : 1;
}

void CmdList() {
  std::cout <<
R"(attacks (config "attack": {"kind": ...}):
  none        Byzantine clients behave honestly
  random      N(noise_mu, noise_sigma^2) per coordinate      noise_mu=0, noise_sigma=0.5
  noise       own gradient + N(noise_mu, noise_sigma^2)      noise_mu=0, noise_sigma=0.5
  signflip    -flip_scale * own gradient                      flip_scale=1
  labelflip   train on labels l -> C-1-l                      (no parameters)
  lie         mean - z * std of honest gradients              z=0.3, lie_estimation=benign|all_clients
  byzmean     two groups forcing the plain mean onto inner    z=0.3, inner={attack object}
  minmax      honest mean + gamma * perturbation              perturbation=inverse_std|inverse_unit|inverse_sign, gamma_tol=1e-6
  minsum      as minmax with the sum-of-squares constraint    perturbation, gamma_tol

defenses (config "defense": {"kind": ...}):
  mean, median
  trmean          trim_k (defaults to byz_count_hint)
  geomed          weiszfeld_tol=1e-7, weiszfeld_max_iter=1000
  multikrum       krum_select (defaults to n - m)
  bulyan          needs n >= 4m + 3
  signguard, signguard-sim, signguard-dist
                  norm_lower=0.1, norm_upper=3.0, coord_ratio=0.1, bandwidth_quantile=0.5,
                  kernel=flat|gaussian, reference=previous|pairwise_median, zero_eps=0,
                  enable_thresholding, enable_clustering, enable_clipping (all true)
  byz_count_hint  Byzantine count for the baselines (defaults to floor(byz_fraction * n))

models (experiment.model):
  logreg      binary: one sigmoid logit; C > 2: softmax
  mlp         hidden=[...] ReLU layers, softmax output

datasets ("dataset"):
  synthetic   d=20, n_samples=5000, n_classes=2, margin=6, informative_std=1, nuisance_std=1,
              train_fraction=0.8, seed
  idx         train_images, train_labels, test_images, test_labels
)";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Byzantine-robust federated aggregation simulator"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::size_t workers = 0;
  auto* run = app.add_subcommand("run", "Run one experiment or an attack x defense grid");
  run->add_option("config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output root (overrides output.dir)");
  run->add_option("--workers", workers, "Parallel grid cells (overrides output.workers)");

  std::string trace_config;
  auto* trace = app.add_subcommand("signtrace", "Print per-round sign statistics as CSV");
  trace->add_option("config", trace_config, "JSON config file")->required()->check(CLI::ExistingFile);

  app.add_subcommand("list", "List attacks, defenses, models and their parameters");

  auto* verify = app.add_subcommand("verify", "Numeric checks of the analysis results");
  verify->require_subcommand(1);

  byzsim::Prop1Params pp;
  auto* prop1 = verify->add_subcommand("prop1", "LIE closeness to the aggregate");
  prop1->add_option("--n", pp.n)->capture_default_str();
  prop1->add_option("--m", pp.m)->capture_default_str();
  prop1->add_option("--d", pp.d)->capture_default_str();
  prop1->add_option("--z", pp.z)->capture_default_str();
  prop1->add_option("--mean", pp.honest_mean)->capture_default_str();
  prop1->add_option("--std", pp.honest_std)->capture_default_str();
  prop1->add_option("--trials", pp.trials)->capture_default_str();
  prop1->add_option("--seed", pp.seed)->capture_default_str();

  double mu = 1.0, sigma = 2.0, z = 0.6;
  std::size_t tn = 50, tm = 10;
  auto* thr = verify->add_subcommand("thresholds", "Sign reversal under median and mean");
  thr->add_option("--mu", mu)->capture_default_str();
  thr->add_option("--sigma", sigma)->capture_default_str();
  thr->add_option("--z", z)->capture_default_str();
  thr->add_option("--n", tn)->capture_default_str();
  thr->add_option("--m", tm)->capture_default_str();

  byzsim::Lemma1Params lp;
  std::string mode = "random";
  auto* lem = verify->add_subcommand("lemma1", "Deviation of a subset average");
  lem->add_option("--n", lp.n)->capture_default_str();
  lem->add_option("--beta", lp.beta)->capture_default_str();
  lem->add_option("--sigma", lp.sigma)->capture_default_str();
  lem->add_option("--kappa", lp.kappa)->capture_default_str();
  lem->add_option("--trials", lp.trials)->capture_default_str();
  lem->add_option("--seed", lp.seed)->capture_default_str();
  lem->add_option("--d", lp.d)->capture_default_str();
  lem->add_option("--mode", mode)->check(CLI::IsMember({"random", "adversarial"}))->capture_default_str();

  byzsim::Theorem1Params tp;
  auto* thm = verify->add_subcommand("theorem1", "Convergence constants");
  thm->add_option("--c", tp.c)->capture_default_str();
  thm->add_option("--b", tp.b)->capture_default_str();
  thm->add_option("--delta", tp.delta)->capture_default_str();
  thm->add_option("--beta", tp.beta)->capture_default_str();
  thm->add_option("--sigma", tp.sigma)->capture_default_str();
  thm->add_option("--kappa", tp.kappa)->capture_default_str();
  thm->add_option("--L", tp.L)->capture_default_str();
  auto* eta_opt = thm->add_option("--eta", tp.eta);
  thm->add_option("--n", tp.n)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return CmdRun(config_path, out_dir, workers);
    if (trace->parsed()) return CmdSignTrace(trace_config);
    if (app.got_subcommand("list")) {
      CmdList();
      return 0;
    }
    if (prop1->parsed()) return CmdProp1(pp);
    if (thr->parsed()) return CmdThresholds(mu, sigma, z, tn, tm);
    if (lem->parsed()) {
      lp.mode = mode == "adversarial" ? byzsim::SubsetMode::kAdversarial
                                      : byzsim::SubsetMode::kRandom;
      return CmdLemma1(lp);
    }
    if (thm->parsed()) return CmdTheorem1(tp, eta_opt->count() > 0);
  } catch (const byzsim::Error& e) {
    std::cerr << "error [" << byzsim::ErrorCodeName(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
