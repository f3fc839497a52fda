// Copyright 2026 The Shapval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// shapval: data importance and privacy/security experiment runner.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "spdlog/sinks/basic_file_sink.h"
#include "spdlog/sinks/stdout_sinks.h"
#include "spdlog/spdlog.h"
#include "shapval/commands.h"
#include "shapval/config.h"

namespace {

namespace fs = std::filesystem;
using shapval::ExperimentConfig;
using shapval::RunContext;

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

template <typename T>
void Override(const std::optional<T>& flag, T& field) {
  if (flag) field = *flag;
}

struct Flags {
  std::string config;
  std::string out = "shapval_out";
  std::optional<uint64_t> seed;
  int threads = 1;
  std::optional<std::string> manifest;
  std::optional<std::string> model;

  // value
  std::optional<int> k;
  std::optional<std::string> aggregation;
  std::optional<size_t> bins;
  std::optional<double> utility_fraction;
  // oracle-check
  std::optional<size_t> oracle_n;
  std::optional<int> oracle_k;
  std::optional<size_t> oracle_seeds;
  std::optional<double> oracle_tolerance;
  // mia
  std::optional<std::string> adversary;
  std::optional<std::vector<std::string>> metrics;
  std::optional<size_t> challenges;
  std::optional<size_t> stratify;
  std::optional<bool> calimem;
  std::optional<std::string> norm;
  std::optional<int> pgd_max_iters;
  // steal / backdoor
  std::optional<std::vector<size_t>> budgets;
  std::optional<std::vector<std::string>> selections;
  std::optional<std::vector<uint64_t>> run_seeds;
  std::optional<bool> cross_distribution;
  std::optional<std::string> surrogate;
  std::optional<uint32_t> target_class;
  std::optional<int> trigger_size;
  std::optional<std::vector<double>> fractions;
  // dynamics
  std::optional<double> remove_fraction;
  std::optional<size_t> targets;
  std::optional<size_t> copies;
  std::optional<size_t> count;
  std::optional<std::vector<std::string>> transforms;
  std::optional<std::string> mode;
  std::optional<double> shadow_fraction;
  // report
  std::optional<std::string> scores;
};

void Apply(const Flags& f, ExperimentConfig& c) {
  Override(f.seed, c.seed);
  Override(f.manifest, c.dataset.manifest);
  Override(f.model, c.model.kind);
  Override(f.k, c.valuation.k);
  Override(f.aggregation, c.valuation.aggregation);
  Override(f.bins, c.valuation.bins);
  Override(f.utility_fraction, c.valuation.utility_fraction);
  Override(f.oracle_n, c.oracle.n);
  Override(f.oracle_k, c.oracle.k);
  Override(f.oracle_seeds, c.oracle.seeds);
  Override(f.oracle_tolerance, c.oracle.tolerance);
  Override(f.adversary, c.mia.adversary);
  Override(f.metrics, c.mia.metrics);
  Override(f.challenges, c.mia.challenges);
  Override(f.stratify, c.mia.stratify);
  Override(f.calimem, c.mia.calimem);
  Override(f.norm, c.mia.norm);
  Override(f.pgd_max_iters, c.mia.pgd_max_iters);
  Override(f.cross_distribution, c.steal.cross_distribution);
  Override(f.surrogate, c.steal.surrogate_kind);
  Override(f.target_class, c.backdoor.target_class);
  Override(f.trigger_size, c.backdoor.trigger_size);
  Override(f.fractions, c.backdoor.fractions);
  Override(f.remove_fraction, c.onion.remove_fraction);
  Override(f.targets, c.duplicate.targets);
  Override(f.copies, c.duplicate.copies);
  Override(f.count, c.augment.count);
  Override(f.transforms, c.augment.transforms);
  Override(f.mode, c.augment.mode);
  Override(f.shadow_fraction, c.shadow.fraction);
  Override(f.scores, c.report.scores);
}

// --budgets, --selections and --run-seeds apply to whichever of steal or
// backdoor is running.
void ApplyRunLists(const Flags& f, const std::string& cmd, ExperimentConfig& c) {
  if (cmd == "steal") {
    Override(f.budgets, c.steal.budgets);
    Override(f.selections, c.steal.selections);
    Override(f.run_seeds, c.steal.seeds);
  } else if (cmd == "backdoor") {
    Override(f.budgets, c.backdoor.budgets);
    Override(f.selections, c.backdoor.selections);
    Override(f.run_seeds, c.backdoor.seeds);
  }
}

spdlog::level::level_enum StderrLevel() {
  const char* env = std::getenv("SHAPVAL_LOG");
  const std::string v = env ? env : "";
  if (v == "debug") return spdlog::level::debug;
  if (v == "info") return spdlog::level::info;
  return spdlog::level::err;
}

void SetupLogging(const fs::path& out) {
  auto err = std::make_shared<spdlog::sinks::stderr_sink_mt>();
  err->set_level(StderrLevel());
  err->set_pattern("[%l] %v");
  std::vector<spdlog::sink_ptr> sinks{err};
  try {
    auto file = std::make_shared<spdlog::sinks::basic_file_sink_mt>(
        (out / "run.log").string(), true);
    file->set_level(spdlog::level::debug);
    file->set_pattern("%Y-%m-%dT%H:%M:%S.%e [%l] %v");
    sinks.push_back(file);
  } catch (const spdlog::spdlog_ex&) {
    // No log file; results are unaffected.
  }
  auto logger = std::make_shared<spdlog::logger>("shapval", sinks.begin(), sinks.end());
  logger->set_level(spdlog::level::debug);
  spdlog::set_default_logger(logger);
}

int Fail(const absl::Status& s) {
  std::cerr << "shapval: " << s.ToString() << "\n";
  spdlog::error("{}", s.ToString());
  return kExitRuntime;
}

int Run(const std::string& cmd, const RunContext& ctx) {
  if (cmd == "value") {
    auto r = shapval::RunValue(ctx);
    if (!r.ok()) return Fail(r.status());
  } else if (cmd == "oracle-check") {
    auto r = shapval::RunOracleCheck(ctx);
    if (!r.ok()) return Fail(r.status());
    std::cout << "max_abs_diff " << r->max_abs_diff << " over " << r->instances
              << " instances: " << (r->pass ? "ok" : "FAILED") << "\n";
    if (!r->pass) return kExitRuntime;
  } else if (cmd == "mia") {
    auto r = shapval::RunMia(ctx);
    if (!r.ok()) return Fail(r.status());
  } else if (cmd == "steal") {
    auto r = shapval::RunSteal(ctx);
    if (!r.ok()) return Fail(r.status());
  } else if (cmd == "backdoor") {
    auto r = shapval::RunBackdoor(ctx);
    if (!r.ok()) return Fail(r.status());
  } else if (cmd == "onion") {
    auto r = shapval::RunOnion(ctx);
    if (!r.ok()) return Fail(r.status());
  } else if (cmd == "duplicate") {
    auto r = shapval::RunDuplicate(ctx);
    if (!r.ok()) return Fail(r.status());
  } else if (cmd == "augment") {
    auto r = shapval::RunAugment(ctx);
    if (!r.ok()) return Fail(r.status());
  } else if (cmd == "shadow") {
    auto r = shapval::RunShadow(ctx);
    if (!r.ok()) return Fail(r.status());
  } else if (cmd == "report") {
    auto r = shapval::RunReport(ctx);
    if (!r.ok()) return Fail(r.status());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data importance and privacy/security experiments"};
  app.require_subcommand(1, 1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "Experiment config (JSON)");
  app.add_option("--out", f.out, "Output directory")->capture_default_str();
  app.add_option("--seed", f.seed, "Experiment seed");
  app.add_option("--threads", f.threads, "Worker thread cap")
      ->check(CLI::Range(1, 1024))
      ->capture_default_str();
  app.add_option("--manifest", f.manifest, "Dataset manifest (JSON)");
  app.add_option("--model", f.model, "Model kind: knn, softmax, mlp");

  auto* value = app.add_subcommand("value", "KNN-Shapley importance of the train split");
  value->add_option("--k", f.k, "Neighbours in the valuation utility");
  value->add_option("--aggregation", f.aggregation, "mean or sum over validation");
  value->add_option("--bins", f.bins, "Loss/importance bins; 0 disables");
  value->add_option("--utility-fraction", f.utility_fraction,
                    "Top/bottom fraction for the utility gap; 0 disables");

  auto* oracle = app.add_subcommand("oracle-check", "Recursion vs brute-force Shapley");
  oracle->add_option("--n", f.oracle_n, "Training rows per instance");
  oracle->add_option("--k", f.oracle_k, "Neighbours");
  oracle->add_option("--seeds", f.oracle_seeds, "Random instances");
  oracle->add_option("--tolerance", f.oracle_tolerance, "Pass threshold");

  auto* mia = app.add_subcommand("mia", "Membership inference game");
  mia->add_option("--adversary", f.adversary, "metric, random or oracle");
  mia->add_option("--metrics", f.metrics, "Membership metrics")->delimiter(',');
  mia->add_option("--challenges", f.challenges, "Challenge rows per game");
  mia->add_option("--stratify", f.stratify, "Importance strata; 0 disables");
  mia->add_flag_callback("--calimem", [&f] { f.calimem = true; },
                         "Importance calibration search");
  mia->add_flag_callback("--no-calimem", [&f] { f.calimem = false; });
  mia->add_option("--norm", f.norm, "Boundary distance norm: l1, l2, linf");
  mia->add_option("--pgd-max-iters", f.pgd_max_iters, "Boundary search steps");

  auto* steal = app.add_subcommand("steal", "Importance-guided model stealing");
  auto* backdoor = app.add_subcommand("backdoor", "Importance-guided poisoning");
  for (auto* sub : {steal, backdoor}) {
    sub->add_option("--budgets", f.budgets, "Query or poison budgets")->delimiter(',');
    sub->add_option("--selections", f.selections, "top, bottom, random")->delimiter(',');
    sub->add_option("--run-seeds", f.run_seeds, "Seeds per budget and selection")
        ->delimiter(',');
  }
  steal->add_flag_callback("--cross-distribution", [&f] { f.cross_distribution = true; },
                           "Also query from a shifted distribution");
  steal->add_flag_callback("--no-cross-distribution", [&f] { f.cross_distribution = false; });
  steal->add_option("--surrogate", f.surrogate, "Surrogate model kind");
  backdoor->add_option("--target-class", f.target_class, "Backdoor target class");
  backdoor->add_option("--trigger-size", f.trigger_size, "Trigger side; 0 scales");
  backdoor->add_option("--fractions", f.fractions, "Fraction-importance contexts")
      ->delimiter(',');

  auto* onion = app.add_subcommand("onion", "Importance shift after removal");
  onion->add_option("--remove-fraction", f.remove_fraction, "Fraction removed");
  auto* dup = app.add_subcommand("duplicate", "Mislabelled duplication");
  dup->add_option("--targets", f.targets, "Target rows");
  dup->add_option("--copies", f.copies, "Copies per target");
  auto* augment = app.add_subcommand("augment", "Importance shift after augmentation");
  augment->add_option("--count", f.count, "Rows augmented");
  augment->add_option("--transforms", f.transforms, "hflip, vflip")->delimiter(',');
  augment->add_option("--mode", f.mode, "replace or add");
  auto* shadow = app.add_subcommand("shadow", "Importance from a subset context");
  shadow->add_option("--fraction", f.shadow_fraction, "Context fraction");
  auto* report = app.add_subcommand("report", "ROC and advantage from a scores CSV");
  report->add_option("--scores", f.scores, "CSV with score and is_member columns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  ExperimentConfig cfg;
  fs::path base_dir = ".";
  if (!f.config.empty()) {
    auto loaded = shapval::LoadConfig(f.config);
    if (!loaded.ok()) {
      std::cerr << "shapval: " << loaded.status().ToString() << "\n";
      return kExitConfig;
    }
    cfg = *std::move(loaded);
    base_dir = fs::path(f.config).parent_path();
    if (base_dir.empty()) base_dir = ".";
  }
  Apply(f, cfg);
  ApplyRunLists(f, cmd, cfg);
  if (absl::Status s = cfg.Validate(); !s.ok()) {
    std::cerr << "shapval: " << s.ToString() << "\n";
    return kExitConfig;
  }

  std::error_code ec;
  fs::create_directories(f.out, ec);
  if (ec) {
    std::cerr << "shapval: cannot create " << f.out << ": " << ec.message() << "\n";
    return kExitRuntime;
  }
  SetupLogging(f.out);
  spdlog::info("{} seed={} threads={}", cmd, cfg.seed, f.threads);

  RunContext ctx;
  ctx.cfg = std::move(cfg);
  ctx.out = f.out;
  ctx.base_dir = base_dir;
  ctx.threads = f.threads;
  const int rc = Run(cmd, ctx);
  if (rc == 0) spdlog::info("{} done", cmd);
  return rc;
}
