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

#include "shapval/commands.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "json.hpp"
#include "spdlog/spdlog.h"
#include "shapval/status_macros.h"

namespace shapval {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Num(double v) { return absl::StrFormat("%.17g", v); }

absl::Status WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::InternalError(absl::StrCat("cannot write ", path.string()));
  out << text;
  out.close();
  if (!out) return absl::InternalError(absl::StrCat("short write to ", path.string()));
  return absl::OkStatus();
}

absl::Status WriteJson(const fs::path& path, const json& j) {
  return WriteText(path, j.dump(2) + "\n");
}

absl::Status MakeDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    return absl::InternalError(
        absl::StrCat("cannot create ", dir.string(), ": ", ec.message()));
  }
  return absl::OkStatus();
}

json TprJson(const std::map<double, double>& tpr_at) {
  json j = json::object();
  for (const auto& [fpr, tpr] : tpr_at) j[absl::StrFormat("%g", fpr)] = tpr;
  return j;
}

absl::Status WriteRoc(const fs::path& dir, const RocCurve& roc) {
  std::string raw = "fpr,tpr\n";
  for (const auto& p : roc.points) absl::StrAppend(&raw, Num(p.fpr), ",", Num(p.tpr), "\n");
  RETURN_IF_ERROR(WriteText(dir / "roc.csv", raw));
  std::string log = "fpr,tpr\n";
  for (const auto& p : LogSpacedRoc(roc)) {
    absl::StrAppend(&log, Num(p.fpr), ",", Num(p.tpr), "\n");
  }
  return WriteText(dir / "roc_log.csv", log);
}

json ReportJson(const AttackReport& r) {
  json fell_back = json::array();
  for (size_t c = 0; c < r.thresholds.fell_back.size(); ++c) {
    if (r.thresholds.fell_back[c]) fell_back.push_back(c);
  }
  const size_t members = std::count(r.is_member.begin(), r.is_member.end(), 1);
  return json{{"metric", r.metric},
              {"k_cal", r.k_cal},
              {"members", members},
              {"nonmembers", r.is_member.size() - members},
              {"accuracy", r.accuracy},
              {"adv", r.advantage},
              {"auc", r.roc.auc},
              {"tpr_at", TprJson(r.tpr_at)},
              {"thresholds", r.thresholds.thresholds},
              {"global_threshold", r.thresholds.global_threshold},
              {"global_fallback_classes", fell_back}};
}

absl::Status WriteAttackReport(const fs::path& dir, const AttackReport& r) {
  RETURN_IF_ERROR(MakeDir(dir));
  std::string csv = "id,score,is_member,importance_bin\n";
  for (size_t i = 0; i < r.ids.size(); ++i) {
    absl::StrAppend(&csv, r.ids[i], ",", Num(r.scores[i]), ",",
                    static_cast<int>(r.is_member[i]), ",", r.importance_bin[i], "\n");
  }
  RETURN_IF_ERROR(WriteText(dir / "scores.csv", csv));
  RETURN_IF_ERROR(WriteRoc(dir, r.roc));
  return WriteJson(dir / "summary.json", ReportJson(r));
}

absl::Status WriteDeltas(const fs::path& path, const DeltaReport& report) {
  std::string csv = "id,old,new,delta,group\n";
  for (const auto& r : report.rows) {
    absl::StrAppend(&csv, r.id, ",", Num(r.old_value), ",", Num(r.new_value), ",",
                    Num(r.delta), ",", r.group, "\n");
  }
  return WriteText(path, csv);
}

json GroupJson(const DeltaReport& report, const std::string& group) {
  const size_t n = report.GroupSize(group);
  const size_t up = report.CountIf(group, true);
  return json{{"size", n},
              {"increased", up},
              {"decreased", report.CountIf(group, false)},
              {"frac_increased", n ? static_cast<double>(up) / n : 0.0},
              {"mean_delta", report.MeanDelta(group)},
              {"mean_abs_delta", report.MeanAbsDelta(group)}};
}

struct Env {
  Dataset ds;
  SplitSet splits;
  ModelSpec spec;
  ValuationOptions vopts;
};

absl::StatusOr<Env> Prepare(const RunContext& ctx) {
  RETURN_IF_ERROR(WriteResolvedConfig(ctx));
  ASSIGN_OR_RETURN(Dataset ds, LoadDatasetFor(ctx.cfg, ctx.base_dir));
  ASSIGN_OR_RETURN(SplitSet splits, MakeSplits(ctx.cfg.splits, ds.size(), ctx.cfg.seed));
  ASSIGN_OR_RETURN(ModelSpec spec, ToModelSpec(ctx.cfg.model));
  ValuationOptions vopts;
  vopts.k = ctx.cfg.valuation.k;
  vopts.aggregation =
      ctx.cfg.valuation.aggregation == "sum" ? Aggregation::kSum : Aggregation::kMean;
  vopts.threads = ctx.threads;
  spdlog::info("dataset n={} d={} classes={}; train={} validation={} test={} "
               "shadow={} nonmember={}",
               ds.size(), ds.dim(), ds.class_count(), splits.train.size(),
               splits.validation.size(), splits.test.size(), splits.shadow.size(),
               splits.nonmember_pool.size());
  return Env{std::move(ds), std::move(splits), spec, vopts};
}

std::vector<size_t> SeededSample(std::span<const size_t> rows, size_t count,
                                 uint64_t seed) {
  std::vector<size_t> v(rows.begin(), rows.end());
  std::mt19937_64 rng(seed);
  std::shuffle(v.begin(), v.end(), rng);
  v.resize(std::min(count, v.size()));
  std::sort(v.begin(), v.end());
  return v;
}

template <typename T, typename Parse>
absl::StatusOr<std::vector<T>> ParseList(const std::vector<std::string>& names,
                                         Parse parse) {
  std::vector<T> out;
  for (const auto& n : names) {
    ASSIGN_OR_RETURN(T v, parse(n));
    out.push_back(v);
  }
  return out;
}

double Mean(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

}  // namespace

absl::Status WriteResolvedConfig(const RunContext& ctx) {
  RETURN_IF_ERROR(MakeDir(ctx.out));
  return WriteJson(ctx.out / "config.resolved.json", ConfigToJson(ctx.cfg));
}

absl::StatusOr<ValueOutcome> RunValue(const RunContext& ctx) {
  ASSIGN_OR_RETURN(Env env, Prepare(ctx));
  const auto& vc = ctx.cfg.valuation;
  ValueOutcome out;
  ASSIGN_OR_RETURN(out.importance, KnnShapley(env.ds, env.splits.train,
                                              env.splits.validation, env.vopts));
  RETURN_IF_ERROR(WriteImportanceCsv(out.importance, ctx.out / "importance.csv"));
  RETURN_IF_ERROR(SaveImportance(out.importance, ctx.out, "importance"));
  json summary = {{"n", out.importance.size()},
                  {"k", out.importance.k},
                  {"aggregation", vc.aggregation}};

  if (vc.bins > 0) {
    ASSIGN_OR_RETURN(Model model, Train(env.spec, env.ds, env.splits.train));
    ASSIGN_OR_RETURN(std::vector<double> loss,
                     PerSampleLoss(model, env.ds, env.splits.train));
    ASSIGN_OR_RETURN(out.loss_bins, BinnedStatistic(out.importance, loss, vc.bins));
    std::string csv = "bin,count,mean_importance,loss_sum\n";
    std::vector<double> rank, sums;
    for (const auto& b : out.loss_bins) {
      absl::StrAppend(&csv, b.bin, ",", b.count, ",", Num(b.mean_importance), ",",
                      Num(b.sum), "\n");
      rank.push_back(static_cast<double>(b.bin));
      sums.push_back(b.sum);
    }
    RETURN_IF_ERROR(WriteText(ctx.out / "loss_bins.csv", csv));
    if (out.loss_bins.size() >= 3) {
      ASSIGN_OR_RETURN(Correlation c, RankCorrelation(rank, sums));
      out.loss_trend_spearman = c.spearman;
      summary["loss_trend_spearman"] = c.spearman;
    }
  }

  if (vc.utility_fraction > 0.0 && vc.utility_seeds > 0) {
    const size_t n = env.splits.train.size();
    const size_t q = static_cast<size_t>(std::floor(vc.utility_fraction * n));
    if (q == 0) return absl::InvalidArgumentError("utility_fraction selects no rows");
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const auto& iv = out.importance;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (iv.values[a] != iv.values[b]) return iv.values[a] > iv.values[b];
      return iv.ids[a] < iv.ids[b];
    });
    std::vector<size_t> top, bottom;
    for (size_t i = 0; i < q; ++i) {
      top.push_back(env.splits.train[order[i]]);
      bottom.push_back(env.splits.train[order[n - 1 - i]]);
    }
    std::string csv = "seed,selection,accuracy\n";
    for (size_t s = 0; s < vc.utility_seeds; ++s) {
      ModelSpec spec = env.spec;
      spec.seed = env.spec.seed + s;
      ASSIGN_OR_RETURN(Model mt, Train(spec, env.ds, top));
      ASSIGN_OR_RETURN(Model mb, Train(spec, env.ds, bottom));
      ASSIGN_OR_RETURN(double at, EvaluateAccuracy(mt, env.ds, env.splits.test));
      ASSIGN_OR_RETURN(double ab, EvaluateAccuracy(mb, env.ds, env.splits.test));
      out.top_accuracy.push_back(at);
      out.bottom_accuracy.push_back(ab);
      absl::StrAppend(&csv, spec.seed, ",top,", Num(at), "\n", spec.seed, ",bottom,",
                      Num(ab), "\n");
    }
    RETURN_IF_ERROR(WriteText(ctx.out / "utility.csv", csv));
    summary["utility"] = {{"fraction", vc.utility_fraction},
                          {"top_mean_accuracy", Mean(out.top_accuracy)},
                          {"bottom_mean_accuracy", Mean(out.bottom_accuracy)}};
  }
  RETURN_IF_ERROR(WriteJson(ctx.out / "summary.json", summary));
  spdlog::info("valued {} samples", out.importance.size());
  return out;
}

absl::StatusOr<OracleOutcome> RunOracleCheck(const RunContext& ctx) {
  RETURN_IF_ERROR(WriteResolvedConfig(ctx));
  const auto& oc = ctx.cfg.oracle;
  OracleOutcome out;
  std::string csv = "seed,max_abs_diff\n";
  for (size_t s = 0; s < oc.seeds; ++s) {
    const uint64_t seed = ctx.cfg.seed * 1000003ULL + s;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::uniform_int_distribution<uint32_t> label(0, 2);
    const size_t rows = oc.n + oc.validation;
    DatasetParts parts;
    parts.dim = 2;
    parts.class_count = 3;
    for (size_t i = 0; i < rows; ++i) {
      parts.features.push_back(u(rng));
      parts.features.push_back(u(rng));
      parts.labels.push_back(label(rng));
      parts.ids.push_back(i);
    }
    ASSIGN_OR_RETURN(Dataset ds, Dataset::Create(std::move(parts)));
    std::vector<size_t> train(oc.n), val(oc.validation);
    std::iota(train.begin(), train.end(), 0);
    std::iota(val.begin(), val.end(), oc.n);
    ValuationOptions vo;
    vo.k = oc.k;
    vo.threads = ctx.threads;
    ASSIGN_OR_RETURN(ImportanceVector fast, KnnShapley(ds, train, val, vo));
    ASSIGN_OR_RETURN(ImportanceVector slow, ShapleyBruteForce(ds, train, val, vo));
    double worst = 0.0;
    for (size_t i = 0; i < fast.size(); ++i) {
      worst = std::max(worst, std::abs(fast.values[i] - slow.values[i]));
    }
    out.max_abs_diff = std::max(out.max_abs_diff, worst);
    ++out.instances;
    absl::StrAppend(&csv, seed, ",", Num(worst), "\n");
  }
  out.pass = out.max_abs_diff <= oc.tolerance;
  RETURN_IF_ERROR(WriteText(ctx.out / "oracle.csv", csv));
  RETURN_IF_ERROR(WriteJson(ctx.out / "oracle.json",
                            json{{"instances", out.instances},
                                 {"max_abs_diff", out.max_abs_diff},
                                 {"tolerance", oc.tolerance},
                                 {"pass", out.pass}}));
  return out;
}

absl::StatusOr<MiaOutcome> RunMia(const RunContext& ctx) {
  ASSIGN_OR_RETURN(Env env, Prepare(ctx));
  const auto& mc = ctx.cfg.mia;
  GameConfig gc;
  gc.seed = ctx.cfg.seed;
  gc.target = env.spec;
  gc.challenges = mc.challenges;
  gc.class_thresholds = mc.class_thresholds;
  gc.threads = ctx.threads;
  ASSIGN_OR_RETURN(gc.pgd.norm, ParseNorm(mc.norm));
  gc.pgd.step = mc.pgd_step;
  gc.pgd.max_iters = mc.pgd_max_iters;
  if (mc.adversary == "random") {
    gc.adversary = AdversaryKind::kRandom;
  } else if (mc.adversary == "oracle") {
    gc.adversary = AdversaryKind::kOracle;
  }
  std::vector<MetricKind> metrics;
  if (gc.adversary == AdversaryKind::kMetric) {
    ASSIGN_OR_RETURN(metrics, ParseList<MetricKind>(mc.metrics, [](const std::string& s) {
                       return ParseMetric(s);
                     }));
  } else {
    metrics.push_back(MetricKind::kConfidence);
  }

  ImportanceVector member_iv, universe_iv;
  if (mc.stratify > 0) {
    ASSIGN_OR_RETURN(member_iv, KnnShapley(env.ds, env.splits.train,
                                           env.splits.validation, env.vopts));
  }
  if (mc.calimem) {
    std::vector<size_t> universe = env.splits.train;
    universe.insert(universe.end(), env.splits.shadow.begin(), env.splits.shadow.end());
    universe.insert(universe.end(), env.splits.nonmember_pool.begin(),
                    env.splits.nonmember_pool.end());
    ASSIGN_OR_RETURN(universe_iv, KnnShapley(env.ds, universe,
                                             env.splits.validation, env.vopts));
  }

  MiaOutcome out;
  json summary = json::object();
  for (MetricKind metric : metrics) {
    gc.metric = metric;
    ASSIGN_OR_RETURN(MembershipGame game, MembershipGame::Setup(env.ds, env.splits, gc));
    MiaMetricOutcome mo;
    ASSIGN_OR_RETURN(mo.overall, game.PlayRandom());
    mo.metric = mo.overall.metric;
    const fs::path dir = ctx.out / mo.metric;
    RETURN_IF_ERROR(WriteAttackReport(dir, mo.overall));
    json ms = ReportJson(mo.overall);

    if (mc.stratify > 0) {
      ASSIGN_OR_RETURN(mo.strata, game.PlayStratified(member_iv, mc.stratify));
      std::string trend = "quintile,adv,tpr_at_0.1,auc,mean_member_score\n";
      std::vector<double> rank, adv;
      for (size_t s = 0; s < mo.strata.size(); ++s) {
        const auto& r = mo.strata[s];
        double sum = 0.0;
        size_t n = 0;
        for (size_t i = 0; i < r.scores.size(); ++i) {
          if (r.is_member[i]) {
            sum += r.scores[i];
            ++n;
          }
        }
        mo.mean_member_score.push_back(n ? sum / n : 0.0);
        RETURN_IF_ERROR(WriteAttackReport(dir / absl::StrCat("stratum_", s + 1), r));
        absl::StrAppend(&trend, s + 1, ",", Num(r.advantage), ",", Num(r.tpr_at.at(0.1)),
                        ",", Num(r.roc.auc), ",", Num(mo.mean_member_score.back()), "\n");
        rank.push_back(static_cast<double>(s));
        adv.push_back(r.advantage);
      }
      RETURN_IF_ERROR(WriteText(dir / "trend.csv", trend));
      if (mo.strata.size() >= 3) {
        auto c = RankCorrelation(rank, adv);
        mo.strata_spearman = c.ok() ? c->spearman : 0.0;
      }
      ms["strata_adv"] = adv;
      ms["strata_spearman"] = mo.strata_spearman;
      ms["strata_mean_member_score"] = mo.mean_member_score;
    }

    if (mc.calimem) {
      ASSIGN_OR_RETURN(auto rows, game.RandomChallenge());
      ASSIGN_OR_RETURN(mo.calibration,
                       SearchCalibration(game, universe_iv, rows.first, rows.second));
      mo.has_calibration = true;
      std::string csv = "k_cal,shadow_advantage,target_advantage\n";
      for (const auto& p : mo.calibration.grid) {
        absl::StrAppend(&csv, Num(p.k_cal), ",", Num(p.shadow_advantage), ",",
                        Num(p.target_advantage), "\n");
      }
      RETURN_IF_ERROR(WriteText(dir / "calimem.csv", csv));
      ms["calimem"] = {{"base_adv", mo.calibration.base_advantage},
                       {"selected_k", mo.calibration.selected_k},
                       {"selected_adv", mo.calibration.selected_advantage},
                       {"best_k", mo.calibration.best_k},
                       {"best_adv", mo.calibration.best_advantage}};
    }
    RETURN_IF_ERROR(WriteJson(dir / "summary.json", ms));
    summary[mo.metric] = ms;
    spdlog::info("mia {}: adv {:.4f} auc {:.4f}", mo.metric, mo.overall.advantage,
                 mo.overall.roc.auc);
    out.metrics.push_back(std::move(mo));
  }
  RETURN_IF_ERROR(WriteJson(ctx.out / "summary.json", summary));
  return out;
}

absl::StatusOr<StealOutcome> RunSteal(const RunContext& ctx) {
  ASSIGN_OR_RETURN(Env env, Prepare(ctx));
  const auto& sc = ctx.cfg.steal;
  ASSIGN_OR_RETURN(auto selections, ParseList<Selection>(sc.selections, [](const std::string& s) {
                     return ParseSelection(s);
                   }));
  ModelSpec surrogate = env.spec;
  if (!sc.surrogate_kind.empty()) {
    ASSIGN_OR_RETURN(surrogate.kind, ParseModelKind(sc.surrogate_kind));
  }
  StealOutcome out;
  ASSIGN_OR_RETURN(Model target, Train(env.spec, env.ds, env.splits.train));
  ASSIGN_OR_RETURN(out.target_accuracy,
                   EvaluateAccuracy(target, env.ds, env.splits.test));
  ASSIGN_OR_RETURN(ImportanceVector pool_iv, KnnShapley(env.ds, env.splits.shadow,
                                                        env.splits.validation, env.vopts));
  ASSIGN_OR_RETURN(out.rows, StealSweep(target, surrogate, env.ds, env.splits.shadow,
                                        pool_iv, env.ds, env.splits.test, sc.budgets,
                                        selections, sc.seeds, false, ctx.threads));
  out.summary = SummarizeSteal(out.rows);

  auto write_rows = [&](const fs::path& path, const std::vector<StealRow>& rows) {
    std::string csv = "budget,selection,seed,accuracy,query_class_entropy\n";
    for (const auto& r : rows) {
      absl::StrAppend(&csv, r.budget, ",", SelectionName(r.selection), ",", r.seed, ",",
                      Num(r.accuracy), ",", Num(r.query_class_entropy), "\n");
    }
    return WriteText(path, csv);
  };
  auto summary_json = [](const std::vector<StealSummary>& s) {
    json j = json::array();
    for (const auto& e : s) {
      j.push_back({{"budget", e.budget},
                   {"selection", SelectionName(e.selection)},
                   {"mean_accuracy", e.mean_accuracy},
                   {"min_accuracy", e.min_accuracy},
                   {"max_accuracy", e.max_accuracy}});
    }
    return j;
  };
  RETURN_IF_ERROR(write_rows(ctx.out / "steal.csv", out.rows));
  json summary = {{"target_accuracy", out.target_accuracy},
                  {"pool", env.splits.shadow.size()},
                  {"same_distribution", summary_json(out.summary)}};

  if (sc.cross_distribution) {
    GaussianMixtureParams gp = ToGeneratorParams(ctx.cfg.dataset.generator);
    gp.seed += sc.cross_seed_offset;
    gp.center_shift = sc.cross_center_shift ? sc.cross_center_shift : gp.dim / 2;
    const size_t pool_rows = sc.cross_pool ? sc.cross_pool : env.splits.shadow.size();
    // A fifth of the cross rows become its own validation split.
    const size_t total = pool_rows + pool_rows / 4;
    gp.per_class = (total + gp.classes - 1) / gp.classes;
    ASSIGN_OR_RETURN(Dataset cross, MakeGaussianMixture(gp));
    if (cross.dim() != env.ds.dim()) {
      return absl::InvalidArgumentError("cross-distribution dimension mismatch");
    }
    std::vector<size_t> perm(cross.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(ctx.cfg.seed + sc.cross_seed_offset);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<size_t> cpool(perm.begin(), perm.begin() + pool_rows);
    std::vector<size_t> cval(perm.begin() + pool_rows, perm.end());
    std::sort(cpool.begin(), cpool.end());
    std::sort(cval.begin(), cval.end());
    ASSIGN_OR_RETURN(ImportanceVector cross_iv, KnnShapley(cross, cpool, cval, env.vopts));
    ASSIGN_OR_RETURN(out.cross_rows,
                     StealSweep(target, surrogate, cross, cpool, cross_iv, env.ds,
                                env.splits.test, sc.budgets, selections, sc.seeds,
                                true, ctx.threads));
    out.cross_summary = SummarizeSteal(out.cross_rows);
    RETURN_IF_ERROR(write_rows(ctx.out / "steal_cross.csv", out.cross_rows));
    summary["cross_distribution"] = summary_json(out.cross_summary);
    summary["cross_pool"] = cpool.size();
  }
  RETURN_IF_ERROR(WriteJson(ctx.out / "summary.json", summary));
  return out;
}

absl::StatusOr<BackdoorOutcome> RunBackdoor(const RunContext& ctx) {
  ASSIGN_OR_RETURN(Env env, Prepare(ctx));
  const auto& bc = ctx.cfg.backdoor;
  ASSIGN_OR_RETURN(auto selections, ParseList<Selection>(bc.selections, [](const std::string& s) {
                     return ParseSelection(s);
                   }));
  BackdoorOutcome out;
  ASSIGN_OR_RETURN(ImportanceVector iv, KnnShapley(env.ds, env.splits.train,
                                                   env.splits.validation, env.vopts));
  ASSIGN_OR_RETURN(out.trigger, MakeTrigger(env.ds, bc.target_class, bc.trigger_size));
  std::vector<double> base;
  for (uint64_t seed : bc.seeds) {
    PoisonRun clean{0, Selection::kRandom, seed, env.spec};
    ASSIGN_OR_RETURN(PoisonResult r, PoisonAndTrain(env.ds, env.splits.train,
                                                    env.splits.test, iv, clean,
                                                    out.trigger));
    base.push_back(r.clean_accuracy);
  }
  out.baseline_clean_accuracy = Mean(base);
  ASSIGN_OR_RETURN(out.rows, PoisonSweep(env.ds, env.splits.train, env.splits.test, iv,
                                         env.spec, out.trigger, bc.budgets, selections,
                                         bc.seeds, ctx.threads));
  std::string csv = "budget,selection,seed,asr,clean_acc\n";
  for (const auto& r : out.rows) {
    absl::StrAppend(&csv, r.budget, ",", SelectionName(r.selection), ",", r.seed, ",",
                    Num(r.asr), ",", Num(r.clean_accuracy), "\n");
  }
  RETURN_IF_ERROR(WriteText(ctx.out / "backdoor.csv", csv));
  ASSIGN_OR_RETURN(auto positions, TriggerPositions(out.trigger, env.ds.dim()));
  json summary = {{"baseline_clean_accuracy", out.baseline_clean_accuracy},
                  {"trigger",
                   {{"size", out.trigger.size},
                    {"value", out.trigger.value},
                    {"target_class", out.trigger.target_class},
                    {"positions", positions.size()},
                    {"tabular", !out.trigger.shape.has_value()}}}};

  if (!bc.fractions.empty()) {
    std::string fcsv = "fraction,seed,pearson,spearman\n";
    for (double f : bc.fractions) {
      for (size_t s = 0; s < bc.fraction_seeds; ++s) {
        const uint64_t seed = ctx.cfg.seed + s;
        ASSIGN_OR_RETURN(FractionImportance fi,
                         FractionImportanceFor(env.ds, env.splits.train,
                                               env.splits.validation, iv, f, seed,
                                               env.vopts));
        out.fractions.push_back({f, seed, fi.correlation});
        absl::StrAppend(&fcsv, Num(f), ",", seed, ",", Num(fi.correlation.pearson), ",",
                        Num(fi.correlation.spearman), "\n");
      }
    }
    RETURN_IF_ERROR(WriteText(ctx.out / "fraction.csv", fcsv));
  }
  RETURN_IF_ERROR(WriteJson(ctx.out / "summary.json", summary));
  return out;
}

absl::StatusOr<OnionOutcome> RunOnion(const RunContext& ctx) {
  ASSIGN_OR_RETURN(Env env, Prepare(ctx));
  const auto& oc = ctx.cfg.onion;
  ASSIGN_OR_RETURN(ImportanceVector iv, KnnShapley(env.ds, env.splits.train,
                                                   env.splits.validation, env.vopts));
  const size_t rc = static_cast<size_t>(
      std::floor(oc.remove_fraction * static_cast<double>(env.splits.train.size())));
  OnionOutcome out;
  json summary = {{"remove_count", rc}};
  const std::vector<uint64_t>* first_band = nullptr;
  for (const auto& side_name : oc.sides) {
    const RemoveSide side = side_name == "top" ? RemoveSide::kTop : RemoveSide::kBottom;
    ASSIGN_OR_RETURN(OnionResult r, OnionEffect(env.ds, env.splits.train,
                                                env.splits.validation, iv, side, rc,
                                                env.vopts));
    RETURN_IF_ERROR(WriteDeltas(ctx.out / absl::StrCat("onion_", side_name, ".csv"),
                                r.deltas));
    summary[side_name] = {{"band", r.band_ids.size()},
                          {"frac_increased", r.frac_increased},
                          {"frac_decreased", r.frac_decreased}};
    auto [it, inserted] = out.arms.emplace(side_name, std::move(r));
    if (first_band == nullptr) {
      first_band = &it->second.band_ids;
    } else if (*first_band != it->second.band_ids) {
      out.band_identical = false;
    }
  }
  summary["band_identical"] = out.band_identical;
  RETURN_IF_ERROR(WriteJson(ctx.out / "onion.json", summary));
  return out;
}

absl::StatusOr<DuplicationResult> RunDuplicate(const RunContext& ctx) {
  ASSIGN_OR_RETURN(Env env, Prepare(ctx));
  const auto& dc = ctx.cfg.duplicate;
  if (dc.targets > env.splits.train.size()) {
    return absl::InvalidArgumentError("more duplication targets than training rows");
  }
  const auto targets = SeededSample(env.splits.train, dc.targets, ctx.cfg.seed);
  ASSIGN_OR_RETURN(DuplicationResult r,
                   DuplicateMislabel(env.ds, env.splits.train, env.splits.validation,
                                     targets, dc.copies, ctx.cfg.seed + 1, env.vopts));
  RETURN_IF_ERROR(WriteDeltas(ctx.out / "duplicate.csv", r.deltas));
  const double target_mean = r.deltas.MeanDelta("target");
  const double control_abs = r.deltas.MeanAbsDelta("control");
  RETURN_IF_ERROR(WriteJson(
      ctx.out / "duplicate.json",
      json{{"copies", dc.copies},
           {"target", GroupJson(r.deltas, "target")},
           {"control", GroupJson(r.deltas, "control")},
           {"control_to_target_ratio",
            target_mean != 0.0 ? control_abs / target_mean : 0.0}}));
  return r;
}

absl::StatusOr<DeltaReport> RunAugment(const RunContext& ctx) {
  ASSIGN_OR_RETURN(Env env, Prepare(ctx));
  const auto& ac = ctx.cfg.augment;
  ASSIGN_OR_RETURN(auto transforms, ParseList<Transform>(ac.transforms, [](const std::string& s) {
                     return ParseTransform(s);
                   }));
  if (ac.count > env.splits.train.size()) {
    return absl::InvalidArgumentError("augment.count exceeds the training split");
  }
  const auto rows = SeededSample(env.splits.train, ac.count, ctx.cfg.seed);
  const AugmentMode mode = ac.mode == "add" ? AugmentMode::kAdd : AugmentMode::kReplace;
  ASSIGN_OR_RETURN(DeltaReport r,
                   AugmentationImpact(env.ds, env.splits.train, env.splits.validation,
                                      rows, transforms, mode, env.vopts));
  RETURN_IF_ERROR(WriteDeltas(ctx.out / "augment.csv", r));
  json groups = json::object();
  for (const char* g : {"augmented", "other", "original", "added"}) {
    if (r.GroupSize(g) > 0) groups[g] = GroupJson(r, g);
  }
  RETURN_IF_ERROR(WriteJson(ctx.out / "augment.json",
                            json{{"mode", ac.mode}, {"groups", groups}}));
  return r;
}

absl::StatusOr<ShadowImportance> RunShadow(const RunContext& ctx) {
  ASSIGN_OR_RETURN(Env env, Prepare(ctx));
  const size_t m = static_cast<size_t>(std::lround(
      ctx.cfg.shadow.fraction * static_cast<double>(env.splits.train.size())));
  const auto shadow = SeededSample(env.splits.train, m, ctx.cfg.seed);
  ASSIGN_OR_RETURN(ShadowImportance r,
                   ShadowImportanceFor(env.ds, env.splits.train, shadow,
                                       env.splits.validation, env.vopts));
  std::string csv = "id,full,shadow\n";
  for (size_t i = 0; i < r.full.size(); ++i) {
    absl::StrAppend(&csv, r.full.ids[i], ",", Num(r.full.values[i]), ",",
                    Num(r.shadow.values[i]), "\n");
  }
  RETURN_IF_ERROR(WriteText(ctx.out / "shadow.csv", csv));
  RETURN_IF_ERROR(WriteJson(ctx.out / "shadow.json",
                            json{{"full_context", env.splits.train.size()},
                                 {"shadow_context", shadow.size()},
                                 {"pearson", r.correlation.pearson},
                                 {"spearman", r.correlation.spearman}}));
  return r;
}

absl::StatusOr<ReportOutcome> RunReport(const RunContext& ctx) {
  RETURN_IF_ERROR(WriteResolvedConfig(ctx));
  fs::path path = ctx.cfg.report.scores;
  if (path.empty()) return absl::InvalidArgumentError("report needs a scores file");
  if (path.is_relative()) path = ctx.base_dir / path;
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot read ", path.string()));
  std::string line;
  if (!std::getline(in, line)) return absl::InvalidArgumentError("empty scores file");
  const std::vector<std::string> header = absl::StrSplit(line, ',');
  auto col = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int c_score = col("score"), c_member = col("is_member");
  if (c_score < 0 || c_member < 0) {
    return absl::InvalidArgumentError("scores file needs score and is_member columns");
  }
  std::vector<double> scores;
  std::vector<uint8_t> bits;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> f = absl::StrSplit(line, ',');
    if (f.size() != header.size()) {
      return absl::InvalidArgumentError(absl::StrFormat("line %d: wrong field count", lineno));
    }
    char* end = nullptr;
    const double s = std::strtod(f[c_score].c_str(), &end);
    if (end == f[c_score].c_str() || *end != '\0' || !std::isfinite(s)) {
      return absl::InvalidArgumentError(absl::StrFormat("line %d: bad score", lineno));
    }
    if (f[c_member] != "0" && f[c_member] != "1") {
      return absl::InvalidArgumentError(absl::StrFormat("line %d: is_member must be 0 or 1", lineno));
    }
    scores.push_back(s);
    bits.push_back(f[c_member] == "1");
  }
  ReportOutcome out;
  ASSIGN_OR_RETURN(out.roc, Roc(scores, bits));
  for (double f : {1e-3, 1e-2, 1e-1}) out.tpr_at[f] = TprAtFpr(out.roc, f);
  MembershipScore ms{std::vector<uint64_t>(scores.size()), scores, "report"};
  std::vector<uint32_t> zeros(scores.size(), 0);
  ASSIGN_OR_RETURN(ThresholdTable table, FitThresholds(ms, bits, zeros, 1));
  out.advantage = Advantage(ThresholdAccuracy(table, scores, bits, zeros));
  RETURN_IF_ERROR(WriteRoc(ctx.out, out.roc));
  RETURN_IF_ERROR(WriteJson(ctx.out / "summary.json",
                            json{{"auc", out.roc.auc},
                                 {"adv", out.advantage},
                                 {"tpr_at", TprJson(out.tpr_at)}}));
  return out;
}

}  // namespace shapval
