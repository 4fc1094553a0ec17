// Copyright 2026 The FedCL Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Strategy x run experiment matrix, report serialization (JSON, text table,
// learning-curve CSV) and optional acceptance checks.

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fedcl/federated.hpp"
#include "fedcl/harness/config.hpp"
#include "fedcl/metrics.hpp"
#include "json.hpp"

namespace fedcl::harness {

inline constexpr const char* kToolName = "fedcl";
inline constexpr const char* kToolVersion = "1.0.0";

struct RunResult {
  std::size_t run = 0;
  Seed seed = 0;
  MetricsReport metrics;
  std::vector<std::vector<double>> accuracy_matrix;
  ForgettingMeasures forgetting;
  /// Global accuracy after each round, task-major (tasks x rounds entries).
  std::vector<double> curve;
  double wall_time_s = 0.0;
};

struct RunFailure {
  std::string strategy;
  std::size_t run = 0;
  std::string error;
};

struct StrategyReport {
  std::string label;
  StrategyKind kind;
  std::vector<RunResult> runs;  // successful runs, by run index
  std::optional<RunAggregate> aggregate;
  MeanStd average_accuracy;
  MeanStd average_forgetting;
};

struct ExperimentReport {
  nlohmann::ordered_json config_echo;
  std::vector<StrategyReport> strategies;  // config order
  std::vector<RunFailure> failures;
  std::size_t tasks = 0;
  std::size_t rounds = 0;
  double wall_time_s = 0.0;
};

// ---------------------------------------------------------------------------
// Running

/// Run seed shared by every strategy, so strategies are compared on the same
/// data, shards and initialization.
inline Seed run_seed(const ExperimentConfig& cfg, std::size_t run) {
  return derive_seed(cfg.master_seed, {stream::kRun, run});
}

/// Task sequence of one run: generate, rebalance (global SMOTE), split into tasks.
inline TaskSequence build_tasks(const ExperimentConfig& cfg, Seed seed) {
  const DataConfig& d = cfg.data;
  Dataset data = gen_gaussian_clusters(derive_seed(seed, {stream::kData}), d.class_count, d.class_counts,
                                       d.feature_dim, d.cluster_spread);
  if (d.smote_enabled && d.smote_mode == DataConfig::SmoteMode::global) {
    ClassDistribution targets = d.smote_targets;
    if (targets.empty()) {
      const std::size_t top = *std::max_element(d.class_counts.begin(), d.class_counts.end());
      targets.assign(d.class_count, top);
    }
    data = smote(data, d.smote_k, targets, derive_seed(seed, {stream::kSmote}));
  }
  if (d.regime == TaskRegime::class_incremental)
    return make_class_incremental_tasks(data, d.task_groups, d.test_fraction, derive_seed(seed, {stream::kSplit}));
  return make_data_incremental_tasks(data, d.task_count, d.test_fraction, derive_seed(seed, {stream::kSplit}));
}

inline TrainingConfig training_config(const ExperimentConfig& cfg, const StrategyKind& kind, Seed seed) {
  TrainingConfig t;
  t.spec = cfg.model_spec();
  t.round.rounds = cfg.federation.rounds;
  t.round.local_epochs = cfg.federation.local_epochs;
  t.round.node_count = cfg.federation.nodes;
  t.round.participation = cfg.federation.participation;
  t.round.lr = cfg.model.lr;
  t.round.batch_size = cfg.model.batch_size;
  t.round.seed = seed;
  t.strategy = kind;
  t.cipher_mode = cfg.cipher.mode;
  t.cipher_seed = cfg.cipher_seed();
  t.proportions = cfg.data.proportions;
  t.sharding.label_skew = cfg.data.label_skew;
  t.per_node_smote = cfg.data.smote_enabled && cfg.data.smote_mode == DataConfig::SmoteMode::per_node;
  t.smote_k = cfg.data.smote_k;
  return t;
}

inline RunResult run_one(const ExperimentConfig& cfg, const StrategyKind& kind, std::size_t run) {
  const auto start = std::chrono::steady_clock::now();
  RunResult r;
  r.run = run;
  r.seed = run_seed(cfg, run);
  const TaskSequence tasks = build_tasks(cfg, r.seed);
  const TrainingHistory h = run_training(tasks, training_config(cfg, kind, r.seed));
  r.metrics = report(h.final_confusion);
  r.accuracy_matrix = h.accuracy_matrix;
  r.forgetting = forgetting_measures(h.accuracy_matrix);
  for (const RoundReport& rr : h.rounds) r.curve.push_back(rr.global_accuracy);
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg);

/// Every strategy x run, on up to `jobs` threads. Results are assembled in
/// config order whatever the completion order; failed runs are recorded and
/// the rest still reported.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t S = cfg.strategies.size(), R = cfg.runs_per_strategy;
  std::vector<std::optional<RunResult>> results(S * R);
  std::vector<std::string> errors(S * R);

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < S * R; i = next++) {
      try {
        results[i] = run_one(cfg, cfg.strategies[i / R].kind, i % R);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, S * R);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentReport rep;
  rep.config_echo = config_to_json(cfg);
  rep.rounds = cfg.federation.rounds;
  rep.tasks = cfg.data.regime == TaskRegime::class_incremental ? cfg.data.task_groups.size() : cfg.data.task_count;
  for (std::size_t s = 0; s < S; ++s) {
    StrategyReport sr{cfg.strategies[s].label, cfg.strategies[s].kind, {}, std::nullopt, {}, {}};
    for (std::size_t r = 0; r < R; ++r) {
      if (results[s * R + r]) {
        sr.runs.push_back(std::move(*results[s * R + r]));
      } else {
        rep.failures.push_back({sr.label, r, errors[s * R + r]});
      }
    }
    if (!sr.runs.empty()) {
      std::vector<MetricsReport> m;
      std::vector<double> aa, af;
      for (const auto& run : sr.runs) {
        m.push_back(run.metrics);
        aa.push_back(run.forgetting.average_accuracy);
        af.push_back(run.forgetting.average_forgetting);
      }
      sr.aggregate = aggregate_runs(m);
      sr.average_accuracy = mean_std(aa);
      sr.average_forgetting = mean_std(af);
    }
    rep.strategies.push_back(std::move(sr));
  }
  rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::ordered_json strategy_to_json(const StrategyKind& kind) {
  using nlohmann::ordered_json;
  return std::visit(Overloaded{
                        [](const NaiveStrategy&) { return ordered_json{{"name", "naive"}}; },
                        [](const EwcStrategy& s) { return ordered_json{{"name", "ewc"}, {"lambda", s.lambda}}; },
                        [](const ReplayStrategy& s) {
                          return ordered_json{{"name", "replay"},
                                              {"buffer_capacity", s.buffer_capacity},
                                              {"mix_fraction", s.mix_fraction}};
                        },
                        [](const CumulativeStrategy&) { return ordered_json{{"name", "cumulative"}}; },
                        [](const LwfStrategy& s) {
                          return ordered_json{{"name", "lwf"}, {"temperature", s.temperature}, {"alpha", s.alpha}};
                        },
                    },
                    kind);
}

inline StrategyKind strategy_from_json(const nlohmann::json& j) {
  const std::string name = j.at("name");
  if (name == "naive") return NaiveStrategy{};
  if (name == "ewc") return EwcStrategy{j.at("lambda").get<double>()};
  if (name == "replay") return ReplayStrategy{j.at("buffer_capacity").get<std::size_t>(), j.at("mix_fraction").get<double>()};
  if (name == "cumulative") return CumulativeStrategy{};
  if (name == "lwf") return LwfStrategy{j.at("temperature").get<double>(), j.at("alpha").get<double>()};
  throw Error("report: unknown strategy '" + name + "'");
}

/// Config echo. The cipher key itself is never written, only its seed.
inline nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
  using nlohmann::ordered_json;
  const DataConfig& d = cfg.data;
  ordered_json data{{"feature_dim", d.feature_dim},
                    {"class_count", d.class_count},
                    {"cluster_spread", d.cluster_spread},
                    {"class_counts", d.class_counts},
                    {"smote",
                     {{"enabled", d.smote_enabled},
                      {"mode", d.smote_mode == DataConfig::SmoteMode::global ? "global" : "per_node"},
                      {"k_neighbors", d.smote_k},
                      {"targets", d.smote_targets}}},
                    {"test_fraction", d.test_fraction},
                    {"tasks",
                     {{"regime", d.regime == TaskRegime::class_incremental ? "class_incremental" : "data_incremental"},
                      {"groups", d.task_groups},
                      {"count", d.task_count}}},
                    {"sharding", {{"proportions", d.proportions}, {"label_skew", d.label_skew}}}};
  ordered_json strategies = ordered_json::array();
  for (const auto& s : cfg.strategies) {
    ordered_json e{{"label", s.label}};
    e.update(strategy_to_json(s.kind));
    strategies.push_back(e);
  }
  return ordered_json{{"master_seed", cfg.master_seed},
                      {"runs_per_strategy", cfg.runs_per_strategy},
                      {"data", data},
                      {"model",
                       {{"hidden", cfg.model.hidden},
                        {"activation", to_string(cfg.model.activation)},
                        {"lr", cfg.model.lr},
                        {"batch_size", cfg.model.batch_size}}},
                      {"federation",
                       {{"nodes", cfg.federation.nodes},
                        {"rounds", cfg.federation.rounds},
                        {"local_epochs", cfg.federation.local_epochs},
                        {"participation", cfg.federation.participation}}},
                      {"cipher", {{"mode", to_string(cfg.cipher.mode)}, {"seed", cfg.cipher_seed()}}},
                      {"strategies", strategies}};
}

inline nlohmann::ordered_json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }
inline MeanStd mean_std_from_json(const nlohmann::json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

inline nlohmann::ordered_json metrics_json(const MetricsReport& m) {
  return {{"accuracy", m.accuracy},
          {"macro_precision", m.macro_precision},
          {"macro_recall", m.macro_recall},
          {"macro_f1", m.macro_f1},
          {"zero_denominator_classes", m.zero_denominator_classes}};
}

inline MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport m;
  m.accuracy = j.at("accuracy");
  m.macro_precision = j.at("macro_precision");
  m.macro_recall = j.at("macro_recall");
  m.macro_f1 = j.at("macro_f1");
  m.zero_denominator_classes = j.at("zero_denominator_classes").get<std::vector<std::size_t>>();
  return m;
}

/// Keys holding timing data; everything else in the report is a pure
/// function of the config.
inline constexpr const char* kWallTimeKey = "wall_time_s";

inline nlohmann::ordered_json to_json(const ExperimentReport& rep) {
  using nlohmann::ordered_json;
  ordered_json strategies = ordered_json::array();
  for (const StrategyReport& s : rep.strategies) {
    ordered_json runs = ordered_json::array();
    for (const RunResult& r : s.runs)
      runs.push_back({{"run", r.run},
                      {"seed", r.seed},
                      {"metrics", metrics_json(r.metrics)},
                      {"accuracy_matrix", r.accuracy_matrix},
                      {"average_accuracy", r.forgetting.average_accuracy},
                      {"average_forgetting", r.forgetting.average_forgetting},
                      {"curve", r.curve},
                      {kWallTimeKey, r.wall_time_s}});
    ordered_json e{{"label", s.label}, {"strategy", strategy_to_json(s.kind)}};
    if (std::holds_alternative<CumulativeStrategy>(s.kind))
      e["note"] = "retains all past data on every node (privacy-unfriendly upper baseline)";
    if (s.aggregate) {
      e["aggregate"] = {{"runs", s.aggregate->runs},
                        {"std_undefined", s.aggregate->std_undefined},
                        {"accuracy", mean_std_json(s.aggregate->accuracy)},
                        {"macro_precision", mean_std_json(s.aggregate->macro_precision)},
                        {"macro_recall", mean_std_json(s.aggregate->macro_recall)},
                        {"macro_f1", mean_std_json(s.aggregate->macro_f1)}};
      e["average_accuracy"] = mean_std_json(s.average_accuracy);
      e["average_forgetting"] = mean_std_json(s.average_forgetting);
    } else {
      e["aggregate"] = nullptr;
    }
    e["runs"] = runs;
    strategies.push_back(e);
  }
  ordered_json failures = ordered_json::array();
  for (const auto& f : rep.failures) failures.push_back({{"strategy", f.strategy}, {"run", f.run}, {"error", f.error}});
  return {{"tool", {{"name", kToolName}, {"version", kToolVersion}}},
          {"config", rep.config_echo},
          {"tasks", rep.tasks},
          {"rounds", rep.rounds},
          {"strategies", strategies},
          {"failures", failures},
          {kWallTimeKey, rep.wall_time_s}};
}

inline ExperimentReport from_json(const nlohmann::json& j) {
  ExperimentReport rep;
  rep.config_echo = j.at("config");
  rep.tasks = j.at("tasks");
  rep.rounds = j.at("rounds");
  rep.wall_time_s = j.value(kWallTimeKey, 0.0);
  for (const auto& s : j.at("strategies")) {
    StrategyReport sr{s.at("label"), strategy_from_json(s.at("strategy")), {}, std::nullopt, {}, {}};
    for (const auto& r : s.at("runs")) {
      RunResult rr;
      rr.run = r.at("run");
      rr.seed = r.at("seed");
      rr.metrics = metrics_from_json(r.at("metrics"));
      rr.accuracy_matrix = r.at("accuracy_matrix").get<std::vector<std::vector<double>>>();
      rr.forgetting = {r.at("average_accuracy").get<double>(), r.at("average_forgetting").get<double>()};
      rr.curve = r.at("curve").get<std::vector<double>>();
      rr.wall_time_s = r.value(kWallTimeKey, 0.0);
      sr.runs.push_back(std::move(rr));
    }
    if (const auto& a = s.at("aggregate"); !a.is_null()) {
      RunAggregate agg;
      agg.runs = a.at("runs");
      agg.std_undefined = a.at("std_undefined");
      agg.accuracy = mean_std_from_json(a.at("accuracy"));
      agg.macro_precision = mean_std_from_json(a.at("macro_precision"));
      agg.macro_recall = mean_std_from_json(a.at("macro_recall"));
      agg.macro_f1 = mean_std_from_json(a.at("macro_f1"));
      sr.aggregate = agg;
      sr.average_accuracy = mean_std_from_json(s.at("average_accuracy"));
      sr.average_forgetting = mean_std_from_json(s.at("average_forgetting"));
    }
    rep.strategies.push_back(std::move(sr));
  }
  for (const auto& f : j.at("failures")) rep.failures.push_back({f.at("strategy"), f.at("run"), f.at("error")});
  return rep;
}

/// Copy of a serialized report with every wall-time field removed.
inline nlohmann::ordered_json strip_wall_time(nlohmann::ordered_json j) {
  if (j.is_object()) {
    j.erase(kWallTimeKey);
    for (auto& [k, v] : j.items()) v = strip_wall_time(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_wall_time(v);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Text table and CSV

/// "97.8 ± 0.42": mean with one decimal and std with two, both in percent.
inline std::string format_cell(const MeanStd& m, bool single_run) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f ± %.2f%s", 100.0 * m.mean, 100.0 * m.std, single_run ? "*" : "");
  return buf;
}

namespace detail {
/// Display width of UTF-8 text (counts code points).
inline std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}
inline std::string pad(const std::string& s, std::size_t width) {
  return s + std::string(width > display_width(s) ? width - display_width(s) : 0, ' ');
}
}  // namespace detail

inline std::string render_table(const ExperimentReport& rep) {
  const std::vector<std::string> header{"Strategy",       "Accuracy (%)",      "Precision (%)", "Recall (%)",
                                        "F1 Score (%)",   "Avg. accuracy (%)", "Forgetting (%)"};
  std::vector<std::vector<std::string>> rows{header};
  bool any_single = false, any_cumulative = false;
  for (const StrategyReport& s : rep.strategies) {
    std::string label = s.label;
    if (std::holds_alternative<CumulativeStrategy>(s.kind)) {
      label += " †";
      any_cumulative = true;
    }
    if (!s.aggregate) {
      rows.push_back({label, "failed", "failed", "failed", "failed", "failed", "failed"});
      continue;
    }
    const bool single = s.aggregate->std_undefined;
    any_single = any_single || single;
    rows.push_back({label, format_cell(s.aggregate->accuracy, single), format_cell(s.aggregate->macro_precision, single),
                    format_cell(s.aggregate->macro_recall, single), format_cell(s.aggregate->macro_f1, single),
                    format_cell(s.average_accuracy, single), format_cell(s.average_forgetting, single)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], detail::display_width(row[c]));
  std::ostringstream os;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (c) os << " | ";
      os << (c + 1 == rows[r].size() ? rows[r][c] : detail::pad(rows[r][c], width[c]));
    }
    os << '\n';
    if (r == 0) {
      for (std::size_t c = 0; c < width.size(); ++c) os << (c ? "-|-" : "") << std::string(width[c], '-');
      os << '\n';
    }
  }
  if (any_single) os << "* single run: standard deviation undefined, shown as 0.00\n";
  if (any_cumulative) os << "† retains all past data on every node (privacy-unfriendly upper baseline)\n";
  for (const auto& f : rep.failures) os << "! " << f.strategy << " run " << f.run << " failed: " << f.error << '\n';
  return os.str();
}

inline std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// Columns: strategy, run, task, round, global_accuracy.
inline std::string render_curves(const ExperimentReport& rep) {
  std::ostringstream os;
  os << "strategy,run,task,round,global_accuracy\n";
  for (const StrategyReport& s : rep.strategies)
    for (const RunResult& r : s.runs)
      for (std::size_t i = 0; i < r.curve.size(); ++i)
        os << s.label << ',' << r.run << ',' << i / rep.rounds << ',' << i % rep.rounds << ','
           << format_double(r.curve[i]) << '\n';
  return os.str();
}

inline void write_outputs(const ExperimentReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / name).string());
    out << text;
  };
  write("report.json", to_json(rep).dump(2) + "\n");
  write("table.txt", render_table(rep));
  write("curves.csv", render_curves(rep));
}

// ---------------------------------------------------------------------------
// Acceptance checks

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

inline const StrategyReport* find_strategy(const ExperimentReport& rep, const std::string& label) {
  for (const auto& s : rep.strategies)
    if (s.label == label) return &s;
  return nullptr;
}

inline std::vector<CheckResult> check_acceptance(const ExperimentReport& rep, const AcceptanceConfig& acc) {
  std::vector<CheckResult> out;
  const StrategyReport* base = find_strategy(rep, acc.baseline);
  const auto pct = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * x);
    return std::string(buf);
  };
  if (!base || !base->aggregate) {
    out.push_back({"baseline " + acc.baseline, false, "baseline has no successful runs"});
    return out;
  }
  if (acc.min_baseline_forgetting) {
    const double f = base->average_forgetting.mean;
    out.push_back({"baseline forgetting", f >= *acc.min_baseline_forgetting,
                   acc.baseline + " forgetting " + pct(f) + " pts (need >= " + pct(*acc.min_baseline_forgetting) + ")"});
  }
  if (acc.min_gain_over_baseline) {
    for (const auto& label : acc.gain_strategies) {
      const StrategyReport* s = find_strategy(rep, label);
      if (!s || !s->aggregate) {
        out.push_back({"gain " + label, false, "no successful runs"});
        continue;
      }
      const double gain = s->average_accuracy.mean - base->average_accuracy.mean;
      out.push_back({"gain " + label, gain >= *acc.min_gain_over_baseline,
                     label + " average accuracy " + pct(gain) + " pts above " + acc.baseline + " (need >= " +
                         pct(*acc.min_gain_over_baseline) + ")"});
    }
  }
  return out;
}

}  // namespace fedcl::harness
