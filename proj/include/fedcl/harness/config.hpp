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

// Experiment configuration: a YAML document whose sections mirror the
// library modules (data, model, federation, cipher, strategies).

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fedcl/cipher.hpp"
#include "fedcl/continual.hpp"
#include "fedcl/data.hpp"
#include "fedcl/error.hpp"
#include "fedcl/random.hpp"

namespace fedcl::harness {

class ConfigError : public Error {
 public:
  enum class Kind { missing_file, syntax, validation };

  ConfigError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

  /// Process exit code for this failure.
  int exit_code() const {
    switch (kind_) {
      case Kind::validation: return 2;
      case Kind::syntax: return 5;
      case Kind::missing_file: return 6;
    }
    return 2;
  }

 private:
  Kind kind_;
};

struct DataConfig {
  std::size_t feature_dim = 8;
  std::size_t class_count = 4;
  double cluster_spread = 0.5;
  /// Samples generated per class before rebalancing (the imbalance profile).
  ClassDistribution class_counts{400, 280, 112, 8};
  bool smote_enabled = true;
  enum class SmoteMode { global, per_node } smote_mode = SmoteMode::global;
  std::size_t smote_k = 5;
  /// Empty means "every class up to the largest class".
  ClassDistribution smote_targets;
  double test_fraction = 0.2;
  TaskRegime regime = TaskRegime::class_incremental;
  std::vector<std::vector<std::size_t>> task_groups{{0, 1}, {2, 3}};
  std::size_t task_count = 2;  // data_incremental only
  std::vector<double> proportions;  // empty means equal
  double label_skew = 0.0;
};

struct ModelConfig {
  std::vector<std::size_t> hidden{16};
  Activation activation = Activation::relu;
  double lr = 0.05;
  std::size_t batch_size = 32;
};

struct FederationConfig {
  std::size_t nodes = 5;
  std::size_t rounds = 20;
  std::size_t local_epochs = 50;
  double participation = 1.0;
};

struct CipherConfig {
  CipherMode mode = CipherMode::permute_affine;
  std::optional<Seed> seed;  // defaults to a seed derived from master_seed
};

struct StrategyConfig {
  std::string label;
  StrategyKind kind;
};

/// Optional pass/fail checks evaluated after a run.
struct AcceptanceConfig {
  std::string baseline;
  std::optional<double> min_baseline_forgetting;
  std::optional<double> min_gain_over_baseline;
  std::vector<std::string> gain_strategies;
};

struct ExperimentConfig {
  Seed master_seed = 0;
  std::size_t runs_per_strategy = 1;
  std::string output_dir = "fedcl-out";
  DataConfig data;
  ModelConfig model;
  FederationConfig federation;
  CipherConfig cipher;
  std::vector<StrategyConfig> strategies;
  std::optional<AcceptanceConfig> acceptance;

  Seed cipher_seed() const { return cipher.seed.value_or(derive_seed(master_seed, {0xc1f3})); }
  ModelSpec model_spec() const {
    std::vector<std::size_t> sizes{data.feature_dim};
    sizes.insert(sizes.end(), model.hidden.begin(), model.hidden.end());
    sizes.push_back(data.class_count);
    return ModelSpec(sizes, model.activation);
  }
};

inline const std::vector<std::string>& strategy_names() {
  static const std::vector<std::string> names{"naive", "ewc", "replay", "cumulative", "lwf"};
  return names;
}

namespace detail {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& field, const std::string& msg) const {
    std::ostringstream os;
    os << source_;
    if (at.IsDefined() && at.Mark().line >= 0) os << ':' << at.Mark().line + 1;
    os << ": " << field << ": " << msg;
    throw ConfigError(ConfigError::Kind::validation, os.str());
  }

  void check_keys(const YAML::Node& map, const std::string& where, const std::set<std::string>& allowed) const {
    if (!map.IsMap()) fail(map, where, "expected a mapping");
    for (const auto& kv : map) {
      const std::string key = kv.first.as<std::string>();
      if (!allowed.count(key)) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        fail(kv.first, where.empty() ? key : where + "." + key, "unknown key (valid: " + list + ")");
      }
    }
  }

  template <class T>
  T scalar(const YAML::Node& node, const std::string& field) const {
    if (!node.IsScalar()) fail(node, field, "expected a scalar value");
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      fail(node, field, "cannot read '" + node.Scalar() + "' as " + type_name<T>());
    }
  }

  template <class T>
  void opt(const YAML::Node& map, const std::string& key, const std::string& where, T& out) const {
    if (const YAML::Node n = map[key]; n) out = scalar<T>(n, where + "." + key);
  }

  std::size_t positive(const YAML::Node& map, const std::string& key, const std::string& where,
                       std::size_t fallback) const {
    const YAML::Node n = map[key];
    if (!n) return fallback;
    const auto v = scalar<long long>(n, where + "." + key);
    if (v <= 0) fail(n, where + "." + key, "must be a positive integer (got " + std::to_string(v) + ")");
    return static_cast<std::size_t>(v);
  }

  std::size_t non_negative(const YAML::Node& n, const std::string& field) const {
    const auto v = scalar<long long>(n, field);
    if (v < 0) fail(n, field, "must be non-negative (got " + std::to_string(v) + ")");
    return static_cast<std::size_t>(v);
  }

  double real(const YAML::Node& map, const std::string& key, const std::string& where, double fallback, double lo,
              double hi, bool lo_open = false) const {
    const YAML::Node n = map[key];
    if (!n) return fallback;
    const auto v = scalar<double>(n, where + "." + key);
    if (!std::isfinite(v) || v < lo || v > hi || (lo_open && v == lo)) {
      std::ostringstream os;
      os << "must be in " << (lo_open ? "(" : "[") << lo << ", " << hi << "] (got " << v << ")";
      fail(n, where + "." + key, os.str());
    }
    return v;
  }

  std::vector<std::size_t> index_list(const YAML::Node& n, const std::string& field) const {
    if (!n.IsSequence()) fail(n, field, "expected a list");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(non_negative(n[i], field + "[" + std::to_string(i) + "]"));
    return out;
  }

 private:
  template <class T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, double>) return "a real number";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else return "an integer";
  }

  std::string source_;
};

inline StrategyConfig read_strategy(const Reader& rd, const YAML::Node& n, const std::string& where) {
  if (!n.IsMap()) rd.fail(n, where, "expected a mapping with a 'name' key");
  const YAML::Node name_node = n["name"];
  if (!name_node) rd.fail(n, where, "missing 'name'");
  const auto name = rd.scalar<std::string>(name_node, where + ".name");
  StrategyConfig out;
  if (name == "naive") {
    rd.check_keys(n, where, {"name", "label"});
    out.kind = NaiveStrategy{};
  } else if (name == "ewc") {
    rd.check_keys(n, where, {"name", "label", "lambda"});
    out.kind = EwcStrategy{rd.real(n, "lambda", where, EwcStrategy{}.lambda, 0.0, 1e12)};
  } else if (name == "replay") {
    rd.check_keys(n, where, {"name", "label", "buffer_capacity", "mix_fraction"});
    ReplayStrategy r;
    r.buffer_capacity = rd.positive(n, "buffer_capacity", where, r.buffer_capacity);
    r.mix_fraction = rd.real(n, "mix_fraction", where, r.mix_fraction, 0.0, 1.0);
    out.kind = r;
  } else if (name == "cumulative") {
    rd.check_keys(n, where, {"name", "label"});
    out.kind = CumulativeStrategy{};
  } else if (name == "lwf") {
    rd.check_keys(n, where, {"name", "label", "temperature", "alpha"});
    LwfStrategy l;
    l.temperature = rd.real(n, "temperature", where, l.temperature, 1.0, 1e6);
    l.alpha = rd.real(n, "alpha", where, l.alpha, 0.0, 1.0);
    out.kind = l;
  } else {
    rd.fail(name_node, where + ".name", "unknown strategy '" + name + "' (valid: naive, ewc, replay, cumulative, lwf)");
  }
  out.label = name;
  rd.opt(n, "label", where, out.label);
  if (out.label.empty() || out.label.find_first_of(",\n\"") != std::string::npos)
    rd.fail(n["label"], where + ".label", "must be non-empty and contain no commas or quotes");
  return out;
}

inline ExperimentConfig read_config(const YAML::Node& root, const std::string& source) {
  const Reader rd(source);
  ExperimentConfig cfg;
  if (!root.IsMap()) rd.fail(root, "(root)", "expected a mapping");
  rd.check_keys(root, "", {"master_seed", "runs_per_strategy", "output_dir", "data", "model", "federation", "cipher",
                           "strategies", "acceptance"});
  if (root["master_seed"]) cfg.master_seed = rd.scalar<std::uint64_t>(root["master_seed"], "master_seed");
  cfg.runs_per_strategy = rd.positive(root, "runs_per_strategy", "(root)", cfg.runs_per_strategy);
  rd.opt(root, "output_dir", "(root)", cfg.output_dir);

  DataConfig& d = cfg.data;
  if (const YAML::Node n = root["data"]) {
    rd.check_keys(n, "data", {"feature_dim", "class_count", "cluster_spread", "class_counts", "smote", "test_fraction",
                              "tasks", "sharding"});
    d.feature_dim = rd.positive(n, "feature_dim", "data", d.feature_dim);
    if (n["feature_dim"] && d.feature_dim < 2) rd.fail(n["feature_dim"], "data.feature_dim", "must be at least 2");
    d.class_count = rd.positive(n, "class_count", "data", d.class_count);
    if (d.class_count < 2) rd.fail(n["class_count"], "data.class_count", "must be at least 2");
    d.cluster_spread = rd.real(n, "cluster_spread", "data", d.cluster_spread, 0.0, 1e6, true);
    if (const YAML::Node c = n["class_counts"]) {
      d.class_counts = rd.index_list(c, "data.class_counts");
    } else if (d.class_counts.size() != d.class_count) {
      d.class_counts.assign(d.class_count, 100);
    }
    if (d.class_counts.size() != d.class_count)
      rd.fail(n["class_counts"], "data.class_counts", "needs one entry per class (" + std::to_string(d.class_count) + ")");
    d.test_fraction = rd.real(n, "test_fraction", "data", d.test_fraction, 0.0, 1.0, true);
    if (d.test_fraction >= 1.0) rd.fail(n["test_fraction"], "data.test_fraction", "must be below 1");
    if (const YAML::Node s = n["smote"]) {
      rd.check_keys(s, "data.smote", {"enabled", "mode", "k_neighbors", "targets"});
      rd.opt(s, "enabled", "data.smote", d.smote_enabled);
      if (const YAML::Node m = s["mode"]) {
        const auto mode = rd.scalar<std::string>(m, "data.smote.mode");
        if (mode == "global") d.smote_mode = DataConfig::SmoteMode::global;
        else if (mode == "per_node") d.smote_mode = DataConfig::SmoteMode::per_node;
        else rd.fail(m, "data.smote.mode", "unknown mode '" + mode + "' (valid: global, per_node)");
      }
      d.smote_k = rd.positive(s, "k_neighbors", "data.smote", d.smote_k);
      if (const YAML::Node t = s["targets"]) {
        d.smote_targets = rd.index_list(t, "data.smote.targets");
        if (d.smote_targets.size() != d.class_count) rd.fail(t, "data.smote.targets", "needs one entry per class");
        for (std::size_t c = 0; c < d.class_count; ++c)
          if (d.smote_targets[c] < d.class_counts[c])
            rd.fail(t, "data.smote.targets[" + std::to_string(c) + "]", "is below the generated class count");
      }
    }
    if (const YAML::Node t = n["tasks"]) {
      rd.check_keys(t, "data.tasks", {"regime", "groups", "count"});
      if (const YAML::Node r = t["regime"]) {
        const auto regime = rd.scalar<std::string>(r, "data.tasks.regime");
        if (regime == "class_incremental") d.regime = TaskRegime::class_incremental;
        else if (regime == "data_incremental") d.regime = TaskRegime::data_incremental;
        else rd.fail(r, "data.tasks.regime", "unknown regime '" + regime + "' (valid: class_incremental, data_incremental)");
      }
      if (const YAML::Node g = t["groups"]) {
        if (!g.IsSequence() || g.size() == 0) rd.fail(g, "data.tasks.groups", "expected a non-empty list of class lists");
        d.task_groups.clear();
        for (std::size_t i = 0; i < g.size(); ++i) {
          d.task_groups.push_back(rd.index_list(g[i], "data.tasks.groups[" + std::to_string(i) + "]"));
          if (d.task_groups.back().empty()) rd.fail(g[i], "data.tasks.groups[" + std::to_string(i) + "]", "is empty");
        }
      }
      d.task_count = rd.positive(t, "count", "data.tasks", d.task_count);
    }
    if (const YAML::Node s = n["sharding"]) {
      rd.check_keys(s, "data.sharding", {"proportions", "label_skew"});
      if (const YAML::Node p = s["proportions"]) {
        if (!p.IsSequence()) rd.fail(p, "data.sharding.proportions", "expected a list");
        d.proportions.clear();
        for (std::size_t i = 0; i < p.size(); ++i) {
          const auto v = rd.scalar<double>(p[i], "data.sharding.proportions");
          if (!(v > 0.0)) rd.fail(p[i], "data.sharding.proportions[" + std::to_string(i) + "]", "must be positive");
          d.proportions.push_back(v);
        }
      }
      d.label_skew = rd.real(s, "label_skew", "data.sharding", d.label_skew, 0.0, 1.0);
    }
  }
  if (d.regime == TaskRegime::class_incremental) {
    std::set<std::size_t> used;
    for (const auto& g : d.task_groups)
      for (std::size_t c : g) {
        const YAML::Node at = root["data"] && root["data"]["tasks"] ? root["data"]["tasks"]["groups"] : YAML::Node();
        if (c >= d.class_count) rd.fail(at, "data.tasks.groups", "class " + std::to_string(c) + " is out of range");
        if (!used.insert(c).second) rd.fail(at, "data.tasks.groups", "class " + std::to_string(c) + " is in two groups");
      }
  }

  if (const YAML::Node n = root["model"]) {
    rd.check_keys(n, "model", {"hidden", "activation", "lr", "batch_size"});
    if (const YAML::Node h = n["hidden"]) {
      cfg.model.hidden = rd.index_list(h, "model.hidden");
      for (std::size_t v : cfg.model.hidden)
        if (v == 0) rd.fail(h, "model.hidden", "layer sizes must be positive");
    }
    if (const YAML::Node a = n["activation"]) {
      const auto act = rd.scalar<std::string>(a, "model.activation");
      if (act == "relu") cfg.model.activation = Activation::relu;
      else if (act == "tanh") cfg.model.activation = Activation::tanh;
      else rd.fail(a, "model.activation", "unknown activation '" + act + "' (valid: relu, tanh)");
    }
    cfg.model.lr = rd.real(n, "lr", "model", cfg.model.lr, 0.0, 1e6, true);
    cfg.model.batch_size = rd.positive(n, "batch_size", "model", cfg.model.batch_size);
  }

  if (const YAML::Node n = root["federation"]) {
    rd.check_keys(n, "federation", {"nodes", "rounds", "local_epochs", "participation"});
    cfg.federation.nodes = rd.positive(n, "nodes", "federation", cfg.federation.nodes);
    cfg.federation.rounds = rd.positive(n, "rounds", "federation", cfg.federation.rounds);
    cfg.federation.local_epochs = rd.positive(n, "local_epochs", "federation", cfg.federation.local_epochs);
    cfg.federation.participation = rd.real(n, "participation", "federation", 1.0, 0.0, 1.0, true);
  }
  if (!d.proportions.empty() && d.proportions.size() != cfg.federation.nodes)
    rd.fail(root["data"]["sharding"]["proportions"], "data.sharding.proportions", "needs one entry per node");
  if (!d.proportions.empty()) {
    double s = 0.0;
    for (double p : d.proportions) s += p;
    if (std::abs(s - 1.0) > 1e-9)
      rd.fail(root["data"]["sharding"]["proportions"], "data.sharding.proportions", "must sum to 1");
  }

  if (const YAML::Node n = root["cipher"]) {
    rd.check_keys(n, "cipher", {"mode", "seed"});
    if (const YAML::Node m = n["mode"]) {
      const auto mode = rd.scalar<std::string>(m, "cipher.mode");
      if (mode == "permute_only") cfg.cipher.mode = CipherMode::permute_only;
      else if (mode == "permute_affine") cfg.cipher.mode = CipherMode::permute_affine;
      else rd.fail(m, "cipher.mode", "unknown mode '" + mode + "' (valid: permute_only, permute_affine)");
    }
    if (n["seed"]) cfg.cipher.seed = rd.scalar<std::uint64_t>(n["seed"], "cipher.seed");
  }

  const YAML::Node strategies = root["strategies"];
  if (!strategies || !strategies.IsSequence() || strategies.size() == 0)
    rd.fail(strategies ? strategies : root, "strategies", "at least one strategy is required");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    const std::string where = "strategies[" + std::to_string(i) + "]";
    StrategyConfig s = read_strategy(rd, strategies[i], where);
    if (!labels.insert(s.label).second)
      rd.fail(strategies[i], where, "duplicate label '" + s.label + "'; give each entry a distinct 'label'");
    cfg.strategies.push_back(std::move(s));
  }

  if (const YAML::Node n = root["acceptance"]) {
    rd.check_keys(n, "acceptance", {"baseline", "min_baseline_forgetting", "min_gain_over_baseline", "gain_strategies"});
    AcceptanceConfig a;
    a.baseline = cfg.strategies.front().label;
    rd.opt(n, "baseline", "acceptance", a.baseline);
    if (!labels.count(a.baseline)) rd.fail(n["baseline"], "acceptance.baseline", "no strategy labelled '" + a.baseline + "'");
    if (n["min_baseline_forgetting"])
      a.min_baseline_forgetting = rd.real(n, "min_baseline_forgetting", "acceptance", 0.0, -1.0, 1.0);
    if (n["min_gain_over_baseline"])
      a.min_gain_over_baseline = rd.real(n, "min_gain_over_baseline", "acceptance", 0.0, -1.0, 1.0);
    if (const YAML::Node g = n["gain_strategies"]) {
      if (!g.IsSequence()) rd.fail(g, "acceptance.gain_strategies", "expected a list of labels");
      for (std::size_t i = 0; i < g.size(); ++i) {
        a.gain_strategies.push_back(rd.scalar<std::string>(g[i], "acceptance.gain_strategies"));
        if (!labels.count(a.gain_strategies.back()))
          rd.fail(g[i], "acceptance.gain_strategies", "no strategy labelled '" + a.gain_strategies.back() + "'");
      }
    }
    cfg.acceptance = a;
  }
  return cfg;
}

}  // namespace detail

/// Parses YAML text; `source` names it in error messages.
inline ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "<config>") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(ConfigError::Kind::syntax,
                      source + ":" + std::to_string(e.mark.line + 1) + ": malformed YAML: " + e.msg);
  }
  return detail::read_config(root, source);
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(ConfigError::Kind::missing_file, path.string() + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.string());
}

}  // namespace fedcl::harness
