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

// Simulated federation: node-local training under a continual-learning
// strategy, FedAvg aggregation at the server, and task/round orchestration.
//
// The server only ever sees ModelUpdate values (parameters plus sample
// count). Shards and strategy state never leave their node.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedcl/cipher.hpp"
#include "fedcl/continual.hpp"
#include "fedcl/data.hpp"
#include "fedcl/error.hpp"
#include "fedcl/log.hpp"
#include "fedcl/metrics.hpp"
#include "fedcl/random.hpp"
#include "fedcl/tensor_nn.hpp"

namespace fedcl {

struct RoundConfig {
  std::size_t rounds = 20;
  std::size_t local_epochs = 50;
  std::size_t node_count = 5;
  double lr = 0.05;
  std::size_t batch_size = 32;
  Seed seed = 0;
  /// Fraction of nodes taking part in each round.
  double participation = 1.0;

  void validate() const {
    if (rounds == 0) throw InvalidArgument("rounds must be positive");
    if (local_epochs == 0) throw InvalidArgument("local_epochs must be positive");
    if (node_count == 0) throw InvalidArgument("node_count must be positive");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("lr must be positive");
    if (batch_size == 0) throw InvalidArgument("batch_size must be positive");
    if (!(participation > 0.0 && participation <= 1.0)) throw InvalidArgument("participation must be in (0, 1]");
  }
};

struct NodeState {
  std::size_t node_id = 0;
  Dataset shard;
  ParamVector params;
  StrategyKind strategy_kind;
  StrategyState strategy_state;

  std::size_t sample_count() const { return shard.size(); }
};

struct ServerState {
  ParamVector global_params;
  std::size_t round_index = 0;
  ModelSpec spec;
  std::size_t task_index = 0;
};

/// What a node sends to the server.
struct ModelUpdate {
  std::size_t node_id = 0;
  ParamVector params;
  std::size_t sample_count = 0;
};

struct NodeRoundEntry {
  std::size_t node_id = 0;
  double train_loss = 0.0;
  std::size_t sample_count = 0;
  bool participated = true;
  std::string error;  // empty on success
};

struct RoundReport {
  std::size_t task_index = 0;
  std::size_t round_index = 0;
  std::vector<NodeRoundEntry> nodes;
  /// Global model accuracy on the test sets of every task seen so far.
  double global_accuracy = 0.0;
  double wall_time_s = 0.0;
};

/// Records who touched what, so tests can check that strategy state and data
/// stay on their node.
class InteractionLog {
 public:
  struct Event {
    std::string actor;
    std::string object;
    std::string action;
    friend bool operator==(const Event&, const Event&) = default;
  };

  void record(std::string actor, std::string object, std::string action) {
    events_.push_back({std::move(actor), std::move(object), std::move(action)});
  }
  const std::vector<Event>& events() const { return events_; }

 private:
  std::vector<Event> events_;
};

inline std::string node_actor(std::size_t id) { return "node:" + std::to_string(id); }
inline std::string state_object(std::size_t id) { return "strategy_state:" + std::to_string(id); }
inline std::string shard_object(std::size_t id) { return "shard:" + std::to_string(id); }
inline std::string update_object(std::size_t id) { return "update:" + std::to_string(id); }

// ---------------------------------------------------------------------------
// Evaluation

inline ConfusionMatrix evaluate(const ParamVector& params, const ModelSpec& spec, const Dataset& data) {
  std::vector<std::size_t> truth, pred;
  truth.reserve(data.size());
  pred.reserve(data.size());
  for (const Sample& s : data) {
    truth.push_back(s.label);
    pred.push_back(predict(params, spec, s.features));
  }
  return confusion(truth, pred, spec.class_count());
}

inline double accuracy(const ParamVector& params, const ModelSpec& spec, const Dataset& data) {
  if (data.empty()) return 0.0;
  const ConfusionMatrix cm = evaluate(params, spec, data);
  return static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
}

// ---------------------------------------------------------------------------
// Local training

struct LocalTrainResult {
  ParamVector params;
  std::size_t sample_count = 0;
  /// Sample-weighted mean strategy objective over the last epoch. With zero
  /// epochs, the objective of the starting model on the whole training set.
  double final_epoch_loss = 0.0;
};

/// Starts from the global model and trains for `epochs` passes over the
/// strategy-composed training set, in shuffled mini-batches.
inline LocalTrainResult local_train(const NodeState& node, const ParamVector& global_params, const ModelSpec& spec,
                                    std::size_t epochs, double lr, std::size_t batch_size, Seed seed) {
  if (batch_size == 0) throw InvalidArgument("local_train: batch_size must be positive");
  LocalTrainResult out{global_params, node.sample_count(), 0.0};
  if (node.shard.empty()) return out;

  const Dataset train = compose_training_set(node.strategy_kind, node.strategy_state, node.shard,
                                             derive_seed(seed, {stream::kCompose}));
  if (epochs == 0) {
    out.final_epoch_loss =
        regularized_loss(node.strategy_kind, node.strategy_state, out.params, spec, make_batch(train));
    return out;
  }
  Rng rng(derive_seed(seed, {stream::kShuffle}));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t e = 0; e < epochs; ++e) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t len = std::min(batch_size, order.size() - start);
      const Batch batch = make_batch(train, std::span<const std::size_t>(order).subspan(start, len));
      const RegularizedLossAndGrad step =
          regularized_loss_and_grad(node.strategy_kind, node.strategy_state, out.params, spec, batch);
      out.params = sgd_step(out.params, step.grad, lr);
      epoch_loss += step.loss.total * static_cast<double>(len);
    }
    out.final_epoch_loss = epoch_loss / static_cast<double>(order.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation

inline std::vector<ModelUpdate> sorted_by_node(std::span<const ModelUpdate> updates) {
  std::vector<ModelUpdate> sorted(updates.begin(), updates.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ModelUpdate& a, const ModelUpdate& b) { return a.node_id < b.node_id; });
  return sorted;
}

/// n_k / N for each update, in input order.
inline std::vector<double> aggregation_weights(std::span<const ModelUpdate> updates) {
  std::size_t total = 0;
  for (const auto& u : updates) total += u.sample_count;
  if (total == 0) throw DataError("fedavg: no update carries any samples");
  std::vector<double> w;
  w.reserve(updates.size());
  for (const auto& u : updates) w.push_back(static_cast<double>(u.sample_count) / static_cast<double>(total));
  return w;
}

/// Sample-size-weighted mean of node parameters:
///   w_G[j] = sum_k (n_k / N) * w_k[j].
/// Updates are reduced in ascending node_id as a running weighted mean,
/// mean += (n_k / N_k) * (w_k - mean), which returns a single update, or a set
/// of identical updates, bit-exactly. Updates with no samples are ignored.
inline ParamVector fedavg(std::span<const ModelUpdate> updates) {
  if (updates.empty()) throw DataError("fedavg: no updates");
  const std::size_t dim = updates.front().params.size();
  for (const auto& u : updates)
    if (u.params.size() != dim) throw ShapeError("fedavg: parameter vectors differ in length");
  aggregation_weights(updates);  // throws when every count is zero

  ParamVector mean;
  std::size_t seen = 0;
  for (const ModelUpdate& u : sorted_by_node(updates)) {
    if (u.sample_count == 0) continue;
    if (seen == 0) {
      mean = u.params;
      seen = u.sample_count;
      continue;
    }
    seen += u.sample_count;
    const double w = static_cast<double>(u.sample_count) / static_cast<double>(seen);
    for (std::size_t j = 0; j < dim; ++j) mean[j] += w * (u.params[j] - mean[j]);
  }
  return mean;
}

// ---------------------------------------------------------------------------
// Rounds

/// Seed of node `node_id` in round `round` of task `task`.
inline Seed node_round_seed(Seed master, std::size_t node_id, std::size_t round, std::size_t task) {
  return derive_seed(master, {node_id, round, task});
}

/// Node ids taking part in a round, ascending.
inline std::vector<std::size_t> participants(const std::vector<NodeState>& nodes, const RoundConfig& config,
                                             std::size_t round, std::size_t task) {
  std::vector<std::size_t> ids;
  for (const auto& n : nodes) ids.push_back(n.node_id);
  std::sort(ids.begin(), ids.end());
  if (config.participation >= 1.0) return ids;
  const auto m = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.participation * static_cast<double>(ids.size()))));
  Rng rng(derive_seed(config.seed, {stream::kParticipation, round, task}));
  rng.shuffle(ids.begin(), ids.end());
  ids.resize(std::min(m, ids.size()));
  std::sort(ids.begin(), ids.end());
  return ids;
}

struct RoundOutcome {
  ServerState server;
  std::vector<NodeState> nodes;
  RoundReport report;
};

/// One communication round: broadcast, local training at every participating
/// node, FedAvg. `eval` (optional) is the test data the report's accuracy is
/// measured on.
inline RoundOutcome run_round(ServerState server, std::vector<NodeState> nodes, const RoundConfig& config,
                              const Dataset* eval = nullptr, InteractionLog* log_sink = nullptr) {
  if (server.round_index >= config.rounds)
    throw InvalidArgument("run_round: round " + std::to_string(server.round_index) + " exceeds configured " +
                          std::to_string(config.rounds));
  const auto start = std::chrono::steady_clock::now();
  const std::size_t round = server.round_index;
  const std::vector<std::size_t> active = participants(nodes, config, round, server.task_index);

  RoundReport report;
  report.task_index = server.task_index;
  report.round_index = round;
  std::vector<ModelUpdate> updates;
  for (NodeState& node : nodes) {
    NodeRoundEntry entry{node.node_id, 0.0, node.sample_count(), true, {}};
    if (!std::binary_search(active.begin(), active.end(), node.node_id)) {
      entry.participated = false;
      entry.sample_count = 0;
      report.nodes.push_back(entry);
      continue;
    }
    if (log_sink) {
      log_sink->record("server", node_actor(node.node_id), "broadcast");
      log_sink->record(node_actor(node.node_id), shard_object(node.node_id), "read");
      log_sink->record(node_actor(node.node_id), state_object(node.node_id), "read");
    }
    try {
      LocalTrainResult r = local_train(node, server.global_params, server.spec, config.local_epochs, config.lr,
                                       config.batch_size,
                                       node_round_seed(config.seed, node.node_id, round, server.task_index));
      entry.train_loss = r.final_epoch_loss;
      entry.sample_count = r.sample_count;
      node.params = r.params;
      if (r.sample_count > 0) {
        updates.push_back({node.node_id, std::move(r.params), r.sample_count});
        if (log_sink) log_sink->record("server", update_object(node.node_id), "receive");
      }
    } catch (const Error& e) {
      entry.error = e.what();
      entry.sample_count = 0;
      log(LogLevel::warning, "node " + std::to_string(node.node_id) + " failed: " + e.what());
    }
    report.nodes.push_back(std::move(entry));
  }
  if (updates.empty())
    throw DataError("round " + std::to_string(round) + " of task " + std::to_string(server.task_index) +
                    ": no node produced an update");

  server.global_params = fedavg(updates);
  ++server.round_index;
  if (eval && !eval->empty()) report.global_accuracy = accuracy(server.global_params, server.spec, *eval);
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(server), std::move(nodes), std::move(report)};
}

// ---------------------------------------------------------------------------
// Whole training runs

struct TrainingConfig {
  ModelSpec spec{{2, 2}};
  RoundConfig round;
  StrategyKind strategy = NaiveStrategy{};
  CipherMode cipher_mode = CipherMode::permute_affine;
  Seed cipher_seed = 0;
  /// Node data proportions; empty means equal shares.
  std::vector<double> proportions;
  ShardingOptions sharding;
  /// Rebalance each node's shard with SMOTE before encryption.
  bool per_node_smote = false;
  std::size_t smote_k = 5;
};

struct TrainingHistory {
  std::vector<RoundReport> rounds;  // task-major
  /// accuracy_matrix[i][j]: global accuracy on task j's test set after task i (j <= i).
  std::vector<std::vector<double>> accuracy_matrix;
  ParamVector final_params;
  /// Final global model on the union of every task's test set.
  ConfusionMatrix final_confusion{2};
};

namespace detail {

inline Dataset rebalance_shard(const Dataset& shard, std::size_t k, Seed seed) {
  const ClassDistribution counts = shard.class_counts();
  const std::size_t top = *std::max_element(counts.begin(), counts.end());
  ClassDistribution target = counts;
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] >= 2) target[c] = top;
  return smote(shard, k, target, seed);
}

}  // namespace detail

/// Runs every task of the sequence through `rounds` federated rounds. Per
/// task: shard across nodes, encrypt with the shared key, train, then let each
/// node consolidate its strategy state against the final global model.
inline TrainingHistory run_training(const TaskSequence& tasks, const TrainingConfig& config,
                                    InteractionLog* log_sink = nullptr) {
  config.round.validate();
  validate(config.strategy);
  if (tasks.size() == 0) throw DataError("run_training: empty task sequence");
  const ModelSpec& spec = config.spec;
  const std::size_t K = config.round.node_count;
  const Seed master = config.round.seed;
  for (const Task& t : tasks.tasks)
    if (t.train.feature_dim() != spec.input_dim() || t.train.class_count() != spec.class_count())
      throw ShapeError("run_training: task data does not match the model");

  std::vector<double> proportions = config.proportions;
  if (proportions.empty()) proportions.assign(K, 1.0 / static_cast<double>(K));
  const CipherKey key = derive_key(config.cipher_seed, spec.input_dim(), config.cipher_mode);

  ServerState server{init_params(spec, derive_seed(master, {stream::kInit})), 0, spec, 0};
  std::vector<NodeState> nodes;
  for (std::size_t k = 0; k < K; ++k)
    nodes.push_back({k, tasks.tasks.front().train.like(), server.global_params, config.strategy, {}});

  TrainingHistory history;
  std::vector<Dataset> seen_tests;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    std::vector<Dataset> shards =
        shard_across_nodes(tasks.tasks[t].train, K, proportions, derive_seed(master, {stream::kShard, t}),
                           config.sharding);
    for (std::size_t k = 0; k < K; ++k) {
      Dataset plain = std::move(shards[k]);
      if (config.per_node_smote && !plain.empty())
        plain = detail::rebalance_shard(plain, config.smote_k, derive_seed(master, {stream::kSmote, k, t}));
      nodes[k].shard = encrypt_dataset(key, plain);
    }
    seen_tests.push_back(encrypt_dataset(key, tasks.tasks[t].test));
    Dataset eval = seen_tests.front();
    for (std::size_t j = 1; j < seen_tests.size(); ++j) eval = concat(eval, seen_tests[j]);

    server.round_index = 0;
    server.task_index = t;
    for (std::size_t r = 0; r < config.round.rounds; ++r) {
      RoundOutcome out = run_round(std::move(server), std::move(nodes), config.round, &eval, log_sink);
      server = std::move(out.server);
      nodes = std::move(out.nodes);
      history.rounds.push_back(std::move(out.report));
    }

    for (NodeState& node : nodes) {
      if (log_sink) {
        log_sink->record("server", node_actor(node.node_id), "broadcast");
        log_sink->record(node_actor(node.node_id), state_object(node.node_id), "write");
      }
      node.params = server.global_params;
      node.strategy_state = consolidate_after_task(node.strategy_kind, std::move(node.strategy_state),
                                                   server.global_params, spec, node.shard,
                                                   derive_seed(master, {stream::kConsolidate, node.node_id, t}));
    }

    std::vector<double> row;
    for (const Dataset& test : seen_tests) row.push_back(accuracy(server.global_params, spec, test));
    history.accuracy_matrix.push_back(std::move(row));
  }

  history.final_params = server.global_params;
  history.final_confusion = ConfusionMatrix(spec.class_count());
  for (const Dataset& test : seen_tests) history.final_confusion += evaluate(server.global_params, spec, test);
  return history;
}

}  // namespace fedcl
