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

// Continual-learning strategies applied inside a node's local training:
// naive fine-tuning, EWC, replay, cumulative retraining and LwF.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fedcl/data.hpp"
#include "fedcl/error.hpp"
#include "fedcl/random.hpp"
#include "fedcl/tensor_nn.hpp"

namespace fedcl {

struct NaiveStrategy {
  friend bool operator==(const NaiveStrategy&, const NaiveStrategy&) = default;
};

/// Elastic weight consolidation: quadratic anchor weighted by the Fisher diagonal.
struct EwcStrategy {
  double lambda = 10.0;
  friend bool operator==(const EwcStrategy&, const EwcStrategy&) = default;
};

struct ReplayStrategy {
  std::size_t buffer_capacity = 200;
  double mix_fraction = 0.5;  // expected share of replayed samples per epoch
  friend bool operator==(const ReplayStrategy&, const ReplayStrategy&) = default;
};

/// Retrain on everything seen so far. Keeps all past data on the node.
struct CumulativeStrategy {
  friend bool operator==(const CumulativeStrategy&, const CumulativeStrategy&) = default;
};

/// Learning without forgetting: distill from the model as it was after the
/// previous task.
struct LwfStrategy {
  double temperature = 2.0;
  double alpha = 0.5;  // weight of the task loss; 1 - alpha goes to distillation
  friend bool operator==(const LwfStrategy&, const LwfStrategy&) = default;
};

using StrategyKind = std::variant<NaiveStrategy, EwcStrategy, ReplayStrategy, CumulativeStrategy, LwfStrategy>;

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

inline std::string strategy_name(const StrategyKind& kind) {
  return std::visit(Overloaded{
                        [](const NaiveStrategy&) { return std::string("naive"); },
                        [](const EwcStrategy&) { return std::string("ewc"); },
                        [](const ReplayStrategy&) { return std::string("replay"); },
                        [](const CumulativeStrategy&) { return std::string("cumulative"); },
                        [](const LwfStrategy&) { return std::string("lwf"); },
                    },
                    kind);
}

inline void validate(const StrategyKind& kind) {
  std::visit(Overloaded{
                 [](const NaiveStrategy&) {},
                 [](const CumulativeStrategy&) {},
                 [](const EwcStrategy& s) {
                   if (!(s.lambda >= 0.0) || !std::isfinite(s.lambda))
                     throw InvalidArgument("ewc: lambda must be a non-negative real");
                 },
                 [](const ReplayStrategy& s) {
                   if (s.buffer_capacity == 0) throw InvalidArgument("replay: buffer_capacity must be positive");
                   if (!(s.mix_fraction >= 0.0 && s.mix_fraction <= 1.0))
                     throw InvalidArgument("replay: mix_fraction must be in [0, 1]");
                 },
                 [](const LwfStrategy& s) {
                   if (!(s.temperature >= 1.0)) throw InvalidArgument("lwf: temperature must be >= 1");
                   if (!(s.alpha >= 0.0 && s.alpha <= 1.0)) throw InvalidArgument("lwf: alpha must be in [0, 1]");
                 },
             },
             kind);
}

/// Node-local memory of a strategy. Only the owning node ever touches it.
struct StrategyState {
  std::optional<ParamVector> anchor_params;
  std::optional<std::vector<double>> fisher_diag;
  std::vector<Sample> replay_buffer;
  /// Samples of each class offered to the reservoir so far; its keys are the
  /// classes seen.
  std::map<std::size_t, std::size_t> replay_stream_counts;
  std::optional<ParamVector> teacher_params;
  std::optional<Dataset> accumulated;

  friend bool operator==(const StrategyState&, const StrategyState&) = default;
};

struct RegularizedLoss {
  double task_loss = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

// ---------------------------------------------------------------------------
// EWC

/// Empirical Fisher diagonal: mean over samples of the squared gradient of the
/// true-label negative log-likelihood.
inline std::vector<double> compute_fisher_diag(const ParamVector& params, const ModelSpec& spec,
                                               const Dataset& data) {
  if (data.empty()) throw DataError("compute_fisher_diag: empty dataset");
  detail::check_params(params, spec);
  if (data.feature_dim() != spec.input_dim()) throw ShapeError("compute_fisher_diag: feature dim mismatch");
  std::vector<double> fisher(params.size(), 0.0);
  Gradient g(params.size(), 0.0);
  std::vector<double> dlogits;
  for (const Sample& s : data) {
    std::fill(g.begin(), g.end(), 0.0);
    const detail::ForwardTrace t = detail::trace_forward(params, spec, s.features);
    detail::cross_entropy(t.logits(), s.label, &dlogits);
    detail::accumulate_backward(params, spec, t, dlogits, 1.0, g);
    for (std::size_t i = 0; i < fisher.size(); ++i) fisher[i] += g[i] * g[i];
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (double& f : fisher) f *= inv_n;
  return fisher;
}

/// (lambda / 2) * sum_i fisher_i * (params_i - anchor_i)^2
inline double ewc_penalty(const ParamVector& params, const ParamVector& anchor,
                          std::span<const double> fisher, double lambda) {
  if (params.size() != anchor.size() || params.size() != fisher.size())
    throw ShapeError("ewc_penalty: params, anchor and fisher lengths differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double d = params[i] - anchor[i];
    acc += fisher[i] * d * d;
  }
  return 0.5 * lambda * acc;
}

// ---------------------------------------------------------------------------
// LwF

/// T^2 * KL(softmax(teacher / T) || softmax(student / T)) for one sample.
/// With `dstudent`, also writes the gradient with respect to the student logits.
inline double distillation_loss(std::span<const double> student, std::span<const double> teacher,
                                double temperature, std::vector<double>* dstudent) {
  const std::vector<double> log_p = log_softmax(teacher, temperature);
  const std::vector<double> log_q = log_softmax(student, temperature);
  double kl = 0.0;
  for (std::size_t c = 0; c < log_p.size(); ++c) {
    const double p = std::exp(log_p[c]);
    if (p > 0.0) kl += p * (log_p[c] - log_q[c]);
  }
  if (dstudent) {
    dstudent->resize(student.size());
    for (std::size_t c = 0; c < student.size(); ++c)
      (*dstudent)[c] = temperature * (std::exp(log_q[c]) - std::exp(log_p[c]));
  }
  return temperature * temperature * std::max(kl, 0.0);
}

// ---------------------------------------------------------------------------
// Loss

inline void check_state(const StrategyKind& kind, const StrategyState& state, std::size_t param_count) {
  if (std::holds_alternative<EwcStrategy>(kind)) {
    if (state.anchor_params.has_value() != state.fisher_diag.has_value())
      throw StrategyStateError("ewc: anchor and fisher must be set together");
    if (state.anchor_params &&
        (state.anchor_params->size() != param_count || state.fisher_diag->size() != param_count))
      throw StrategyStateError("ewc: anchor/fisher length does not match the model");
    if (state.fisher_diag)
      for (double f : *state.fisher_diag)
        if (!(f >= 0.0)) throw StrategyStateError("ewc: fisher diagonal has a negative entry");
  }
  if (std::holds_alternative<LwfStrategy>(kind) && state.teacher_params &&
      state.teacher_params->size() != param_count)
    throw StrategyStateError("lwf: teacher length does not match the model");
}

struct RegularizedLossAndGrad {
  RegularizedLoss loss;
  Gradient grad;
};

/// Strategy objective on one batch. Replay and cumulative act through the
/// batch composition, so their objective is the plain task loss.
inline RegularizedLossAndGrad regularized_loss_and_grad(const StrategyKind& kind, const StrategyState& state,
                                                        const ParamVector& params, const ModelSpec& spec,
                                                        const Batch& batch) {
  check_state(kind, state, spec.param_count());

  if (const auto* lwf = std::get_if<LwfStrategy>(&kind); lwf && state.teacher_params) {
    detail::check_params(params, spec);
    detail::check_batch(spec, batch);
    RegularizedLossAndGrad out{{}, Gradient(params.size(), 0.0)};
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double task = 0.0, distill = 0.0;
    std::vector<double> d_task, d_distill, d_total(spec.class_count());
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const detail::ForwardTrace t = detail::trace_forward(params, spec, batch.row(s));
      const detail::ForwardTrace teacher = detail::trace_forward(*state.teacher_params, spec, batch.row(s));
      task += detail::cross_entropy(t.logits(), batch.label(s), &d_task);
      distill += distillation_loss(t.logits(), teacher.logits(), lwf->temperature, &d_distill);
      for (std::size_t c = 0; c < d_total.size(); ++c)
        d_total[c] = lwf->alpha * d_task[c] + (1.0 - lwf->alpha) * d_distill[c];
      detail::accumulate_backward(params, spec, t, d_total, inv_n, out.grad);
    }
    task *= inv_n;
    distill *= inv_n;
    // Both terms carry their mixing weight so that total = task + penalty.
    out.loss.task_loss = lwf->alpha * task;
    out.loss.penalty = (1.0 - lwf->alpha) * distill;
    out.loss.total = out.loss.task_loss + out.loss.penalty;
    if (!std::isfinite(out.loss.total) || !out.grad.all_finite()) throw NumericError("lwf: non-finite loss");
    return out;
  }

  LossAndGrad base = loss_and_grad(params, spec, batch);
  RegularizedLossAndGrad out{{base.loss, 0.0, base.loss}, std::move(base.grad)};
  if (const auto* ewc = std::get_if<EwcStrategy>(&kind); ewc && state.anchor_params) {
    const ParamVector& anchor = *state.anchor_params;
    const std::vector<double>& fisher = *state.fisher_diag;
    out.loss.penalty = ewc_penalty(params, anchor, fisher, ewc->lambda);
    out.loss.total = out.loss.task_loss + out.loss.penalty;
    for (std::size_t i = 0; i < params.size(); ++i) out.grad[i] += ewc->lambda * fisher[i] * (params[i] - anchor[i]);
  }
  return out;
}

/// Total strategy objective without the gradient; the finite-difference
/// oracle differentiates this.
inline double regularized_loss(const StrategyKind& kind, const StrategyState& state, const ParamVector& params,
                               const ModelSpec& spec, const Batch& batch) {
  check_state(kind, state, spec.param_count());
  if (const auto* lwf = std::get_if<LwfStrategy>(&kind); lwf && state.teacher_params) {
    double task = 0.0, distill = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const auto student = forward(params, spec, batch.row(s));
      const auto teacher = forward(*state.teacher_params, spec, batch.row(s));
      task += -log_softmax(student)[batch.label(s)];
      distill += distillation_loss(student, teacher, lwf->temperature, nullptr);
    }
    const double n = static_cast<double>(batch.size());
    return lwf->alpha * task / n + (1.0 - lwf->alpha) * distill / n;
  }
  double total = loss(params, spec, batch);
  if (const auto* ewc = std::get_if<EwcStrategy>(&kind); ewc && state.anchor_params)
    total += ewc_penalty(params, *state.anchor_params, *state.fisher_diag, ewc->lambda);
  return total;
}

// ---------------------------------------------------------------------------
// Replay

/// Per-class quotas: capacity split evenly over `classes`, remainder to the
/// lowest class indices.
inline std::map<std::size_t, std::size_t> replay_quotas(std::size_t capacity,
                                                        const std::vector<std::size_t>& classes) {
  std::map<std::size_t, std::size_t> quota;
  if (classes.empty()) return quota;
  const std::vector<double> equal(classes.size(), 1.0);
  const std::vector<std::size_t> share = apportion(capacity, equal);
  for (std::size_t i = 0; i < classes.size(); ++i) quota[classes[i]] = share[i];
  return quota;
}

/// Adds a task's samples to the replay buffer by per-class reservoir sampling.
/// The capacity is split evenly across all classes seen so far; classes whose
/// quota shrank are down-sampled uniformly.
inline StrategyState replay_update(const ReplayStrategy& cfg, StrategyState state, const Dataset& task, Seed seed) {
  Rng rng(seed);
  for (std::size_t c : task.present_labels()) state.replay_stream_counts.try_emplace(c, 0);
  std::vector<std::size_t> classes;
  for (const auto& [c, n] : state.replay_stream_counts) classes.push_back(c);
  const auto quota = replay_quotas(cfg.buffer_capacity, classes);

  std::map<std::size_t, std::vector<Sample>> per_class;
  for (Sample& s : state.replay_buffer) per_class[s.label].push_back(std::move(s));

  // Shrink old classes first: keep a uniform random subset, in buffer order.
  for (auto& [c, members] : per_class) {
    const std::size_t q = quota.at(c);
    if (members.size() <= q) continue;
    std::vector<std::size_t> idx = rng.permutation(members.size());
    idx.resize(q);
    std::sort(idx.begin(), idx.end());
    std::vector<Sample> kept;
    kept.reserve(q);
    for (std::size_t i : idx) kept.push_back(std::move(members[i]));
    members = std::move(kept);
  }

  // Algorithm R per class, continuing each class's stream count.
  for (const Sample& s : task) {
    const std::size_t q = quota.at(s.label);
    std::vector<Sample>& members = per_class[s.label];
    std::size_t& seen = state.replay_stream_counts[s.label];
    if (members.size() < q) {
      members.push_back(s);
    } else if (q > 0) {
      const std::size_t j = rng.index(seen + 1);
      if (j < q) members[j] = s;
    }
    ++seen;
  }

  state.replay_buffer.clear();
  for (auto& [c, members] : per_class)
    for (Sample& s : members) state.replay_buffer.push_back(std::move(s));
  return state;
}

// ---------------------------------------------------------------------------
// Training-set composition and consolidation

/// The dataset a node trains on for the current task under its strategy.
inline Dataset compose_training_set(const StrategyKind& kind, const StrategyState& state, const Dataset& current,
                                    Seed seed) {
  if (const auto* replay = std::get_if<ReplayStrategy>(&kind)) {
    if (state.replay_buffer.empty() || replay->mix_fraction <= 0.0) return current;
    // Replayed samples make up mix_fraction of the epoch: r / (n + r) = mix.
    std::size_t replayed = state.replay_buffer.size();
    if (replay->mix_fraction < 1.0 && !current.empty()) {
      const double n = static_cast<double>(current.size());
      replayed = static_cast<std::size_t>(std::llround(n * replay->mix_fraction / (1.0 - replay->mix_fraction)));
    }
    Rng rng(seed);
    std::vector<std::size_t> order = rng.permutation(state.replay_buffer.size());
    std::vector<Sample> all(current.samples());
    for (std::size_t i = 0; i < replayed; ++i) all.push_back(state.replay_buffer[order[i % order.size()]]);
    rng.shuffle(all.begin(), all.end());
    return Dataset(current.class_count(), current.feature_dim(), std::move(all));
  }
  if (std::holds_alternative<CumulativeStrategy>(kind) && state.accumulated)
    return concat(*state.accumulated, current);
  return current;
}

/// Updates strategy memory once a task is finished.
inline StrategyState consolidate_after_task(const StrategyKind& kind, StrategyState state, const ParamVector& params,
                                            const ModelSpec& spec, const Dataset& task, Seed seed) {
  return std::visit(
      Overloaded{
          [&](const NaiveStrategy&) { return std::move(state); },
          [&](const EwcStrategy&) {
            if (task.empty()) return std::move(state);
            std::vector<double> fisher = compute_fisher_diag(params, spec, task);
            if (state.fisher_diag) {
              if (state.fisher_diag->size() != fisher.size())
                throw StrategyStateError("ewc: stored fisher has the wrong length");
              for (std::size_t i = 0; i < fisher.size(); ++i) fisher[i] += (*state.fisher_diag)[i];
            }
            state.fisher_diag = std::move(fisher);
            state.anchor_params = params;
            return std::move(state);
          },
          [&](const ReplayStrategy& cfg) { return replay_update(cfg, std::move(state), task, seed); },
          [&](const CumulativeStrategy&) {
            state.accumulated = state.accumulated ? concat(*state.accumulated, task) : task;
            return std::move(state);
          },
          [&](const LwfStrategy&) {
            state.teacher_params = params;
            return std::move(state);
          },
      },
      kind);
}

}  // namespace fedcl
