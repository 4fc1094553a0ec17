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

#include "fedcl/continual.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "test_util.hpp"

namespace fedcl {
namespace {

using test::fisher_loop_oracle;

StrategyState ewc_state(const ParamVector& anchor, std::vector<double> fisher) {
  StrategyState s;
  s.anchor_params = anchor;
  s.fisher_diag = std::move(fisher);
  return s;
}

TEST(Fisher, SingleSampleIsSquaredGradient) {
  const ModelSpec spec({3, 4, 2});
  const ParamVector p = init_params(spec, 2);
  Dataset d(2, 3);
  d.add({{0.5, -1.0, 2.0}, 1});
  const Gradient g = loss_and_grad(p, spec, make_batch(d)).grad;
  const auto f = compute_fisher_diag(p, spec, d);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(f[i], g[i] * g[i], 1e-15);
}

TEST(Fisher, VanishesForConfidentCorrectModel) {
  const ModelSpec spec({2, 2});
  const ParamVector p{40, 0, 0, 40, 0, 0};
  Dataset d(2, 2);
  d.add({{1, 0}, 0});
  d.add({{0, 1}, 1});
  d.add({{2, 0.5}, 0});
  for (double f : compute_fisher_diag(p, spec, d)) EXPECT_LE(f, 1e-8);
}

TEST(Fisher, LogisticModelMatchesLoopOracle) {
  // One input, two classes: W = [w0; w1], b = [b0; b1].
  const ModelSpec spec({1, 2});
  const ParamVector p{0.7, -0.4, 0.1, 0.2};
  Dataset d(2, 1);
  d.add({{1.0}, 0});
  d.add({{-2.0}, 1});
  d.add({{0.5}, 1});
  const auto f = compute_fisher_diag(p, spec, d);
  const auto oracle = fisher_loop_oracle(p, spec, d);
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(f[i], oracle[i], 1e-15);

  // Closed form: d/dw_c = (softmax_c - [c == y]) * x, d/db_c = softmax_c - [c == y].
  std::vector<double> closed(4, 0.0);
  for (const Sample& s : d) {
    const double x = s.features[0];
    const double z0 = p[0] * x + p[2], z1 = p[1] * x + p[3];
    const double p0 = 1.0 / (1.0 + std::exp(z1 - z0));
    const double r0 = p0 - (s.label == 0), r1 = (1.0 - p0) - (s.label == 1);
    closed[0] += r0 * x * r0 * x / 3.0;
    closed[1] += r1 * x * r1 * x / 3.0;
    closed[2] += r0 * r0 / 3.0;
    closed[3] += r1 * r1 / 3.0;
  }
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(f[i], closed[i], 1e-15);
}

TEST(Fisher, NonNegativeAndRejectsEmpty) {
  const ModelSpec spec({4, 6, 3});
  const Dataset d = test::blobs(3, {10, 10, 10});
  for (double f : compute_fisher_diag(init_params(spec, 1), spec, d)) EXPECT_GE(f, 0.0);
  EXPECT_THROW(compute_fisher_diag(init_params(spec, 1), spec, d.like()), DataError);
}

TEST(EwcPenalty, HandArithmetic) {
  EXPECT_EQ(ewc_penalty(ParamVector{3}, ParamVector{1}, std::vector<double>{2}, 1.0), 4.0);
  EXPECT_EQ(ewc_penalty(ParamVector{3}, ParamVector{1}, std::vector<double>{2}, 2.0), 8.0);
  EXPECT_EQ(ewc_penalty(ParamVector{1, 2}, ParamVector{1, 2}, std::vector<double>{5, 5}, 3.0), 0.0);
  EXPECT_THROW(ewc_penalty(ParamVector{1, 2}, ParamVector{1}, std::vector<double>{1, 1}, 1.0), ShapeError);
}

TEST(EwcPenalty, ZeroExactlyWhereFisherIsPositiveAndMatched) {
  const ParamVector anchor{1, 2, 3};
  const std::vector<double> fisher{0.5, 0.0, 2.0};
  EXPECT_EQ(ewc_penalty(ParamVector{1, 99, 3}, anchor, fisher, 4.0), 0.0);
  EXPECT_GT(ewc_penalty(ParamVector{1.001, 2, 3}, anchor, fisher, 4.0), 0.0);
}

TEST(RegularizedLoss, EwcWithoutAnchorIsNaive) {
  const ModelSpec spec({4, 8, 3});
  Rng rng(1);
  const ParamVector p = init_params(spec, 3);
  const Batch b = test::random_batch(rng, 4, 3, 6);
  const auto naive = regularized_loss_and_grad(NaiveStrategy{}, {}, p, spec, b);
  const auto ewc = regularized_loss_and_grad(EwcStrategy{50.0}, {}, p, spec, b);
  EXPECT_EQ(naive.loss.total, ewc.loss.total);
  EXPECT_EQ(ewc.loss.penalty, 0.0);
  EXPECT_EQ(naive.grad, ewc.grad);
}

TEST(RegularizedLoss, EwcDecomposition) {
  const ModelSpec spec({4, 8, 3});
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    const ParamVector p = init_params(spec, 10 + t), anchor = init_params(spec, 50 + t);
    std::vector<double> fisher(p.size());
    for (double& f : fisher) f = rng.uniform(0.0, 2.0);
    const Batch b = test::random_batch(rng, 4, 3, 5);
    const double lambda = rng.uniform(0.0, 20.0);
    const auto r = regularized_loss_and_grad(EwcStrategy{lambda}, ewc_state(anchor, fisher), p, spec, b);
    EXPECT_NEAR(r.loss.total - r.loss.task_loss, ewc_penalty(p, anchor, fisher, lambda), 1e-12);
    EXPECT_NEAR(r.loss.total, r.loss.task_loss + r.loss.penalty, 1e-12);
  }
}

TEST(RegularizedLoss, EwcLambdaZeroIsNaive) {
  const ModelSpec spec({4, 8, 3});
  Rng rng(3);
  const ParamVector p = init_params(spec, 1);
  const StrategyState s = ewc_state(init_params(spec, 2), std::vector<double>(p.size(), 1.0));
  const Batch b = test::random_batch(rng, 4, 3, 6);
  const auto a = regularized_loss_and_grad(EwcStrategy{0.0}, s, p, spec, b);
  const auto n = regularized_loss_and_grad(NaiveStrategy{}, s, p, spec, b);
  EXPECT_EQ(a.loss.total, n.loss.total);
  EXPECT_EQ(a.grad, n.grad);
}

TEST(RegularizedLoss, EveryStrategyPassesGradientCheck) {
  const ModelSpec spec({4, 8, 3});
  Rng rng(4);
  for (int t = 0; t < 4; ++t) {
    const ParamVector p = init_params(spec, 20 + t);
    StrategyState state = ewc_state(init_params(spec, 30 + t), std::vector<double>(p.size()));
    for (double& f : *state.fisher_diag) f = rng.uniform(0.0, 1.0);
    state.teacher_params = init_params(spec, 40 + t);
    const Batch b = test::random_batch(rng, 4, 3, 6);
    const StrategyKind kinds[] = {NaiveStrategy{}, EwcStrategy{7.5}, ReplayStrategy{}, CumulativeStrategy{},
                                  LwfStrategy{2.0, 0.5}, LwfStrategy{3.5, 0.2}};
    for (const StrategyKind& kind : kinds) {
      const auto r = regularized_loss_and_grad(kind, state, p, spec, b);
      const Gradient fd = finite_diff_grad(
          p, [&](const ParamVector& q) { return regularized_loss(kind, state, q, spec, b); }, 1e-5);
      EXPECT_LE(test::max_relative_error(r.grad, fd), 1e-4) << strategy_name(kind);
      EXPECT_NEAR(r.loss.total, regularized_loss(kind, state, p, spec, b), 1e-12) << strategy_name(kind);
    }
  }
}

TEST(RegularizedLoss, LwfWithSelfTeacherHasNoDistillation) {
  const ModelSpec spec({4, 8, 3});
  Rng rng(5);
  const ParamVector p = init_params(spec, 9);
  StrategyState s;
  s.teacher_params = p;
  const auto r = regularized_loss_and_grad(LwfStrategy{2.0, 0.5}, s, p, spec, test::random_batch(rng, 4, 3, 8));
  EXPECT_LE(r.loss.penalty, 1e-10);
  EXPECT_NEAR(r.loss.total, r.loss.task_loss + r.loss.penalty, 1e-12);
}

TEST(Distillation, NonNegativeAndZeroOnlyForEqualDistributions) {
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(4), b(4);
    for (double& x : a) x = rng.normal(0, 3);
    for (double& x : b) x = rng.normal(0, 3);
    EXPECT_GT(distillation_loss(a, b, 2.0, nullptr), 0.0);
    std::vector<double> shifted = a;
    for (double& x : shifted) x += 5.0;
    EXPECT_LE(distillation_loss(a, shifted, 2.0, nullptr), 1e-12);
  }
}

TEST(RegularizedLoss, InconsistentStateIsRejected) {
  const ModelSpec spec({4, 3});
  Rng rng(7);
  const ParamVector p = init_params(spec, 1);
  const Batch b = test::random_batch(rng, 4, 3, 2);
  StrategyState anchor_only;
  anchor_only.anchor_params = p;
  EXPECT_THROW(regularized_loss_and_grad(EwcStrategy{}, anchor_only, p, spec, b), StrategyStateError);
  EXPECT_THROW(regularized_loss_and_grad(EwcStrategy{}, ewc_state(ParamVector{1.0}, {1.0}), p, spec, b),
               StrategyStateError);
  StrategyState bad_teacher;
  bad_teacher.teacher_params = ParamVector{1.0, 2.0};
  EXPECT_THROW(regularized_loss_and_grad(LwfStrategy{}, bad_teacher, p, spec, b), StrategyStateError);
}

TEST(Validate, ParameterRanges) {
  EXPECT_THROW(validate(EwcStrategy{-1.0}), InvalidArgument);
  EXPECT_THROW(validate(ReplayStrategy{0, 0.5}), InvalidArgument);
  EXPECT_THROW(validate(ReplayStrategy{10, 1.5}), InvalidArgument);
  EXPECT_THROW(validate(LwfStrategy{0.5, 0.5}), InvalidArgument);
  EXPECT_THROW(validate(LwfStrategy{2.0, -0.1}), InvalidArgument);
  EXPECT_NO_THROW(validate(LwfStrategy{1.0, 1.0}));
}

Dataset stream_of(std::size_t n, std::size_t label = 0, std::size_t classes = 2) {
  Dataset d(classes, 1);
  for (std::size_t i = 0; i < n; ++i) d.add({{static_cast<double>(i)}, label});
  return d;
}

TEST(Replay, UnderCapacityKeepsEverything) {
  const StrategyState s = replay_update({100, 0.5}, {}, stream_of(50), 1);
  EXPECT_EQ(s.replay_buffer.size(), 50u);
}

TEST(Replay, EvenQuotaAcrossClasses) {
  StrategyState s = replay_update({100, 0.5}, {}, stream_of(300, 0), 1);
  EXPECT_EQ(s.replay_buffer.size(), 100u);
  s = replay_update({100, 0.5}, s, stream_of(300, 1), 2);
  std::map<std::size_t, std::size_t> per_class;
  for (const Sample& x : s.replay_buffer) ++per_class[x.label];
  EXPECT_EQ(per_class[0], 50u);
  EXPECT_EQ(per_class[1], 50u);
}

TEST(Replay, OddQuotaUsesLargestRemainder) {
  const auto q = replay_quotas(10, {0, 1, 2});
  EXPECT_EQ(q.at(0), 4u);
  EXPECT_EQ(q.at(1), 3u);
  EXPECT_EQ(q.at(2), 3u);
}

TEST(Replay, ReservoirIsUniform) {
  // Each of 1000 stream items should survive with probability 10 / 1000.
  constexpr int kTrials = 10000;
  const Dataset stream = stream_of(1000);
  std::vector<int> hits(1000, 0);
  for (int t = 0; t < kTrials; ++t) {
    const StrategyState s = replay_update({10, 0.5}, {}, stream, derive_seed(123, {static_cast<std::uint64_t>(t)}));
    ASSERT_EQ(s.replay_buffer.size(), 10u);
    for (const Sample& x : s.replay_buffer) ++hits[static_cast<std::size_t>(x.features[0])];
  }
  double chi2 = 0.0;
  for (int h : hits) {
    const double freq = static_cast<double>(h) / kTrials;
    EXPECT_NEAR(freq, 0.01, 0.01);
    chi2 += (h - 100.0) * (h - 100.0) / 100.0;
  }
  // 999 degrees of freedom: mean 999, sd ~45.
  EXPECT_LT(chi2, 999 + 6 * 45);
}

TEST(Replay, CapacityAndSeenLabelsInvariant) {
  StrategyState s;
  std::set<std::size_t> seen;
  for (std::size_t t = 0; t < 4; ++t) {
    Dataset task(4, 1);
    for (std::size_t i = 0; i < 37 + 11 * t; ++i) task.add({{static_cast<double>(i)}, t});
    seen.insert(t);
    s = replay_update({25, 0.5}, s, task, t);
    EXPECT_LE(s.replay_buffer.size(), 25u);
    for (const Sample& x : s.replay_buffer) EXPECT_TRUE(seen.count(x.label));
  }
}

TEST(Compose, NaiveAndEwcAndLwfReturnCurrentTask) {
  const Dataset d = test::blobs(1, {10, 10});
  StrategyState s;
  s.accumulated = test::blobs(2, {5, 5});
  s.replay_buffer = {d[0]};
  for (const StrategyKind& k : {StrategyKind{NaiveStrategy{}}, StrategyKind{EwcStrategy{}}, StrategyKind{LwfStrategy{}}})
    EXPECT_EQ(compose_training_set(k, s, d, 1), d);
}

TEST(Compose, CumulativeUnion) {
  StrategyState s;
  s = consolidate_after_task(CumulativeStrategy{}, s, ParamVector{}, ModelSpec({4, 2}), test::blobs(1, {50, 50}), 0);
  s = consolidate_after_task(CumulativeStrategy{}, s, ParamVector{}, ModelSpec({4, 2}), test::blobs(3, {20, 20}), 0);
  EXPECT_EQ(compose_training_set(CumulativeStrategy{}, s, test::blobs(2, {40, 40}), 0).size(), 220u);
  StrategyState one;
  one = consolidate_after_task(CumulativeStrategy{}, one, ParamVector{}, ModelSpec({4, 2}), test::blobs(1, {50, 50}), 0);
  EXPECT_EQ(compose_training_set(CumulativeStrategy{}, one, test::blobs(2, {40, 40}), 0).size(), 180u);
}

TEST(Compose, ReplayEmptyBufferIsCurrentTask) {
  const Dataset d = test::blobs(1, {10, 10});
  EXPECT_EQ(compose_training_set(ReplayStrategy{}, {}, d, 3), d);
}

TEST(Compose, ReplayMixFraction) {
  const Dataset d = stream_of(60, 1);
  StrategyState s = replay_update({20, 0.5}, {}, stream_of(100, 0), 1);
  for (double mix : {0.25, 0.5, 0.75}) {
    const Dataset out = compose_training_set(ReplayStrategy{20, mix}, s, d, 4);
    const double replayed = static_cast<double>(out.class_counts()[0]);
    EXPECT_NEAR(replayed / out.size(), mix, 0.01);
    EXPECT_EQ(out.class_counts()[1], 60u);
  }
  EXPECT_EQ(compose_training_set(ReplayStrategy{20, 0.5}, s, d, 4), compose_training_set(ReplayStrategy{20, 0.5}, s, d, 4));
}

TEST(Consolidate, NaiveUnchanged) {
  StrategyState s;
  s.teacher_params = ParamVector{1.0};
  const ModelSpec spec({4, 2});
  EXPECT_EQ(consolidate_after_task(NaiveStrategy{}, s, init_params(spec, 1), spec, test::blobs(1, {3, 3}), 0), s);
}

TEST(Consolidate, EwcAnchorsAndSumsFishers) {
  const ModelSpec spec({4, 6, 4});
  const Dataset task1 = test::blobs(1, {20, 20, 0, 0}), task2 = test::blobs(2, {0, 0, 20, 20});
  const ParamVector p1 = init_params(spec, 1), p2 = init_params(spec, 2);
  StrategyState s = consolidate_after_task(EwcStrategy{}, {}, p1, spec, task1, 0);
  EXPECT_EQ(*s.anchor_params, p1);
  s = consolidate_after_task(EwcStrategy{}, s, p2, spec, task2, 0);
  EXPECT_EQ(*s.anchor_params, p2);
  const auto f1 = fisher_loop_oracle(p1, spec, task1), f2 = fisher_loop_oracle(p2, spec, task2);
  for (std::size_t i = 0; i < f1.size(); ++i) EXPECT_NEAR((*s.fisher_diag)[i], f1[i] + f2[i], 1e-12);
}

TEST(Consolidate, LwfStoresTeacher) {
  const ModelSpec spec({4, 3});
  const ParamVector p = init_params(spec, 5);
  const StrategyState s = consolidate_after_task(LwfStrategy{}, {}, p, spec, test::blobs(1, {3, 3, 3}), 0);
  EXPECT_EQ(*s.teacher_params, p);
}

}  // namespace
}  // namespace fedcl
