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

// Classification metrics, run aggregation and forgetting measures.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fedcl/error.hpp"

namespace fedcl {

/// counts(t, p): samples of true class t predicted as p.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t class_count) : n_(class_count), counts_(class_count * class_count, 0) {}

  std::size_t class_count() const { return n_; }
  std::size_t& operator()(std::size_t truth, std::size_t pred) { return counts_[truth * n_ + pred]; }
  std::size_t operator()(std::size_t truth, std::size_t pred) const { return counts_[truth * n_ + pred]; }

  std::size_t total() const {
    std::size_t t = 0;
    for (std::size_t c : counts_) t += c;
    return t;
  }
  std::size_t trace() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < n_; ++i) t += (*this)(i, i);
    return t;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.n_ != n_) throw ShapeError("ConfusionMatrix: class counts differ");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    return *this;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t n_;
  std::vector<std::size_t> counts_;
};

inline ConfusionMatrix confusion(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                                 std::size_t class_count) {
  if (truth.size() != pred.size()) throw ShapeError("confusion: label vectors differ in length");
  ConfusionMatrix cm(class_count);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= class_count || pred[i] >= class_count) throw InvalidArgument("confusion: label out of range");
    ++cm(truth[i], pred[i]);
  }
  return cm;
}

struct MetricsReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  /// Classes whose precision, recall or F1 had a zero denominator and
  /// contributed 0 to the macro mean.
  std::vector<std::size_t> zero_denominator_classes;
};

/// Macro-averaged metrics. A per-class value with a zero denominator counts
/// as 0 in the mean.
inline MetricsReport report(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw DataError("report: empty evaluation");
  const std::size_t C = cm.class_count();
  MetricsReport r;
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t o = 0; o < C; ++o) {
      predicted += cm(o, c);
      actual += cm(c, o);
    }
    const auto tp = static_cast<double>(cm(c, c));
    const double precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
    const double recall = actual ? tp / static_cast<double>(actual) : 0.0;
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    if (!predicted || !actual || precision + recall == 0.0) r.zero_denominator_classes.push_back(c);
    r.macro_precision += precision;
    r.macro_recall += recall;
    r.macro_f1 += f1;
  }
  r.macro_precision /= static_cast<double>(C);
  r.macro_recall /= static_cast<double>(C);
  r.macro_f1 /= static_cast<double>(C);
  return r;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct RunAggregate {
  MeanStd accuracy, macro_precision, macro_recall, macro_f1;
  std::size_t runs = 0;
  /// Set when runs < 2; std is reported as 0.
  bool std_undefined = false;
};

/// Mean and sample standard deviation (denominator n - 1); std is 0 for n < 2.
inline MeanStd mean_std(std::span<const double> xs) {
  if (xs.empty()) throw DataError("mean_std: no values");
  MeanStd out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return out;
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return out;
}

inline RunAggregate aggregate_runs(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw DataError("aggregate_runs: no reports");
  const auto column = [&](double MetricsReport::*field) {
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(r.*field);
    return mean_std(v);
  };
  RunAggregate agg;
  agg.accuracy = column(&MetricsReport::accuracy);
  agg.macro_precision = column(&MetricsReport::macro_precision);
  agg.macro_recall = column(&MetricsReport::macro_recall);
  agg.macro_f1 = column(&MetricsReport::macro_f1);
  agg.runs = reports.size();
  agg.std_undefined = reports.size() < 2;
  return agg;
}

struct ForgettingMeasures {
  double average_accuracy = 0.0;
  double average_forgetting = 0.0;
};

/// acc[i][j]: accuracy on task j after finishing task i (j <= i; entries with
/// j > i are ignored). Forgetting of task j is the best accuracy it ever had
/// minus its final accuracy.
inline ForgettingMeasures forgetting_measures(const std::vector<std::vector<double>>& acc) {
  if (acc.empty()) throw DataError("forgetting_measures: no tasks");
  const std::size_t T = acc.size();
  for (std::size_t i = 0; i < T; ++i)
    if (acc[i].size() < i + 1) throw ShapeError("forgetting_measures: row " + std::to_string(i) + " is too short");
  const std::size_t last = T - 1;
  ForgettingMeasures out;
  for (std::size_t j = 0; j < T; ++j) out.average_accuracy += acc[last][j];
  out.average_accuracy /= static_cast<double>(T);
  if (T == 1) return out;
  for (std::size_t j = 0; j < last; ++j) {
    double best = acc[j][j];
    for (std::size_t i = j; i < T; ++i) best = std::max(best, acc[i][j]);
    out.average_forgetting += best - acc[last][j];
  }
  out.average_forgetting /= static_cast<double>(last);
  return out;
}

}  // namespace fedcl
