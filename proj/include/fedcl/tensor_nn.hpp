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

// Dense feedforward classifier with softmax cross-entropy, backprop, SGD and
// a central-difference gradient oracle.
//
// Parameter layout is a single flat vector. For each layer l (input to
// output) the block is W_l stored row-major as (out x in), then b_l (out).
// Column j of W_l multiplies input feature j.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedcl/error.hpp"
#include "fedcl/random.hpp"

namespace fedcl {

enum class Activation { relu, tanh };

inline std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

class ModelSpec {
 public:
  explicit ModelSpec(std::vector<std::size_t> layer_sizes, Activation activation = Activation::relu)
      : sizes_(std::move(layer_sizes)), activation_(activation) {
    if (sizes_.size() < 2) throw InvalidArgument("ModelSpec: need at least an input and an output layer");
    for (std::size_t s : sizes_)
      if (s == 0) throw InvalidArgument("ModelSpec: layer sizes must be positive");
    if (sizes_.back() < 2) throw InvalidArgument("ModelSpec: class count must be at least 2");
    offsets_.reserve(layer_count());
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer_count(); ++l) {
      offsets_.push_back(off);
      off += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
    }
    param_count_ = off;
  }

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  Activation activation() const { return activation_; }
  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t class_count() const { return sizes_.back(); }
  /// Number of weight layers.
  std::size_t layer_count() const { return sizes_.size() - 1; }
  std::size_t param_count() const { return param_count_; }
  std::size_t fan_in(std::size_t layer) const { return sizes_[layer]; }
  std::size_t fan_out(std::size_t layer) const { return sizes_[layer + 1]; }
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + sizes_[layer] * sizes_[layer + 1];
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

 private:
  std::vector<std::size_t> sizes_;
  Activation activation_;
  std::vector<std::size_t> offsets_;
  std::size_t param_count_ = 0;
};

/// Flat real vector tagged with its role so parameters and gradients do not mix.
template <class Tag>
class FlatVector {
 public:
  FlatVector() = default;
  explicit FlatVector(std::size_t n, double fill = 0.0) : v_(n, fill) {}
  explicit FlatVector(std::vector<double> values) : v_(std::move(values)) {}
  FlatVector(std::initializer_list<double> values) : v_(values) {}

  std::size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }
  auto begin() { return v_.begin(); }
  auto end() { return v_.end(); }
  auto begin() const { return v_.begin(); }
  auto end() const { return v_.end(); }
  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::span<const double> span() const { return v_; }
  std::span<double> span() { return v_; }
  const std::vector<double>& values() const { return v_; }
  std::vector<double>& values() { return v_; }

  bool all_finite() const {
    return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
  }

  friend bool operator==(const FlatVector&, const FlatVector&) = default;

 private:
  std::vector<double> v_;
};

struct ParamTag {};
struct GradientTag {};
using ParamVector = FlatVector<ParamTag>;
using Gradient = FlatVector<GradientTag>;

/// Row-major mini-batch.
class Batch {
 public:
  Batch(std::size_t input_dim, std::vector<double> inputs, std::vector<std::size_t> labels)
      : dim_(input_dim), inputs_(std::move(inputs)), labels_(std::move(labels)) {
    if (labels_.empty()) throw InvalidArgument("Batch: batch size must be at least 1");
    if (dim_ == 0 || inputs_.size() != dim_ * labels_.size())
      throw ShapeError("Batch: inputs are not (batch_size x input_dim)");
  }

  std::size_t size() const { return labels_.size(); }
  std::size_t input_dim() const { return dim_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(inputs_).subspan(i * dim_, dim_);
  }
  std::size_t label(std::size_t i) const { return labels_[i]; }
  const std::vector<std::size_t>& labels() const { return labels_; }
  const std::vector<double>& inputs() const { return inputs_; }

 private:
  std::size_t dim_;
  std::vector<double> inputs_;
  std::vector<std::size_t> labels_;
};

/// Softmax of logits / temperature with max subtraction.
inline std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0) {
  std::vector<double> p(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - mx) / temperature);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

/// log softmax(logits / temperature), stable.
inline std::vector<double> log_softmax(std::span<const double> logits, double temperature = 1.0) {
  std::vector<double> out(logits.size());
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp((l - mx) / temperature);
  const double log_z = std::log(z);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = (logits[i] - mx) / temperature - log_z;
  return out;
}

inline ParamVector init_params(const ModelSpec& spec, Seed seed) {
  ParamVector p(spec.param_count(), 0.0);
  Rng rng(seed);
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const double scale = std::sqrt(2.0 / static_cast<double>(spec.fan_in(l)));
    const std::size_t w0 = spec.weight_offset(l);
    const std::size_t n = spec.fan_in(l) * spec.fan_out(l);
    for (std::size_t i = 0; i < n; ++i) p[w0 + i] = rng.normal(0.0, scale);
  }
  return p;
}

namespace detail {

inline void check_params(const ParamVector& params, const ModelSpec& spec) {
  if (params.size() != spec.param_count())
    throw ShapeError("parameter vector length " + std::to_string(params.size()) +
                     " does not match model (" + std::to_string(spec.param_count()) + ")");
}

/// Per-layer values of one forward pass. pre[l] is the affine output of layer
/// l, post[l] its input (post[0] is the sample itself).
struct ForwardTrace {
  std::vector<std::vector<double>> post;
  std::vector<std::vector<double>> pre;
  std::span<const double> logits() const { return pre.back(); }
};

inline double activate(Activation a, double x) {
  return a == Activation::relu ? (x > 0.0 ? x : 0.0) : std::tanh(x);
}

/// Derivative expressed through the pre-activation and activation output.
inline double activate_grad(Activation a, double pre, double post) {
  return a == Activation::relu ? (pre > 0.0 ? 1.0 : 0.0) : 1.0 - post * post;
}

inline ForwardTrace trace_forward(const ParamVector& params, const ModelSpec& spec,
                                  std::span<const double> input) {
  ForwardTrace t;
  const std::size_t L = spec.layer_count();
  t.post.resize(L);
  t.pre.resize(L);
  t.post[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = spec.fan_in(l), out = spec.fan_out(l);
    const double* w = params.data() + spec.weight_offset(l);
    const double* b = params.data() + spec.bias_offset(l);
    const std::vector<double>& x = t.post[l];
    std::vector<double>& z = t.pre[l];
    z.resize(out);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b[o];
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
      z[o] = acc;
    }
    if (l + 1 < L) {
      t.post[l + 1].resize(out);
      for (std::size_t o = 0; o < out; ++o) t.post[l + 1][o] = activate(spec.activation(), z[o]);
    }
  }
  return t;
}

/// grad += scale * d(output)/d(params), where dlogits is d(output)/d(logits).
inline void accumulate_backward(const ParamVector& params, const ModelSpec& spec,
                                const ForwardTrace& t, std::span<const double> dlogits,
                                double scale, Gradient& grad) {
  std::vector<double> delta(dlogits.begin(), dlogits.end());
  for (std::size_t l = spec.layer_count(); l-- > 0;) {
    const std::size_t in = spec.fan_in(l), out = spec.fan_out(l);
    double* gw = grad.data() + spec.weight_offset(l);
    double* gb = grad.data() + spec.bias_offset(l);
    const std::vector<double>& x = t.post[l];
    for (std::size_t o = 0; o < out; ++o) {
      const double d = scale * delta[o];
      gb[o] += d;
      double* row = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) row[i] += d * x[i];
    }
    if (l == 0) break;
    const double* w = params.data() + spec.weight_offset(l);
    std::vector<double> prev(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += row[i] * delta[o];
    }
    for (std::size_t i = 0; i < in; ++i)
      prev[i] *= activate_grad(spec.activation(), t.pre[l - 1][i], t.post[l][i]);
    delta = std::move(prev);
  }
}

/// Cross-entropy of one sample and its gradient with respect to the logits.
inline double cross_entropy(std::span<const double> logits, std::size_t label,
                            std::vector<double>* dlogits) {
  std::vector<double> logp = log_softmax(logits);
  if (dlogits) {
    dlogits->resize(logits.size());
    for (std::size_t c = 0; c < logits.size(); ++c)
      (*dlogits)[c] = std::exp(logp[c]) - (c == label ? 1.0 : 0.0);
  }
  return -logp[label];
}

inline void check_batch(const ModelSpec& spec, const Batch& batch) {
  if (batch.input_dim() != spec.input_dim())
    throw ShapeError("batch input dim " + std::to_string(batch.input_dim()) +
                     " does not match model input dim " + std::to_string(spec.input_dim()));
  for (std::size_t y : batch.labels())
    if (y >= spec.class_count()) throw InvalidArgument("batch label out of range");
}

}  // namespace detail

inline std::vector<double> forward(const ParamVector& params, const ModelSpec& spec,
                                   std::span<const double> input) {
  detail::check_params(params, spec);
  if (input.size() != spec.input_dim())
    throw ShapeError("input length " + std::to_string(input.size()) +
                     " does not match model input dim " + std::to_string(spec.input_dim()));
  detail::ForwardTrace t = detail::trace_forward(params, spec, input);
  return std::move(t.pre.back());
}

/// Index of the largest logit; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> logits) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c)
    if (logits[c] > logits[best]) best = c;
  return best;
}

inline std::size_t predict(const ParamVector& params, const ModelSpec& spec,
                           std::span<const double> input) {
  return argmax(forward(params, spec, input));
}

struct LossAndGrad {
  double loss = 0.0;
  Gradient grad;
};

/// Mean softmax cross-entropy over the batch with its exact gradient.
inline LossAndGrad loss_and_grad(const ParamVector& params, const ModelSpec& spec,
                                 const Batch& batch) {
  detail::check_params(params, spec);
  detail::check_batch(spec, batch);
  LossAndGrad out{0.0, Gradient(spec.param_count(), 0.0)};
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> dlogits;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    detail::ForwardTrace t = detail::trace_forward(params, spec, batch.row(s));
    out.loss += detail::cross_entropy(t.logits(), batch.label(s), &dlogits);
    detail::accumulate_backward(params, spec, t, dlogits, inv_n, out.grad);
  }
  out.loss *= inv_n;
  if (!std::isfinite(out.loss) || !out.grad.all_finite())
    throw NumericError("non-finite loss or gradient");
  return out;
}

/// Mean cross-entropy only; used by the finite-difference oracle.
inline double loss(const ParamVector& params, const ModelSpec& spec, const Batch& batch) {
  detail::check_params(params, spec);
  detail::check_batch(spec, batch);
  double total = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    detail::ForwardTrace t = detail::trace_forward(params, spec, batch.row(s));
    total += detail::cross_entropy(t.logits(), batch.label(s), nullptr);
  }
  return total / static_cast<double>(batch.size());
}

inline ParamVector sgd_step(const ParamVector& params, const Gradient& grad, double lr) {
  if (params.size() != grad.size()) throw ShapeError("sgd_step: parameter/gradient length mismatch");
  ParamVector out = params;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= lr * grad[i];
  return out;
}

/// Central differences of an arbitrary scalar loss.
template <class LossFn>
Gradient finite_diff_grad(const ParamVector& params, LossFn&& loss_fn, double h) {
  if (!(h > 0.0)) throw InvalidArgument("finite_diff_grad: h must be positive");
  Gradient g(params.size(), 0.0);
  ParamVector probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = loss_fn(static_cast<const ParamVector&>(probe));
    probe[i] = orig - h;
    const double down = loss_fn(static_cast<const ParamVector&>(probe));
    probe[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline Gradient finite_diff_grad(const ParamVector& params, const ModelSpec& spec,
                                 const Batch& batch, double h) {
  return finite_diff_grad(
      params, [&](const ParamVector& p) { return loss(p, spec, batch); }, h);
}

}  // namespace fedcl
