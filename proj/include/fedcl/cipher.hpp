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

// Keyed invertible input transform. Every feature vector is encrypted before
// it reaches a node; training and inference only ever see ciphertext.
//
//   permute_only:    out[i] = in[perm[i]]
//   permute_affine:  out[i] = scale[i] * in[perm[i]] + offset[i]
//
// Not a cryptographic construction.

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedcl/data.hpp"
#include "fedcl/error.hpp"
#include "fedcl/random.hpp"
#include "fedcl/tensor_nn.hpp"

namespace fedcl {

enum class CipherMode { permute_only, permute_affine };

inline std::string to_string(CipherMode m) {
  return m == CipherMode::permute_only ? "permute_only" : "permute_affine";
}

class CipherKey {
 public:
  Seed seed() const { return seed_; }
  std::size_t dim() const { return perm_.size(); }
  CipherMode mode() const { return mode_; }
  const std::vector<std::size_t>& permutation() const { return perm_; }
  const std::vector<double>& scales() const { return scales_; }
  const std::vector<double>& offsets() const { return offsets_; }

  /// Key with explicit components, for tests and hand-built transforms.
  static CipherKey from_parts(std::vector<std::size_t> permutation, std::vector<double> scales,
                              std::vector<double> offsets, CipherMode mode, Seed seed = 0) {
    const std::size_t n = permutation.size();
    if (n == 0) throw InvalidArgument("CipherKey: dim must be positive");
    std::vector<std::size_t> sorted = permutation;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; ++i)
      if (sorted[i] != i) throw InvalidArgument("CipherKey: permutation is not a bijection");
    if (mode == CipherMode::permute_only) {
      scales.assign(n, 1.0);
      offsets.assign(n, 0.0);
    }
    if (scales.size() != n || offsets.size() != n) throw ShapeError("CipherKey: component lengths differ");
    for (double s : scales)
      if (!(s >= 0.5 && s <= 2.0)) throw InvalidArgument("CipherKey: scales must lie in [0.5, 2]");
    CipherKey k;
    k.seed_ = seed;
    k.mode_ = mode;
    k.perm_ = std::move(permutation);
    k.scales_ = std::move(scales);
    k.offsets_ = std::move(offsets);
    return k;
  }

  friend bool operator==(const CipherKey&, const CipherKey&) = default;

 private:
  friend CipherKey derive_key(Seed, std::size_t, CipherMode);

  Seed seed_ = 0;
  CipherMode mode_ = CipherMode::permute_only;
  std::vector<std::size_t> perm_;
  std::vector<double> scales_;
  std::vector<double> offsets_;
};

/// Fisher-Yates permutation, then scales in [0.5, 2] and offsets in [-1, 1],
/// all from one stream seeded by `seed`. The affine components are drawn in
/// both modes so the permutation of a seed does not depend on the mode.
inline CipherKey derive_key(Seed seed, std::size_t dim, CipherMode mode) {
  if (dim == 0) throw InvalidArgument("derive_key: dim must be positive");
  Rng rng(seed);
  CipherKey k;
  k.seed_ = seed;
  k.mode_ = mode;
  k.perm_.resize(dim);
  std::iota(k.perm_.begin(), k.perm_.end(), std::size_t{0});
  for (std::size_t i = dim - 1; i > 0; --i) std::swap(k.perm_[i], k.perm_[rng.index(i + 1)]);
  k.scales_.resize(dim);
  k.offsets_.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    k.scales_[i] = rng.uniform(0.5, 2.0);
    k.offsets_[i] = rng.uniform(-1.0, 1.0);
  }
  if (mode == CipherMode::permute_only) {
    k.scales_.assign(dim, 1.0);
    k.offsets_.assign(dim, 0.0);
  }
  return k;
}

inline std::vector<double> encrypt(const CipherKey& key, std::span<const double> features) {
  if (features.size() != key.dim())
    throw ShapeError("encrypt: input length " + std::to_string(features.size()) + " does not match key dim " +
                     std::to_string(key.dim()));
  std::vector<double> out(key.dim());
  const auto& p = key.permutation();
  if (key.mode() == CipherMode::permute_only) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = features[p[i]];
  } else {
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = key.scales()[i] * features[p[i]] + key.offsets()[i];
  }
  return out;
}

inline std::vector<double> decrypt(const CipherKey& key, std::span<const double> ciphertext) {
  if (ciphertext.size() != key.dim())
    throw ShapeError("decrypt: input length " + std::to_string(ciphertext.size()) + " does not match key dim " +
                     std::to_string(key.dim()));
  std::vector<double> out(key.dim());
  const auto& p = key.permutation();
  if (key.mode() == CipherMode::permute_only) {
    for (std::size_t i = 0; i < out.size(); ++i) out[p[i]] = ciphertext[i];
  } else {
    for (std::size_t i = 0; i < out.size(); ++i)
      out[p[i]] = (ciphertext[i] - key.offsets()[i]) / key.scales()[i];
  }
  return out;
}

inline Dataset encrypt_dataset(const CipherKey& key, const Dataset& data) {
  Dataset out = data.like();
  for (const Sample& s : data) out.add(Sample{encrypt(key, s.features), s.label});
  return out;
}

/// Parameters whose first layer reads ciphertext coordinate i where the
/// original read plaintext feature perm[i]. For a permute_only key, the
/// permuted net on ciphertext computes the same function as the original net
/// on plaintext.
inline ParamVector permute_input_columns(const ParamVector& params, const ModelSpec& spec,
                                         const CipherKey& key) {
  if (key.dim() != spec.input_dim()) throw ShapeError("permute_input_columns: key dim does not match model");
  ParamVector out = params;
  const std::size_t in = spec.fan_in(0);
  const std::size_t w0 = spec.weight_offset(0);
  for (std::size_t o = 0; o < spec.fan_out(0); ++o)
    for (std::size_t i = 0; i < in; ++i) out[w0 + o * in + i] = params[w0 + o * in + key.permutation()[i]];
  return out;
}

}  // namespace fedcl
