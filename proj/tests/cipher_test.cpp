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

#include "fedcl/cipher.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "test_util.hpp"

namespace fedcl {
namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.0, 3.0);
  return v;
}

TEST(DeriveKey, Deterministic) {
  for (CipherMode m : {CipherMode::permute_only, CipherMode::permute_affine})
    EXPECT_EQ(derive_key(5, 32, m), derive_key(5, 32, m));
}

TEST(DeriveKey, SingleDimensionIsIdentity) {
  EXPECT_EQ(derive_key(123, 1, CipherMode::permute_affine).permutation(), (std::vector<std::size_t>{0}));
}

TEST(DeriveKey, DistinctSeedsGiveDistinctPermutations) {
  EXPECT_NE(derive_key(1, 64, CipherMode::permute_only).permutation(),
            derive_key(2, 64, CipherMode::permute_only).permutation());
}

TEST(DeriveKey, Invariants) {
  for (Seed s = 0; s < 20; ++s) {
    const CipherKey k = derive_key(s, 17, CipherMode::permute_affine);
    std::vector<std::size_t> sorted = k.permutation();
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
    for (double sc : k.scales()) {
      EXPECT_GE(sc, 0.5);
      EXPECT_LE(sc, 2.0);
    }
    for (double off : k.offsets()) {
      EXPECT_GE(off, -1.0);
      EXPECT_LE(off, 1.0);
    }
  }
  EXPECT_THROW(derive_key(1, 0, CipherMode::permute_only), InvalidArgument);
}

TEST(Encrypt, IdentityPermuteOnly) {
  const CipherKey k = CipherKey::from_parts({0, 1, 2}, {}, {}, CipherMode::permute_only);
  EXPECT_EQ(encrypt(k, std::vector<double>{4, 5, 6}), (std::vector<double>{4, 5, 6}));
}

TEST(Encrypt, SwapPermutation) {
  const CipherKey k = CipherKey::from_parts({1, 0}, {}, {}, CipherMode::permute_only);
  EXPECT_EQ(encrypt(k, std::vector<double>{3, 7}), (std::vector<double>{7, 3}));
}

TEST(Encrypt, AffineArithmetic) {
  const CipherKey k = CipherKey::from_parts({0}, {2.0}, {1.0}, CipherMode::permute_affine);
  EXPECT_EQ(encrypt(k, std::vector<double>{3}), (std::vector<double>{7}));
  EXPECT_EQ(decrypt(k, std::vector<double>{7}), (std::vector<double>{3}));
}

TEST(Encrypt, ShapeErrors) {
  const CipherKey k = derive_key(3, 4, CipherMode::permute_affine);
  EXPECT_THROW(encrypt(k, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(decrypt(k, std::vector<double>{1, 2, 3, 4, 5}), ShapeError);
}

TEST(FromParts, RejectsBadKeys) {
  EXPECT_THROW(CipherKey::from_parts({0, 0}, {}, {}, CipherMode::permute_only), InvalidArgument);
  EXPECT_THROW(CipherKey::from_parts({0}, {0.1}, {0.0}, CipherMode::permute_affine), InvalidArgument);
  EXPECT_THROW(CipherKey::from_parts({0, 1}, {1.0}, {0.0}, CipherMode::permute_affine), ShapeError);
}

TEST(Decrypt, RoundTripBothModes) {
  Rng rng(31);
  double worst = 0.0;
  for (Seed s = 0; s < 10; ++s)
    for (CipherMode m : {CipherMode::permute_only, CipherMode::permute_affine}) {
      const CipherKey k = derive_key(s, 1 + s * 7, m);
      for (int i = 0; i < 100; ++i) {
        const auto x = random_vector(rng, k.dim());
        const auto y = decrypt(k, encrypt(k, x));
        for (std::size_t j = 0; j < x.size(); ++j) worst = std::max(worst, std::abs(y[j] - x[j]));
      }
    }
  EXPECT_LE(worst, 1e-12);
}

TEST(Decrypt, PermuteOnlyInverseIsInversePermutation) {
  const CipherKey k = derive_key(8, 12, CipherMode::permute_only);
  std::vector<std::size_t> inv(k.dim());
  for (std::size_t i = 0; i < k.dim(); ++i) inv[k.permutation()[i]] = i;
  const CipherKey inverse = CipherKey::from_parts(inv, {}, {}, CipherMode::permute_only);
  Rng rng(2);
  const auto c = random_vector(rng, 12);
  EXPECT_EQ(decrypt(k, c), encrypt(inverse, c));
  EXPECT_EQ(decrypt(k, std::vector<double>(12, 0.0)), std::vector<double>(12, 0.0));
}

TEST(Encrypt, KeySensitivity) {
  Rng rng(40);
  for (CipherMode m : {CipherMode::permute_only, CipherMode::permute_affine}) {
    const CipherKey a = derive_key(100, 16, m), b = derive_key(101, 16, m);
    int differing = 0;
    for (int i = 0; i < 200; ++i) {
      const auto x = random_vector(rng, 16);
      const auto ca = encrypt(a, x), cb = encrypt(b, x);
      bool diff = false;
      for (std::size_t j = 0; j < 16; ++j) diff = diff || std::abs(ca[j] - cb[j]) > 1e-6;
      differing += diff;
    }
    EXPECT_GE(differing, 198);
  }
}

TEST(Encrypt, DatasetKeepsLabels) {
  const Dataset d = test::blobs(2, {5, 5});
  const CipherKey k = derive_key(4, d.feature_dim(), CipherMode::permute_affine);
  const Dataset e = encrypt_dataset(k, d);
  ASSERT_EQ(e.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(e[i].label, d[i].label);
    EXPECT_NE(e[i].features, d[i].features);
  }
}

TEST(Encrypt, PermutedNetComputesSameFunction) {
  const ModelSpec spec({6, 5, 3});
  const ParamVector p = init_params(spec, 1);
  const CipherKey k = derive_key(77, 6, CipherMode::permute_only);
  const ParamVector q = permute_input_columns(p, spec, k);
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto x = random_vector(rng, 6);
    const auto a = forward(p, spec, x), b = forward(q, spec, encrypt(k, x));
    for (std::size_t c = 0; c < a.size(); ++c) EXPECT_NEAR(a[c], b[c], 1e-12);
  }
}

}  // namespace
}  // namespace fedcl
