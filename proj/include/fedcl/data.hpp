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

// Synthetic data generation, image-style preprocessing, SMOTE rebalancing,
// stratified splitting, continual task construction and node sharding.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedcl/error.hpp"
#include "fedcl/log.hpp"
#include "fedcl/random.hpp"
#include "fedcl/tensor_nn.hpp"

namespace fedcl {

struct Sample {
  std::vector<double> features;
  std::size_t label = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Per-class sample counts, indexed by class.
using ClassDistribution = std::vector<std::size_t>;

class Dataset {
 public:
  Dataset(std::size_t class_count, std::size_t feature_dim)
      : class_count_(class_count), feature_dim_(feature_dim) {
    if (class_count == 0 || feature_dim == 0)
      throw InvalidArgument("Dataset: class_count and feature_dim must be positive");
  }
  Dataset(std::size_t class_count, std::size_t feature_dim, std::vector<Sample> samples)
      : Dataset(class_count, feature_dim) {
    samples_.reserve(samples.size());
    for (Sample& s : samples) add(std::move(s));
  }

  void add(Sample s) {
    if (s.features.size() != feature_dim_)
      throw ShapeError("Dataset: sample has " + std::to_string(s.features.size()) +
                       " features, expected " + std::to_string(feature_dim_));
    if (s.label >= class_count_) throw InvalidArgument("Dataset: label out of range");
    samples_.push_back(std::move(s));
  }

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  std::size_t class_count() const { return class_count_; }
  std::size_t feature_dim() const { return feature_dim_; }
  const std::vector<Sample>& samples() const { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  auto begin() const { return samples_.begin(); }
  auto end() const { return samples_.end(); }

  ClassDistribution class_counts() const {
    ClassDistribution counts(class_count_, 0);
    for (const Sample& s : samples_) ++counts[s.label];
    return counts;
  }

  /// Sorted labels that occur at least once.
  std::vector<std::size_t> present_labels() const {
    ClassDistribution counts = class_counts();
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < counts.size(); ++c)
      if (counts[c] > 0) out.push_back(c);
    return out;
  }

  /// Empty dataset with the same shape.
  Dataset like() const { return Dataset(class_count_, feature_dim_); }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  std::size_t class_count_;
  std::size_t feature_dim_;
  std::vector<Sample> samples_;
};

/// Samples of `b` appended to a copy of `a`.
inline Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.class_count() != b.class_count() || a.feature_dim() != b.feature_dim())
    throw ShapeError("concat: datasets have different shapes");
  Dataset out = a;
  for (const Sample& s : b) out.add(s);
  return out;
}

inline Batch make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<double> inputs;
  std::vector<std::size_t> labels;
  inputs.reserve(indices.size() * data.feature_dim());
  labels.reserve(indices.size());
  for (std::size_t i : indices) {
    const Sample& s = data[i];
    inputs.insert(inputs.end(), s.features.begin(), s.features.end());
    labels.push_back(s.label);
  }
  return Batch(data.feature_dim(), std::move(inputs), std::move(labels));
}

inline Batch make_batch(const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return make_batch(data, idx);
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - b[i]) * (a[i] - b[i]);
  return d;
}

// ---------------------------------------------------------------------------
// Generation

/// Class means, pairwise at least 4 * spread apart. Mean coordinates are
/// uniform in a box of half-width max(1, 4 * spread) that widens if
/// rejection sampling stalls.
inline std::vector<std::vector<double>> place_class_means(Rng& rng, std::size_t class_count,
                                                          std::size_t feature_dim, double spread) {
  const double min_dist = 4.0 * spread;
  double half_width = std::max(1.0, min_dist);
  std::vector<std::vector<double>> means;
  std::size_t failures = 0;
  while (means.size() < class_count) {
    std::vector<double> m(feature_dim);
    for (double& x : m) x = rng.uniform(-half_width, half_width);
    const bool ok = std::all_of(means.begin(), means.end(), [&](const std::vector<double>& o) {
      return std::sqrt(squared_distance(m, o)) >= min_dist;
    });
    if (ok) {
      means.push_back(std::move(m));
    } else if (++failures % 1000 == 0) {
      half_width *= 1.25;
    }
  }
  return means;
}

/// Isotropic Gaussian blobs, one per class, with `per_class_counts[c]` samples
/// of class c. Samples are emitted class by class.
inline Dataset gen_gaussian_clusters(Seed seed, std::size_t class_count,
                                     const ClassDistribution& per_class_counts,
                                     std::size_t feature_dim, double cluster_spread) {
  if (class_count < 2) throw InvalidArgument("gen_gaussian_clusters: class_count must be >= 2");
  if (feature_dim < 2) throw InvalidArgument("gen_gaussian_clusters: feature_dim must be >= 2");
  if (!(cluster_spread > 0.0)) throw InvalidArgument("gen_gaussian_clusters: spread must be positive");
  if (per_class_counts.size() != class_count)
    throw ShapeError("gen_gaussian_clusters: need one count per class");
  Rng rng(seed);
  const auto means = place_class_means(rng, class_count, feature_dim, cluster_spread);
  Dataset out(class_count, feature_dim);
  for (std::size_t c = 0; c < class_count; ++c) {
    for (std::size_t i = 0; i < per_class_counts[c]; ++i) {
      Sample s{std::vector<double>(feature_dim), c};
      for (std::size_t d = 0; d < feature_dim; ++d) s.features[d] = rng.normal(means[c][d], cluster_spread);
      out.add(std::move(s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Image preprocessing

/// Dense row-major matrix used for image-shaped data.
class Image {
 public:
  Image(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), px_(rows * cols, fill) {
    if (rows == 0 || cols == 0) throw InvalidArgument("Image: dimensions must be positive");
  }
  Image(std::size_t rows, std::size_t cols, std::vector<double> pixels)
      : rows_(rows), cols_(cols), px_(std::move(pixels)) {
    if (rows == 0 || cols == 0) throw InvalidArgument("Image: dimensions must be positive");
    if (px_.size() != rows * cols) throw ShapeError("Image: pixel count does not match dimensions");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return px_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return px_[r * cols_ + c]; }
  const std::vector<double>& pixels() const { return px_; }

  double sum() const { return std::accumulate(px_.begin(), px_.end(), 0.0); }

 private:
  std::size_t rows_, cols_;
  std::vector<double> px_;
};

/// Bilinear resize with corner-aligned sampling: output corners land exactly
/// on input corners.
inline Image resize_bilinear(const Image& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw InvalidArgument("resize_bilinear: output size must be positive");
  Image out(out_h, out_w);
  const auto coord = [](std::size_t i, std::size_t n_out, std::size_t n_in) {
    return n_out == 1 ? 0.0
                      : static_cast<double>(i) * static_cast<double>(n_in - 1) /
                            static_cast<double>(n_out - 1);
  };
  for (std::size_t r = 0; r < out_h; ++r) {
    const double y = coord(r, out_h, img.rows());
    const std::size_t y0 = static_cast<std::size_t>(std::floor(y));
    const std::size_t y1 = std::min(y0 + 1, img.rows() - 1);
    const double fy = y - static_cast<double>(y0);
    for (std::size_t c = 0; c < out_w; ++c) {
      const double x = coord(c, out_w, img.cols());
      const std::size_t x0 = static_cast<std::size_t>(std::floor(x));
      const std::size_t x1 = std::min(x0 + 1, img.cols() - 1);
      const double fx = x - static_cast<double>(x0);
      const double top = (1.0 - fx) * img(y0, x0) + fx * img(y0, x1);
      const double bottom = (1.0 - fx) * img(y1, x0) + fx * img(y1, x1);
      out(r, c) = (1.0 - fy) * top + fy * bottom;
    }
  }
  return out;
}

/// Normalized 1-D Gaussian kernel of radius ceil(3 * sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian_kernel: sigma must be positive");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
    const double v = std::exp(-static_cast<double>(d * d) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(d + radius)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  return k;
}

/// Separable Gaussian smoothing, borders clamped.
inline Image gaussian_blur(const Image& img, double sigma) {
  const std::vector<double> k = gaussian_kernel(sigma);
  const auto radius = static_cast<std::ptrdiff_t>(k.size() / 2);
  const auto clamp = [](std::ptrdiff_t i, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  Image horiz(img.rows(), img.cols());
  for (std::size_t r = 0; r < img.rows(); ++r)
    for (std::size_t c = 0; c < img.cols(); ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -radius; d <= radius; ++d)
        acc += k[static_cast<std::size_t>(d + radius)] *
               img(r, clamp(static_cast<std::ptrdiff_t>(c) + d, img.cols()));
      horiz(r, c) = acc;
    }
  Image out(img.rows(), img.cols());
  for (std::size_t r = 0; r < img.rows(); ++r)
    for (std::size_t c = 0; c < img.cols(); ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -radius; d <= radius; ++d)
        acc += k[static_cast<std::size_t>(d + radius)] *
               horiz(clamp(static_cast<std::ptrdiff_t>(r) + d, img.rows()), c);
      out(r, c) = acc;
    }
  return out;
}

// ---------------------------------------------------------------------------
// SMOTE

/// Where a synthetic sample came from: indices into the input dataset.
struct SmoteParents {
  std::size_t output_index;
  std::size_t base;
  std::size_t neighbor;
};

struct SmoteResult {
  Dataset data;
  std::vector<SmoteParents> provenance;
};

/// Indices of the k nearest members (excluding `self`), nearest first, ties
/// by lower index.
inline std::vector<std::size_t> nearest_neighbors(const Dataset& data,
                                                  std::span<const std::size_t> members,
                                                  std::size_t self, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(members.size());
  for (std::size_t m : members)
    if (m != self) dist.emplace_back(squared_distance(data[self].features, data[m].features), m);
  k = std::min(k, dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  std::vector<std::size_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = dist[i].second;
  return out;
}

/// SMOTE with the parents of every synthetic sample recorded. Originals keep
/// their positions; synthetic samples are appended class by class.
inline SmoteResult smote_with_provenance(const Dataset& data, std::size_t k_neighbors,
                                         const ClassDistribution& target_counts, Seed seed) {
  if (k_neighbors == 0) throw InvalidArgument("smote: k_neighbors must be positive");
  if (target_counts.size() != data.class_count())
    throw ShapeError("smote: need one target count per class");
  const ClassDistribution counts = data.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (target_counts[c] < counts[c])
      throw InvalidArgument("smote: target for class " + std::to_string(c) + " is below its current count");
    if (target_counts[c] > counts[c] && counts[c] < 2)
      throw InsufficientSamplesError("smote: class " + std::to_string(c) + " has " +
                                     std::to_string(counts[c]) + " sample(s); need at least 2 to interpolate");
  }
  SmoteResult out{data, {}};
  Rng rng(seed);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (target_counts[c] == counts[c]) continue;
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data[i].label == c) members.push_back(i);
    const std::size_t k = std::min(k_neighbors, members.size() - 1);
    std::vector<std::vector<std::size_t>> neighbors;
    neighbors.reserve(members.size());
    for (std::size_t m : members) neighbors.push_back(nearest_neighbors(data, members, m, k));

    for (std::size_t made = counts[c]; made < target_counts[c]; ++made) {
      const std::size_t pick = rng.index(members.size());
      const std::size_t base = members[pick];
      const std::size_t nb = neighbors[pick][rng.index(k)];
      const double u = rng.uniform();
      Sample s{data[base].features, c};
      for (std::size_t d = 0; d < s.features.size(); ++d)
        s.features[d] += u * (data[nb].features[d] - s.features[d]);
      out.provenance.push_back({out.data.size(), base, nb});
      out.data.add(std::move(s));
    }
  }
  return out;
}

inline Dataset smote(const Dataset& data, std::size_t k_neighbors,
                     const ClassDistribution& target_counts, Seed seed) {
  return smote_with_provenance(data, k_neighbors, target_counts, seed).data;
}

// ---------------------------------------------------------------------------
// Splits, tasks and shards

/// Largest-remainder apportionment of `total` by `weights` (non-negative, not
/// all zero). Ties on the remainder go to the lower index.
inline std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights) {
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> out(weights.size(), 0);
  if (weights.empty() || !(wsum > 0.0)) return out;
  std::vector<double> frac(weights.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(total) * weights[i] / wsum;
    out[i] = static_cast<std::size_t>(std::floor(exact));
    frac[i] = exact - static_cast<double>(out[i]);
    assigned += out[i];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t i = 0; assigned < total; i = (i + 1) % order.size(), ++assigned) ++out[order[i]];
  return out;
}

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

/// Stratified split: each present class contributes round(f * count) test
/// samples, at least 1 and at most count - 1.
inline TrainTestSplit split(const Dataset& data, double test_fraction, Seed seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw InvalidArgument("split: test_fraction must be in (0, 1)");
  Rng rng(seed);
  TrainTestSplit out{data.like(), data.like()};
  std::vector<std::vector<std::size_t>> by_class(data.class_count());
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data[i].label].push_back(i);
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    if (members.size() < 2)
      throw DataError("split: class " + std::to_string(c) + " has a single sample");
    rng.shuffle(members.begin(), members.end());
    const auto n = static_cast<double>(members.size());
    std::size_t t = static_cast<std::size_t>(std::llround(test_fraction * n));
    t = std::clamp<std::size_t>(t, 1, members.size() - 1);
    test_idx.insert(test_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(t));
    train_idx.insert(train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(t), members.end());
  }
  rng.shuffle(train_idx.begin(), train_idx.end());
  rng.shuffle(test_idx.begin(), test_idx.end());
  for (std::size_t i : train_idx) out.train.add(data[i]);
  for (std::size_t i : test_idx) out.test.add(data[i]);
  return out;
}

enum class TaskRegime { class_incremental, data_incremental };

struct Task {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> classes;  // labels the task may contain
};

struct TaskSequence {
  std::vector<Task> tasks;
  TaskRegime regime = TaskRegime::class_incremental;

  std::size_t size() const { return tasks.size(); }
};

/// One task per class group; labels keep their global indices.
inline TaskSequence make_class_incremental_tasks(const Dataset& data,
                                                 const std::vector<std::vector<std::size_t>>& class_groups,
                                                 double test_fraction, Seed seed) {
  std::set<std::size_t> used;
  for (const auto& g : class_groups) {
    if (g.empty()) throw InvalidArgument("class groups: empty group");
    for (std::size_t c : g) {
      if (c >= data.class_count())
        throw InvalidArgument("class groups: class " + std::to_string(c) + " out of range");
      if (!used.insert(c).second)
        throw InvalidArgument("class groups: class " + std::to_string(c) + " appears in more than one group");
    }
  }
  TaskSequence seq{{}, TaskRegime::class_incremental};
  for (std::size_t t = 0; t < class_groups.size(); ++t) {
    const std::set<std::size_t> group(class_groups[t].begin(), class_groups[t].end());
    Dataset subset = data.like();
    for (const Sample& s : data)
      if (group.count(s.label)) subset.add(s);
    if (subset.empty()) throw DataError("class groups: task " + std::to_string(t) + " has no samples");
    TrainTestSplit parts = split(subset, test_fraction, derive_seed(seed, {stream::kSplit, t}));
    seq.tasks.push_back({std::move(parts.train), std::move(parts.test),
                         std::vector<std::size_t>(group.begin(), group.end())});
  }
  return seq;
}

/// The dataset cut into `task_count` stratified chunks over the full label set.
inline TaskSequence make_data_incremental_tasks(const Dataset& data, std::size_t task_count,
                                                double test_fraction, Seed seed) {
  if (task_count == 0) throw InvalidArgument("data-incremental tasks: task_count must be positive");
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> by_class(data.class_count());
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data[i].label].push_back(i);
  std::vector<Dataset> chunks(task_count, data.like());
  const std::vector<double> equal(task_count, 1.0);
  for (auto& members : by_class) {
    rng.shuffle(members.begin(), members.end());
    const auto sizes = apportion(members.size(), equal);
    std::size_t pos = 0;
    for (std::size_t t = 0; t < task_count; ++t)
      for (std::size_t j = 0; j < sizes[t]; ++j) chunks[t].add(data[members[pos++]]);
  }
  TaskSequence seq{{}, TaskRegime::data_incremental};
  for (std::size_t t = 0; t < task_count; ++t) {
    TrainTestSplit parts = split(chunks[t], test_fraction, derive_seed(seed, {stream::kSplit, t}));
    seq.tasks.push_back({std::move(parts.train), std::move(parts.test), chunks[t].present_labels()});
  }
  return seq;
}

/// How classes are spread over nodes. `label_skew` in [0, 1]: 0 is IID; 1
/// sends every sample of class c to node c mod K.
struct ShardingOptions {
  double label_skew = 0.0;
};

/// Stratified, deterministic sharding. Each class is shuffled and cut into
/// per-node runs whose sizes follow the node proportions (largest remainder);
/// leftover units go to the nodes furthest below their overall target, so the
/// shard sizes track the proportions across classes.
inline std::vector<Dataset> shard_across_nodes(const Dataset& data, std::size_t node_count,
                                               std::span<const double> proportions, Seed seed,
                                               ShardingOptions options = {}) {
  if (node_count == 0) throw InvalidArgument("shard_across_nodes: node_count must be positive");
  if (proportions.size() != node_count)
    throw ShapeError("shard_across_nodes: need one proportion per node");
  double psum = 0.0;
  for (double p : proportions) {
    if (!(p > 0.0)) throw InvalidArgument("shard_across_nodes: proportions must be positive");
    psum += p;
  }
  if (std::abs(psum - 1.0) > 1e-9) throw InvalidArgument("shard_across_nodes: proportions must sum to 1");
  if (options.label_skew < 0.0 || options.label_skew > 1.0)
    throw InvalidArgument("shard_across_nodes: label_skew must be in [0, 1]");

  const std::size_t C = data.class_count();
  std::vector<std::vector<std::size_t>> by_class(C);
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data[i].label].push_back(i);

  // weight[c][k]: share of class c going to node k.
  std::vector<std::vector<double>> weight(C, std::vector<double>(node_count));
  for (std::size_t c = 0; c < C; ++c) {
    double total = 0.0;
    for (std::size_t k = 0; k < node_count; ++k) {
      const double owner = (c % node_count == k) ? static_cast<double>(node_count) : 0.0;
      weight[c][k] = proportions[k] * (1.0 - options.label_skew) + options.label_skew * owner * proportions[k];
      total += weight[c][k];
    }
    for (double& w : weight[c]) w /= total;
  }

  std::vector<double> node_expected(node_count, 0.0);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t k = 0; k < node_count; ++k)
      node_expected[k] += weight[c][k] * static_cast<double>(by_class[c].size());
  const std::vector<std::size_t> node_target = apportion(data.size(), node_expected);

  // Floors first, so the deficit used for leftovers accounts for every class.
  std::vector<std::vector<std::size_t>> alloc(C, std::vector<std::size_t>(node_count));
  std::vector<std::vector<double>> frac(C, std::vector<double>(node_count));
  std::vector<std::ptrdiff_t> deficit(node_target.begin(), node_target.end());
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t k = 0; k < node_count; ++k) {
      const double exact = weight[c][k] * static_cast<double>(by_class[c].size());
      alloc[c][k] = static_cast<std::size_t>(std::floor(exact));
      frac[c][k] = exact - static_cast<double>(alloc[c][k]);
      deficit[k] -= static_cast<std::ptrdiff_t>(alloc[c][k]);
    }
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t given = std::accumulate(alloc[c].begin(), alloc[c].end(), std::size_t{0});
    while (given < by_class[c].size()) {
      std::size_t best = node_count;
      for (std::size_t k = 0; k < node_count; ++k) {
        if (weight[c][k] <= 0.0 || frac[c][k] < 0.0) continue;
        if (best == node_count || deficit[k] > deficit[best] ||
            (deficit[k] == deficit[best] && frac[c][k] > frac[c][best]))
          best = k;
      }
      if (best == node_count) best = static_cast<std::size_t>(std::max_element(weight[c].begin(), weight[c].end()) - weight[c].begin());
      ++alloc[c][best];
      frac[c][best] = -1.0;  // at most one leftover unit per node and class
      --deficit[best];
      ++given;
    }
  }

  Rng rng(seed);
  std::vector<std::vector<std::size_t>> node_idx(node_count);
  for (std::size_t c = 0; c < C; ++c) {
    auto& members = by_class[c];
    rng.shuffle(members.begin(), members.end());
    std::size_t pos = 0;
    for (std::size_t k = 0; k < node_count; ++k)
      for (std::size_t j = 0; j < alloc[c][k]; ++j) node_idx[k].push_back(members[pos++]);
  }
  std::vector<Dataset> shards(node_count, data.like());
  for (std::size_t k = 0; k < node_count; ++k) {
    rng.shuffle(node_idx[k].begin(), node_idx[k].end());
    for (std::size_t i : node_idx[k]) shards[k].add(data[i]);
    if (shards[k].empty()) log(LogLevel::warning, "shard_across_nodes: node " + std::to_string(k) + " received no samples");
  }
  return shards;
}

inline std::vector<Dataset> shard_across_nodes(const Dataset& data, std::size_t node_count,
                                               std::initializer_list<double> proportions, Seed seed,
                                               ShardingOptions options = {}) {
  const std::vector<double> p(proportions);
  return shard_across_nodes(data, node_count, std::span<const double>(p), seed, options);
}

}  // namespace fedcl
