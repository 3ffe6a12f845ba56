// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "convarrange/rng.hpp"
#include "convarrange/tensor.hpp"
#include "convarrange/weights.hpp"

namespace convarrange::data {

enum class Split { Train, Val, Test };

/// Images N x C x H x W in float32 plus integer labels in [0, class_count).
struct Dataset {
  Tensor<float> images;
  std::vector<int> labels;
  std::size_t class_count = 0;
  Split split = Split::Train;
  Normalization normalization = Normalization::SignedUnit;

  std::size_t size() const { return labels.size(); }
  std::size_t channels() const { return images.dim(1); }
  std::size_t height() const { return images.dim(2); }
  std::size_t width() const { return images.dim(3); }
  std::size_t sample_size() const { return channels() * height() * width(); }

  /// Copies the listed samples into a new dataset with the same metadata.
  Dataset subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.class_count = class_count;
    out.split = split;
    out.normalization = normalization;
    Shape s = images.shape;
    s[0] = indices.size();
    out.images = Tensor<float>(s);
    out.labels.reserve(indices.size());
    const std::size_t stride = sample_size();
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const auto src = images.slice(indices[i]);
      std::copy(src.begin(), src.end(), out.images.ptr() + i * stride);
      out.labels.push_back(labels[indices[i]]);
    }
    return out;
  }
};

/// u8 pixel -> float in the chosen range; 0 and 255 map onto the endpoints.
inline float normalize_pixel(std::uint8_t v, Normalization mode) {
  return mode == Normalization::SignedUnit ? static_cast<float>(v) / 127.5f - 1.0f
                                           : static_cast<float>(v) / 255.0f;
}

struct TrainValSplit {
  Dataset train;
  Dataset val;
};

/// Holds out round(fraction * N) samples, chosen by a seeded permutation,
/// as the validation split. The two parts are disjoint and cover the input.
inline TrainValSplit split_validation(const Dataset& full, std::uint64_t seed,
                                      double fraction = 0.1) {
  std::vector<std::size_t> order(full.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, {0x5a1});
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(full.size())));
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  TrainValSplit out{full.subset(train), full.subset(val)};
  out.train.split = Split::Train;
  out.val.split = Split::Val;
  return out;
}

}  // namespace convarrange::data
