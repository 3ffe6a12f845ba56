// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Augmentation and data corruptions. Corruptions only ever modify a
// training split; validation and test data pass through untouched.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "convarrange/data/dataset.hpp"

namespace convarrange::data {

inline constexpr int kMaxShift = 4;

/// Translates a C x H x W image by (dy, dx) with zero fill, then optionally
/// mirrors it horizontally.
inline void shift_flip(std::span<const float> in, std::span<float> out, std::size_t C,
                       std::size_t H, std::size_t W, int dy, int dx, bool flip) {
  const int h = static_cast<int>(H), w = static_cast<int>(W);
  for (std::size_t c = 0; c < C; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int sy = y - dy;
        const int sx0 = flip ? (w - 1 - x) : x;
        const int sx = sx0 - dx;
        const std::size_t o = (c * H + static_cast<std::size_t>(y)) * W + static_cast<std::size_t>(x);
        out[o] = (sy >= 0 && sy < h && sx >= 0 && sx < w)
                     ? in[(c * H + static_cast<std::size_t>(sy)) * W + static_cast<std::size_t>(sx)]
                     : 0.0f;
      }
    }
  }
}

/// Random shift in [-4, 4]^2 (zero fill) and a horizontal flip with
/// probability 1/2.
inline void augment_shift_flip(std::span<const float> in, std::span<float> out, std::size_t C,
                               std::size_t H, std::size_t W, Rng& rng) {
  std::uniform_int_distribution<int> shift(-kMaxShift, kMaxShift);
  std::bernoulli_distribution coin(0.5);
  const int dy = shift(rng);
  const int dx = shift(rng);
  shift_flip(in, out, C, H, W, dy, dx, coin(rng));
}

/// Replaces round(fraction * N) labels, picked by seed, with uniform draws over
/// all classes (a draw may repeat the true label).
inline Dataset randomize_labels(const Dataset& d, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) fail(ErrorCode::InvalidConfig, "label-noise fraction");
  Dataset out = d;
  if (d.split != Split::Train || fraction == 0.0) return out;
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, {0x1abe1});
  std::shuffle(order.begin(), order.end(), rng);
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(d.size())));
  std::uniform_int_distribution<int> cls(0, static_cast<int>(d.class_count) - 1);
  for (std::size_t i = 0; i < count; ++i) out.labels[order[i]] = cls(rng);
  return out;
}

/// Applies one permutation of the H*W spatial positions to every image and
/// channel: output position p takes the pixel from perm[p].
inline Dataset apply_pixel_permutation(const Dataset& d, std::span<const std::size_t> perm) {
  const std::size_t HW = d.height() * d.width();
  if (perm.size() != HW) fail(ErrorCode::ShapeMismatch, "permutation length");
  Dataset out = d;
  for (std::size_t nc = 0; nc < d.size() * d.channels(); ++nc) {
    const float* src = d.images.ptr() + nc * HW;
    float* dst = out.images.ptr() + nc * HW;
    for (std::size_t p = 0; p < HW; ++p) dst[p] = src[perm[p]];
  }
  return out;
}

inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

/// Shuffles pixel positions of a training split. By default a single global
/// permutation drawn from `seed` is shared by all images; with `per_image`
/// each image gets its own permutation (still shared across its channels).
inline Dataset pixel_shuffle(const Dataset& d, std::uint64_t seed, bool per_image = false) {
  if (d.split != Split::Train) return d;
  const std::size_t HW = d.height() * d.width();
  Rng rng = make_rng(seed, {0x91c});
  if (!per_image) return apply_pixel_permutation(d, random_permutation(HW, rng));
  Dataset out = d;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto perm = random_permutation(HW, rng);
    for (std::size_t c = 0; c < d.channels(); ++c) {
      const float* src = d.images.ptr() + (i * d.channels() + c) * HW;
      float* dst = out.images.ptr() + (i * d.channels() + c) * HW;
      for (std::size_t p = 0; p < HW; ++p) dst[p] = src[perm[p]];
    }
  }
  return out;
}

}  // namespace convarrange::data
