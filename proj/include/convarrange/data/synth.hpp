// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <random>

#include "convarrange/data/dataset.hpp"

namespace convarrange::data {

inline constexpr std::size_t kSynthSize = 16;
inline constexpr double kSynthNoise = 0.1;

namespace detail {

inline void stroke(std::span<float> img, int y, int x, int dy, int dx, int length, int thick,
                   float value) {
  const int n = static_cast<int>(kSynthSize);
  for (int t = 0; t < length; ++t) {
    for (int s = 0; s < thick; ++s) {
      // thicken perpendicular to the stroke direction
      const int py = y + t * dy + s * (dx != 0 ? 1 : 0);
      const int px = x + t * dx + s * (dx == 0 ? 1 : 0);
      if (py >= 0 && py < n && px >= 0 && px < n) {
        img[static_cast<std::size_t>(py * n + px)] = value;
      }
    }
  }
}

}  // namespace detail

/// Single-channel 16 x 16 images of one oriented shape per class:
/// 0 horizontal bar, 1 vertical bar, 2 and 3 the two diagonals, 4..7 the four
/// corner orientations. Position, length, thickness and contrast vary per
/// sample; Gaussian pixel noise (sigma 0.1, on the [0,1] intensity scale) is
/// added before clamping and normalization. Labels cycle through the classes
/// before shuffling, so class counts differ by at most one.
inline Dataset synth_shapes(std::size_t n, std::size_t class_count, std::uint64_t seed,
                            Normalization mode = Normalization::SignedUnit) {
  if (class_count < 2 || class_count > 8) {
    fail(ErrorCode::InvalidConfig, "synth_shapes supports 2..8 classes");
  }
  Rng rng = make_rng(seed, {0x5e7});
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % class_count);
  std::shuffle(labels.begin(), labels.end(), rng);

  Dataset d;
  d.class_count = class_count;
  d.normalization = mode;
  d.images = Tensor<float>({n, 1, kSynthSize, kSynthSize});
  d.labels = labels;

  std::uniform_int_distribution<int> pos(3, 12);
  std::uniform_int_distribution<int> len(6, 10);
  std::uniform_int_distribution<int> thick(1, 2);
  std::uniform_real_distribution<float> contrast(0.6f, 1.0f);
  std::normal_distribution<double> noise(0.0, kSynthNoise);

  for (std::size_t i = 0; i < n; ++i) {
    std::array<float, kSynthSize * kSynthSize> img{};
    const int cy = pos(rng), cx = pos(rng), L = len(rng), t = thick(rng);
    const float v = contrast(rng);
    const int h = L / 2;
    switch (labels[i]) {
      case 0: detail::stroke(img, cy, cx - h, 0, 1, L, t, v); break;
      case 1: detail::stroke(img, cy - h, cx, 1, 0, L, t, v); break;
      case 2: detail::stroke(img, cy - h, cx - h, 1, 1, L, t, v); break;
      case 3: detail::stroke(img, cy - h, cx + h, 1, -1, L, t, v); break;
      case 4:  // top-left corner
        detail::stroke(img, cy - h, cx - h, 0, 1, L, t, v);
        detail::stroke(img, cy - h, cx - h, 1, 0, L, t, v);
        break;
      case 5:  // top-right
        detail::stroke(img, cy - h, cx + h, 0, -1, L, t, v);
        detail::stroke(img, cy - h, cx + h, 1, 0, L, t, v);
        break;
      case 6:  // bottom-left
        detail::stroke(img, cy + h, cx - h, 0, 1, L, t, v);
        detail::stroke(img, cy + h, cx - h, -1, 0, L, t, v);
        break;
      default:  // bottom-right
        detail::stroke(img, cy + h, cx + h, 0, -1, L, t, v);
        detail::stroke(img, cy + h, cx + h, -1, 0, L, t, v);
        break;
    }
    float* out = d.images.ptr() + i * kSynthSize * kSynthSize;
    for (std::size_t p = 0; p < img.size(); ++p) {
      const double x = std::clamp(static_cast<double>(img[p]) + noise(rng), 0.0, 1.0);
      out[p] = mode == Normalization::SignedUnit ? static_cast<float>(2.0 * x - 1.0)
                                                 : static_cast<float>(x);
    }
  }
  return d;
}

}  // namespace convarrange::data
