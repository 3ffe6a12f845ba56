// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>

#include "convarrange/error.hpp"

namespace convarrange {

enum class PaddingMode { Zero, Circular };

inline const char* to_string(PaddingMode m) { return m == PaddingMode::Zero ? "zero" : "circular"; }

inline PaddingMode padding_mode_from_string(const std::string& s) {
  if (s == "zero") return PaddingMode::Zero;
  if (s == "circular") return PaddingMode::Circular;
  fail(ErrorCode::InvalidConfig, "unknown padding mode '" + s + "'");
}

/// Input geometry of a conv layer plus its kernel/stride/padding.
/// Circular mode wraps taps modulo H and W and keeps the spatial extent.
struct ConvGeometry {
  std::size_t in_channels = 1;
  std::size_t in_height = 1;
  std::size_t in_width = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  PaddingMode padding_mode = PaddingMode::Zero;

  /// Dimension of the preactivation space, C*H*W.
  std::size_t input_size() const { return in_channels * in_height * in_width; }
  std::size_t filter_size() const { return in_channels * kernel * kernel; }

  std::size_t out_height() const { return out_extent(in_height); }
  std::size_t out_width() const { return out_extent(in_width); }

  void validate() const {
    if (in_channels == 0 || in_height == 0 || in_width == 0 || kernel == 0 || stride == 0) {
      fail(ErrorCode::DegenerateGeometry, "zero extent in " + describe());
    }
    if (padding_mode == PaddingMode::Circular) {
      if (stride != 1) fail(ErrorCode::DegenerateGeometry, "circular mode requires stride 1");
      if (kernel > in_height || kernel > in_width) {
        fail(ErrorCode::DegenerateGeometry, "circular kernel larger than input in " + describe());
      }
      return;
    }
    if (in_height + 2 * padding < kernel || in_width + 2 * padding < kernel) {
      fail(ErrorCode::DegenerateGeometry, "no valid receptive field in " + describe());
    }
  }

  std::string describe() const {
    return "C=" + std::to_string(in_channels) + " H=" + std::to_string(in_height) +
           " W=" + std::to_string(in_width) + " k=" + std::to_string(kernel) +
           " s=" + std::to_string(stride) + " p=" + std::to_string(padding) + " " +
           to_string(padding_mode);
  }

  bool operator==(const ConvGeometry&) const = default;

 private:
  std::size_t out_extent(std::size_t in) const {
    if (padding_mode == PaddingMode::Circular) return in;
    return (in + 2 * padding - kernel) / stride + 1;
  }
};

/// Number of receptive fields r of one output map.
inline std::size_t receptive_field_count(const ConvGeometry& g) {
  g.validate();
  return g.out_height() * g.out_width();
}

}  // namespace convarrange
