// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Row-major vectorization of a conv layer: filter i of an F x C x k x k
// tensor contributes rows i*r .. (i+1)*r-1 of an (F*r) x (C*H*W) matrix,
// one row per receptive field. Inputs are flattened channel-major,
// index = c*H*W + h*W + w; receptive fields are ordered row-major by anchor.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "convarrange/geometry.hpp"
#include "convarrange/tensor.hpp"

namespace convarrange {

struct SparseRow {
  std::vector<std::size_t> indices;  // strictly increasing
  std::vector<double> values;

  double sum() const { return std::accumulate(values.begin(), values.end(), 0.0); }
  double dot(std::span<const double> x) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < indices.size(); ++j) acc += values[j] * x[indices[j]];
    return acc;
  }
};

namespace detail {

/// Input row (or column) touched by kernel tap `tap` at output position `out`;
/// empty when the tap falls in zero padding.
inline std::optional<std::size_t> tap_position(const ConvGeometry& g, std::size_t out,
                                               std::size_t tap, std::size_t extent) {
  const auto pos = static_cast<std::int64_t>(out * g.stride + tap) -
                   static_cast<std::int64_t>(g.padding);
  const auto n = static_cast<std::int64_t>(extent);
  if (g.padding_mode == PaddingMode::Circular) {
    return static_cast<std::size_t>(((pos % n) + n) % n);
  }
  if (pos < 0 || pos >= n) return std::nullopt;
  return static_cast<std::size_t>(pos);
}

}  // namespace detail

/// Row m (0 <= m < r) of one filter's matrix view. Taps that land in zero
/// padding are omitted; every in-range tap is kept even when its weight is 0.
template <class T>
SparseRow sparse_row(std::span<const T> filter, const ConvGeometry& g, std::size_t m) {
  const std::size_t r = receptive_field_count(g);
  if (m >= r) {
    fail(ErrorCode::RowOutOfRange, "row " + std::to_string(m) + " >= r=" + std::to_string(r));
  }
  if (filter.size() != g.filter_size()) {
    fail(ErrorCode::ShapeMismatch, "filter has " + std::to_string(filter.size()) +
                                       " weights, geometry expects " +
                                       std::to_string(g.filter_size()));
  }
  const std::size_t oh = m / g.out_width();
  const std::size_t ow = m % g.out_width();
  const std::size_t k = g.kernel;

  std::vector<std::pair<std::size_t, double>> taps;
  taps.reserve(filter.size());
  for (std::size_t p = 0; p < k; ++p) {
    const auto h = detail::tap_position(g, oh, p, g.in_height);
    if (!h) continue;
    for (std::size_t q = 0; q < k; ++q) {
      const auto w = detail::tap_position(g, ow, q, g.in_width);
      if (!w) continue;
      for (std::size_t c = 0; c < g.in_channels; ++c) {
        taps.emplace_back(c * g.in_height * g.in_width + *h * g.in_width + *w,
                          static_cast<double>(filter[(c * k + p) * k + q]));
      }
    }
  }
  std::sort(taps.begin(), taps.end());
  SparseRow row;
  row.indices.reserve(taps.size());
  row.values.reserve(taps.size());
  for (const auto& [idx, v] : taps) {
    row.indices.push_back(idx);
    row.values.push_back(v);
  }
  return row;
}

/// All r rows of filter `i`.
template <class T>
std::vector<SparseRow> filter_rows(std::span<const T> filter, const ConvGeometry& g) {
  const std::size_t r = receptive_field_count(g);
  std::vector<SparseRow> rows;
  rows.reserve(r);
  for (std::size_t m = 0; m < r; ++m) rows.push_back(sparse_row(filter, g, m));
  return rows;
}

inline constexpr std::size_t kDefaultDenseBudget = std::size_t{1} << 26;

/// Dense (F*r) x (C*H*W) matrix of a whole layer (F x C x k x k weights).
template <class T>
Eigen::MatrixXd dense_matrix(const Tensor<T>& layer, const ConvGeometry& g,
                             std::size_t budget = kDefaultDenseBudget) {
  if (layer.shape.size() != 4 || layer.dim(1) != g.in_channels || layer.dim(2) != g.kernel ||
      layer.dim(3) != g.kernel) {
    fail(ErrorCode::ShapeMismatch, "layer " + shape_string(layer.shape) +
                                       " does not match geometry " + g.describe());
  }
  const std::size_t filters = layer.dim(0);
  const std::size_t r = receptive_field_count(g);
  const std::size_t cols = g.input_size();
  if (filters * r * cols > budget) {
    fail(ErrorCode::BudgetExceeded, std::to_string(filters * r) + " x " +
                                        std::to_string(cols) + " exceeds dense budget");
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(filters * r),
                                              static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < filters; ++i) {
    const auto filter = layer.slice(i);
    for (std::size_t m = 0; m < r; ++m) {
      const auto row = sparse_row(filter, g, m);
      for (std::size_t j = 0; j < row.indices.size(); ++j) {
        out(static_cast<Eigen::Index>(i * r + m), static_cast<Eigen::Index>(row.indices[j])) +=
            row.values[j];
      }
    }
  }
  return out;
}

struct CirculantReport {
  bool applicable = false;
  bool is_circulant = false;
  /// (filter, row) of the first row that is not a shift of its predecessor.
  std::optional<std::pair<std::size_t, std::size_t>> first_violation;
};

/// Checks the circulant structure of every filter's matrix view: walking the
/// receptive fields in row-major anchor order (wrapping from the last anchor
/// back to the first), each row must be its predecessor translated on the
/// H x W torus by the anchor step, i.e. column (h, w) -> (h + dh mod H,
/// w + dw mod W) with dw = +1 inside an anchor row. Only defined for
/// single-channel, stride-1, circular geometries; anything else yields a
/// not-applicable report.
template <class T>
CirculantReport verify_circulant(const Tensor<T>& layer, const ConvGeometry& g) {
  CirculantReport report;
  if (g.padding_mode != PaddingMode::Circular || g.stride != 1 || g.in_channels != 1) {
    return report;
  }
  report.applicable = true;
  report.is_circulant = true;
  const std::size_t r = receptive_field_count(g);
  const std::size_t H = g.in_height, W = g.in_width;
  for (std::size_t i = 0; i < layer.dim(0); ++i) {
    const auto rows = filter_rows(layer.slice(i), g);
    for (std::size_t step = 1; step <= r; ++step) {
      const std::size_t m = step % r;
      const std::size_t prev = step - 1;
      const std::size_t dh = (m / W + H - prev / W) % H;
      const std::size_t dw = (m % W + W - prev % W) % W;
      std::vector<std::pair<std::size_t, double>> shifted;
      for (std::size_t j = 0; j < rows[prev].indices.size(); ++j) {
        const std::size_t idx = rows[prev].indices[j];
        const std::size_t h = (idx / W + dh) % H;
        const std::size_t w = (idx % W + dw) % W;
        shifted.emplace_back(h * W + w, rows[prev].values[j]);
      }
      std::sort(shifted.begin(), shifted.end());
      bool same = shifted.size() == rows[m].indices.size();
      for (std::size_t j = 0; same && j < shifted.size(); ++j) {
        same = shifted[j].first == rows[m].indices[j] && shifted[j].second == rows[m].values[j];
      }
      if (!same) {
        report.is_circulant = false;
        report.first_violation = std::make_pair(i, m);
        return report;
      }
    }
  }
  return report;
}

}  // namespace convarrange
