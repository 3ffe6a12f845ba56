// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Projection statistics of a conv layer against the identity ray.
//
// For filter i, every row of its matrix view has the filter's weights as its
// non-zero entries, so the cosine between a row normal and the all-ones
// direction of R^{CHW} reduces to
//
//   c_i = sum(W[i]) / (||W[i]||_F * sqrt(C*H*W)).
//
// n_l is the fraction of filters with c_i <= 0.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "convarrange/geometry.hpp"
#include "convarrange/io/snapshot.hpp"
#include "convarrange/parallel.hpp"
#include "convarrange/tensor.hpp"

namespace convarrange {

template <class T>
double filter_cosine(std::span<const T> filter, const ConvGeometry& g) {
  if (filter.size() != g.filter_size()) {
    fail(ErrorCode::ShapeMismatch, "filter has " + std::to_string(filter.size()) +
                                       " weights, geometry expects " +
                                       std::to_string(g.filter_size()));
  }
  double sum = 0.0;
  double sq = 0.0;
  for (const T w : filter) {
    sum += static_cast<double>(w);
    sq += static_cast<double>(w) * static_cast<double>(w);
  }
  if (sq == 0.0) fail(ErrorCode::ZeroFilter, "all-zero filter has no hyperplane");
  return sum / (std::sqrt(sq) * std::sqrt(static_cast<double>(g.input_size())));
}

/// One cosine per filter of an F x C x k x k layer, in filter order.
template <class T>
std::vector<double> layer_cosines(const Tensor<T>& layer, const ConvGeometry& g) {
  if (layer.shape.size() != 4 || layer.dim(0) == 0) {
    fail(ErrorCode::EmptyLayer, "layer " + shape_string(layer.shape) + " has no filters");
  }
  std::vector<double> out(layer.dim(0));
  parallel_for(out.size(), [&](std::size_t i) {
    try {
      out[i] = filter_cosine(layer.slice(i), g);
    } catch (const Error& e) {
      throw Error(e.code(), "filter " + std::to_string(i) + ": " + e.message());
    }
  });
  return out;
}

inline double negative_fraction(std::span<const double> cosines) {
  if (cosines.empty()) fail(ErrorCode::EmptyLayer, "no cosines");
  const auto negative = std::count_if(cosines.begin(), cosines.end(),
                                      [](double c) { return c <= 0.0; });
  return static_cast<double>(negative) / static_cast<double>(cosines.size());
}

struct Histogram {
  std::vector<double> edges;  // n_bins + 1, uniform over [-1, 1]
  std::vector<std::size_t> counts;
};

inline constexpr std::size_t kDefaultHistogramBins = 40;

/// Uniform bins over [-1, 1]. A value on an interior edge goes to the upper
/// bin; the last bin is closed on the right. Out-of-range values are clamped.
inline Histogram histogram(std::span<const double> cosines,
                           std::size_t n_bins = kDefaultHistogramBins) {
  if (n_bins == 0) fail(ErrorCode::InvalidConfig, "histogram needs at least one bin");
  Histogram h;
  h.edges.resize(n_bins + 1);
  for (std::size_t i = 0; i <= n_bins; ++i) {
    h.edges[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n_bins);
  }
  h.counts.assign(n_bins, 0);
  for (const double c : cosines) {
    const auto it = std::upper_bound(h.edges.begin(), h.edges.end(), c);
    auto bin = static_cast<std::ptrdiff_t>(it - h.edges.begin()) - 1;
    bin = std::clamp<std::ptrdiff_t>(bin, 0, static_cast<std::ptrdiff_t>(n_bins) - 1);
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  return h;
}

struct LayerBiasRecord {
  std::size_t layer_id = 0;
  std::size_t epoch = 0;
  double n_l = 0.0;
  std::size_t filter_count = 0;
};

struct BiasTrajectory {
  std::size_t layer_id = 0;
  std::vector<std::pair<std::size_t, double>> points;  // (epoch, n_l), epoch-sorted
  std::size_t filter_count = 0;
};

inline LayerBiasRecord layer_bias(const LayerParams& layer, std::size_t epoch) {
  if (layer.kind != ParamKind::Conv) {
    fail(ErrorCode::MissingLayer, "layer " + std::to_string(layer.id) + " is not a conv layer");
  }
  const auto cos = layer_cosines(layer.weight, layer.geometry);
  return {layer.id, epoch, negative_fraction(cos), cos.size()};
}

/// n_l of one layer at every epoch held by the store.
inline BiasTrajectory trajectory(const io::SnapshotStore& store, std::size_t layer_id) {
  BiasTrajectory t{layer_id, {}, 0};
  for (const auto epoch : store.epochs()) {
    const auto weights = store.load(epoch);
    const auto it = std::find_if(weights.layers.begin(), weights.layers.end(),
                                 [&](const LayerParams& l) { return l.id == layer_id; });
    if (it == weights.layers.end() || it->kind != ParamKind::Conv) {
      fail(ErrorCode::MissingLayer, "conv layer " + std::to_string(layer_id) +
                                        " absent at epoch " + std::to_string(epoch));
    }
    const auto rec = layer_bias(*it, epoch);
    t.points.emplace_back(epoch, rec.n_l);
    t.filter_count = rec.filter_count;
  }
  return t;
}

}  // namespace convarrange
