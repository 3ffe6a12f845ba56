// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "convarrange/tensor.hpp"

namespace convarrange::nn {

template <class T>
struct LossResult {
  double loss = 0.0;     // mean over the batch
  std::size_t correct = 0;  // argmax(logits) == label
  Tensor<T> dlogits;     // (softmax - onehot) / N
};

/// Mean softmax cross-entropy with log-sum-exp stabilization.
template <class T>
LossResult<T> softmax_xent(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.shape.size() != 2 || logits.dim(0) != labels.size()) {
    fail(ErrorCode::ShapeMismatch, "logits " + shape_string(logits.shape) + " vs " +
                                       std::to_string(labels.size()) + " labels");
  }
  const std::size_t N = logits.dim(0), K = logits.dim(1);
  LossResult<T> r;
  r.dlogits = Tensor<T>(logits.shape);
  double total = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const int label = labels[n];
    if (label < 0 || static_cast<std::size_t>(label) >= K) {
      fail(ErrorCode::LabelOutOfRange, "label " + std::to_string(label) + " with " +
                                           std::to_string(K) + " classes");
    }
    const T* z = logits.ptr() + n * K;
    std::size_t best = 0;
    double zmax = z[0];
    for (std::size_t k = 1; k < K; ++k) {
      if (z[k] > z[best]) best = k;
      zmax = std::max(zmax, static_cast<double>(z[k]));
    }
    double denom = 0.0;
    for (std::size_t k = 0; k < K; ++k) denom += std::exp(static_cast<double>(z[k]) - zmax);
    const double log_denom = std::log(denom);
    total += log_denom + zmax - static_cast<double>(z[label]);
    if (best == static_cast<std::size_t>(label)) ++r.correct;
    for (std::size_t k = 0; k < K; ++k) {
      const double p = std::exp(static_cast<double>(z[k]) - zmax - log_denom);
      r.dlogits[n * K + k] =
          static_cast<T>((p - (k == static_cast<std::size_t>(label) ? 1.0 : 0.0)) /
                         static_cast<double>(N));
    }
  }
  r.loss = N ? total / static_cast<double>(N) : 0.0;
  return r;
}

}  // namespace convarrange::nn
