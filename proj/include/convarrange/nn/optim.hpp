// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "convarrange/tensor.hpp"

namespace convarrange::nn {

struct SgdConfig {
  double momentum = 0.9;
  double weight_decay = 0.0005;
};

template <class T>
struct OptimizerState {
  SgdConfig config;
  std::vector<Tensor<T>> momentum;  // lazily zero-initialized to parameter shapes
};

/// SGD with momentum and L2 weight decay:
///   g' = grad + wd * param   (weights only, decay_mask[i] == true)
///   buf = momentum * buf + g'
///   param -= lr * buf
template <class T>
void sgd_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>> grads,
              const std::vector<bool>& decay_mask, double lr, OptimizerState<T>& state) {
  if (params.size() != grads.size() || decay_mask.size() != params.size()) {
    fail(ErrorCode::ShapeMismatch, "parameter / gradient / mask counts differ");
  }
  if (state.momentum.empty()) {
    for (const auto* p : params) state.momentum.emplace_back(p->shape);
  }
  const T mu = static_cast<T>(state.config.momentum);
  const T step = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& buf = state.momentum[i];
    if (p.shape != grads[i].shape || p.shape != buf.shape) {
      fail(ErrorCode::ShapeMismatch, "parameter " + std::to_string(i) + " " +
                                         shape_string(p.shape) + " vs gradient " +
                                         shape_string(grads[i].shape));
    }
    const T wd = decay_mask[i] ? static_cast<T>(state.config.weight_decay) : T{0};
    for (std::size_t j = 0; j < p.size(); ++j) {
      const T g = grads[i][j] + wd * p[j];
      buf[j] = mu * buf[j] + g;
      p[j] -= step * buf[j];
    }
  }
}

/// Learning-rate schedules, all starting from `base`:
///   Step:           base * factor^floor(e / every)
///   Exponential:    base * 10^(-e / period)
///   PerEpochFactor: base * factor^e
struct StepSchedule {
  double base = 0.01;
  double factor = 0.1;
  std::size_t every = 25;
};
struct ExponentialSchedule {
  double base = 0.01;
  double period = 25.0;
};
struct PerEpochFactorSchedule {
  double base = 0.01;
  double factor = 0.95;
};
using LRSchedule = std::variant<StepSchedule, ExponentialSchedule, PerEpochFactorSchedule>;

inline double lr_at(const LRSchedule& schedule, std::size_t epoch) {
  const double e = static_cast<double>(epoch);
  return std::visit(
      [&](const auto& s) -> double {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, StepSchedule>) {
          return s.base * std::pow(s.factor, static_cast<double>(epoch / s.every));
        } else if constexpr (std::is_same_v<S, ExponentialSchedule>) {
          return s.base * std::pow(10.0, -e / s.period);
        } else {
          return s.base * std::pow(s.factor, e);
        }
      },
      schedule);
}

inline std::string schedule_name(const LRSchedule& s) {
  switch (s.index()) {
    case 0: return "step";
    case 1: return "exponential";
    default: return "per_epoch_factor";
  }
}

}  // namespace convarrange::nn
