// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "convarrange/nn/loss.hpp"
#include "convarrange/nn/model.hpp"
#include "convarrange/rng.hpp"

namespace convarrange::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Probes dropped because +-eps moved a ReLU or max-pool decision.
  std::size_t skipped_kinks = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  std::size_t probes_per_tensor = 12;
  /// Gradients smaller than this are compared in absolute terms.
  double magnitude_floor = 1e-4;
  std::uint64_t seed = 0;
};

namespace detail {

/// ReLU on/off decisions and max-pool winners of one forward pass.
template <class T>
std::vector<std::uint32_t> activation_pattern(const Model<T>& model, const ForwardCache<T>& cache) {
  std::vector<std::uint32_t> pattern;
  for (std::size_t li = 0; li < model.layers().size(); ++li) {
    if (std::holds_alternative<ReLU>(model.layers()[li])) {
      for (const T v : cache.inputs[li].data) pattern.push_back(v > T{0} ? 1u : 0u);
    }
    const auto& am = cache.argmax[li];
    pattern.insert(pattern.end(), am.begin(), am.end());
  }
  return pattern;
}

}  // namespace detail

/// Central finite differences on a random subset of parameters against
/// backward(). Relative error is |a - n| / max(|a|, |n|, magnitude_floor).
/// Probes whose perturbation crosses a ReLU kink or flips a max-pool winner
/// are skipped and redrawn.
template <class T>
GradCheckResult grad_check(Model<T>& model, const Tensor<T>& batch, std::span<const int> labels,
                           const GradCheckOptions& opt = {}) {
  static_assert(std::is_same_v<T, double>, "gradient checks run in float64");
  ForwardCache<T> cache;
  const auto logits = forward(model, batch, &cache);
  const auto base = softmax_xent(logits, labels);
  const auto analytic = backward(model, cache, base.dlogits);
  const auto base_pattern = detail::activation_pattern(model, cache);

  auto eval = [&](std::vector<std::uint32_t>* pattern) {
    ForwardCache<T> c;
    const auto z = forward(model, batch, &c);
    if (pattern) *pattern = detail::activation_pattern(model, c);
    return softmax_xent(z, labels).loss;
  };

  Rng rng = make_rng(opt.seed, {0x6c});
  GradCheckResult result;
  auto params = model.parameters();
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = *params[pi];
    if (p.size() == 0) continue;
    std::uniform_int_distribution<std::size_t> pick(0, p.size() - 1);
    std::size_t done = 0;
    for (std::size_t attempt = 0; done < opt.probes_per_tensor && attempt < 8 * opt.probes_per_tensor;
         ++attempt) {
      const std::size_t j = pick(rng);
      const T saved = p[j];
      std::vector<std::uint32_t> pat_plus, pat_minus;
      p[j] = saved + static_cast<T>(opt.eps);
      model.touch();
      const double lp = eval(&pat_plus);
      p[j] = saved - static_cast<T>(opt.eps);
      model.touch();
      const double lm = eval(&pat_minus);
      p[j] = saved;
      model.touch();
      if (pat_plus != base_pattern || pat_minus != base_pattern) {
        ++result.skipped_kinks;
        continue;
      }
      const double numeric = (lp - lm) / (2.0 * opt.eps);
      const double a = static_cast<double>(analytic[pi][j]);
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.magnitude_floor});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      ++result.checked;
      ++done;
    }
  }
  return result;
}

}  // namespace convarrange::nn
