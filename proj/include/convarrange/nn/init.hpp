// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <random>
#include <variant>

#include "convarrange/nn/model.hpp"
#include "convarrange/rng.hpp"

namespace convarrange::nn {

enum class FanMode { FanOut, FanIn };

/// N(0, 2 / fan). fan_out = F * k * k for conv, out for dense.
struct KaimingNormal {
  FanMode fan = FanMode::FanOut;
};
/// N(0, sigma^2) for every weight.
struct FixedGaussian {
  double sigma = 0.01;
};

struct InitSpec {
  std::variant<KaimingNormal, FixedGaussian> scheme = KaimingNormal{};
  std::uint64_t seed = 0;
};

/// Standard deviation for a layer with the given fans.
inline double init_stddev(const InitSpec& spec, std::size_t fan_in, std::size_t fan_out) {
  if (const auto* g = std::get_if<FixedGaussian>(&spec.scheme)) {
    if (!(g->sigma > 0.0)) fail(ErrorCode::InvalidConfig, "FixedGaussian sigma must be > 0");
    return g->sigma;
  }
  const auto& k = std::get<KaimingNormal>(spec.scheme);
  const double fan = static_cast<double>(k.fan == FanMode::FanOut ? fan_out : fan_in);
  return std::sqrt(2.0 / fan);
}

/// Draws every weight in layer order from one seeded stream; biases are zero.
template <class T>
void kaiming_init(Model<T>& model, const InitSpec& spec) {
  Rng rng = make_rng(spec.seed, {0x1417});
  for (auto& layer : model.layers()) {
    std::visit(
        [&](auto& l) {
          using L = std::decay_t<decltype(l)>;
          std::size_t fan_in = 0, fan_out = 0;
          if constexpr (std::is_same_v<L, Conv2d<T>>) {
            fan_in = l.geometry.filter_size();
            fan_out = l.filters * l.geometry.kernel * l.geometry.kernel;
          } else if constexpr (std::is_same_v<L, Dense<T>>) {
            fan_in = l.in;
            fan_out = l.out;
          } else {
            return;
          }
          if constexpr (requires { l.weight; }) {
            std::normal_distribution<double> dist(0.0, init_stddev(spec, fan_in, fan_out));
            for (auto& w : l.weight.data) w = static_cast<T>(dist(rng));
            std::fill(l.bias.data.begin(), l.bias.data.end(), T{0});
          }
        },
        layer);
  }
  model.touch();
}

}  // namespace convarrange::nn
