// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Self-checks behind `convarrange verify`. Each check is small enough to run
// in a few seconds on one core.
#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "convarrange/arrangement.hpp"
#include "convarrange/io/snapshot.hpp"
#include "convarrange/nn/gradcheck.hpp"
#include "convarrange/nn/init.hpp"
#include "convarrange/nn/optim.hpp"
#include "convarrange/projection.hpp"
#include "convarrange/vectorize.hpp"

namespace convarrange::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

inline Tensor<double> random_filters(std::size_t F, const ConvGeometry& g, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor<double> t({F, g.in_channels, g.kernel, g.kernel});
  for (auto& v : t.data) v = n(rng);
  return t;
}

/// Rows whose taps all land inside the input (every row in circular mode).
inline bool full_support(const ConvGeometry& g, std::size_t m) {
  if (g.padding_mode == PaddingMode::Circular) return true;
  const std::size_t oy = m / g.out_width(), ox = m % g.out_width();
  const auto in = [&](std::size_t o, std::size_t extent) {
    return o * g.stride >= g.padding && o * g.stride - g.padding + g.kernel <= extent;
  };
  return in(oy, g.in_height) && in(ox, g.in_width);
}

}  // namespace detail

inline std::vector<ConvGeometry> sample_geometries() {
  using P = PaddingMode;
  return {
      {1, 5, 5, 3, 1, 1, P::Circular}, {2, 6, 4, 3, 1, 1, P::Circular}, {3, 4, 4, 1, 1, 0, P::Circular},
      {1, 7, 7, 5, 1, 2, P::Circular}, {4, 3, 3, 3, 1, 1, P::Circular}, {1, 6, 6, 3, 1, 1, P::Zero},
      {2, 8, 8, 3, 2, 1, P::Zero},     {3, 5, 7, 3, 1, 0, P::Zero},     {1, 9, 9, 5, 2, 2, P::Zero},
      {2, 6, 6, 2, 2, 0, P::Zero},
  };
}

/// filter_cosine against the normalized inner product of dense rows with the
/// ones vector.
inline CheckResult check_cosine_oracle(std::size_t filters_per_geometry = 20, std::uint64_t seed = 7) {
  Rng rng = make_rng(seed, {0xc05});
  double worst = 0.0;
  std::size_t rows = 0;
  for (const auto& g : sample_geometries()) {
    const auto layer = detail::random_filters(filters_per_geometry, g, rng);
    const auto dense = dense_matrix(layer, g);
    const double ones_norm = std::sqrt(static_cast<double>(g.input_size()));
    const std::size_t r = receptive_field_count(g);
    for (std::size_t i = 0; i < filters_per_geometry; ++i) {
      const double c = filter_cosine<double>(layer.slice(i), g);
      for (std::size_t m = 0; m < r; ++m) {
        if (!detail::full_support(g, m)) continue;
        const auto row = dense.row(static_cast<Eigen::Index>(i * r + m));
        worst = std::max(worst, std::abs(c - row.sum() / (row.norm() * ones_norm)));
        ++rows;
      }
    }
  }
  return {"cosine-oracle", rows > 0 && worst <= 1e-12,
          std::to_string(rows) + " rows, max err " + detail::sci(worst)};
}

inline CheckResult check_circulant(std::size_t filters = 50, std::uint64_t seed = 11) {
  Rng rng = make_rng(seed, {0xc12c});
  std::uniform_int_distribution<std::size_t> ext(3, 8);
  std::size_t bad = 0;
  double dev = 0.0;
  for (std::size_t i = 0; i < filters; ++i) {
    const std::size_t h = ext(rng), w = ext(rng);
    const std::size_t k = std::min<std::size_t>({3, h, w});
    const ConvGeometry g{1, h, w, k, 1, k / 2, PaddingMode::Circular};
    const auto layer = detail::random_filters(1, g, rng);
    if (!verify_circulant(layer, g).is_circulant) ++bad;
    FilterPolyhedron poly{0, g, layer.data, 0.0};
    dev = std::max(dev, row_angle_uniformity(poly).max_deviation);
  }
  return {"circulant", bad == 0 && dev == 0.0,
          std::to_string(filters - bad) + "/" + std::to_string(filters) + " circulant, row-sum spread " +
              detail::sci(dev)};
}

inline CheckResult check_gradients(std::uint64_t seed = 3) {
  auto model = nn::Model<double>::build(nn::reference_spec(1, 8, 8, 4));
  nn::kaiming_init(model, nn::InitSpec{nn::KaimingNormal{}, seed});
  Rng rng = make_rng(seed, {0x96ad});
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor<double> batch({2, 1, 8, 8});
  for (auto& v : batch.data) v = n(rng);
  const std::vector<int> labels{1, 3};
  nn::GradCheckOptions opt;
  opt.probes_per_tensor = 4;
  opt.seed = seed;
  const auto r = nn::grad_check(model, batch, labels, opt);
  return {"gradient", r.checked > 0 && r.max_rel_error <= 1e-5,
          std::to_string(r.checked) + " probes, max rel err " + detail::sci(r.max_rel_error)};
}

inline CheckResult check_schedules() {
  std::size_t bad = 0;
  for (std::size_t e = 0; e <= 100; ++e) {
    const double x = static_cast<double>(e);
    if (nn::lr_at(nn::StepSchedule{}, e) != 0.01 * std::pow(0.1, static_cast<double>(e / 25))) ++bad;
    if (nn::lr_at(nn::ExponentialSchedule{}, e) != 0.01 * std::pow(10.0, -x / 25.0)) ++bad;
    if (nn::lr_at(nn::PerEpochFactorSchedule{}, e) != 0.01 * std::pow(0.95, x)) ++bad;
  }
  return {"lr-schedules", bad == 0, std::to_string(bad) + " mismatches over epochs 0..100"};
}

inline CheckResult check_roundtrip(std::uint64_t seed = 5) {
  Rng rng = make_rng(seed, {0x407});
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<io::TensorRecord> records;
  for (std::size_t i = 0; i < 8; ++i) {
    const Shape s{i + 1, 3};
    if (i % 2) {
      Tensor<double> t(s);
      for (auto& v : t.data) v = n(rng);
      records.push_back(io::make_record("r" + std::to_string(i), t));
    } else {
      Tensor<float> t(s);
      for (auto& v : t.data) v = static_cast<float>(n(rng));
      records.push_back(io::make_record("r" + std::to_string(i), t));
    }
  }
  bool ok = true;
  for (const auto method : {io::ZipMethod::Stored, io::ZipMethod::Deflate}) {
    ok = ok && io::read_npz(io::write_npz(records, method)) == records;
  }
  return {"npz-roundtrip", ok, std::to_string(records.size()) + " records, stored and deflate"};
}

inline std::vector<CheckResult> run_all() {
  return {check_cosine_oracle(), check_circulant(), check_gradients(), check_schedules(),
          check_roundtrip()};
}

}  // namespace convarrange::verify
