// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0

#include "convarrange/projection.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "convarrange/nn/init.hpp"
#include "convarrange/vectorize.hpp"
#include "oracles.hpp"

namespace convarrange {
namespace {

TEST(FilterCosine, PointwiseKernel) {
  const std::vector<double> f{1.0};
  EXPECT_DOUBLE_EQ(filter_cosine<double>(f, {1, 2, 2, 1, 1, 0, PaddingMode::Zero}), 0.5);
}

TEST(FilterCosine, AllMinusOnes) {
  const std::vector<double> f(9, -1.0);
  EXPECT_DOUBLE_EQ(filter_cosine<double>(f, {1, 4, 4, 3, 1, 1, PaddingMode::Zero}), -0.75);
}

TEST(FilterCosine, ZeroSumFilterIsOrthogonal) {
  const std::vector<double> sobel{-1, 0, 1, -2, 0, 2, -1, 0, 1};
  EXPECT_EQ(filter_cosine<double>(sobel, {1, 5, 5, 3, 1, 1, PaddingMode::Zero}), 0.0);
}

TEST(FilterCosine, ZeroFilterIsAnError) {
  const std::vector<double> f(9, 0.0);
  try {
    filter_cosine<double>(f, {1, 5, 5, 3, 1, 1, PaddingMode::Zero});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroFilter);
  }
}

TEST(FilterCosine, MatchesDenseRowInnerProduct) {
  const ConvGeometry g{3, 8, 8, 3, 1, 1, PaddingMode::Zero};
  const Tensor<double> layer({1, 3, 3, 3}, oracle::normal_vector(27, 11));
  const auto A = dense_matrix(layer, g);
  const double expected = A.row(9).sum() / (A.row(9).norm() * std::sqrt(192.0));  // interior anchor (1,1)
  EXPECT_NEAR(filter_cosine<double>(layer.slice(0), g), expected, 1e-12);
}

TEST(LayerCosines, OppositeFilters) {
  const Tensor<double> layer({2, 1, 1, 1}, std::vector<double>{1.0, -1.0});
  EXPECT_EQ(layer_cosines(layer, {1, 1, 1, 1, 1, 0, PaddingMode::Zero}), (std::vector<double>{1.0, -1.0}));
}

TEST(LayerCosines, ErrorCarriesFilterIndex) {
  Tensor<double> layer({3, 1, 3, 3}, 1.0);
  for (std::size_t j = 0; j < 9; ++j) layer.slice(2)[j] = 0.0;
  try {
    layer_cosines(layer, {1, 4, 4, 3, 1, 1, PaddingMode::Zero});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroFilter);
    EXPECT_NE(std::string(e.what()).find("filter 2"), std::string::npos);
  }
}

TEST(NegativeFraction, ZeroCountsAsNegative) {
  EXPECT_EQ(negative_fraction(std::vector<double>{-0.1, -0.2, 0.0}), 1.0);
  EXPECT_EQ(negative_fraction(std::vector<double>{0.3, 0.4}), 0.0);
  EXPECT_EQ(negative_fraction(std::vector<double>{-0.5, 0.5, 0.5, -0.5}), 0.5);
  EXPECT_THROW(negative_fraction(std::vector<double>{}), Error);
}

TEST(Histogram, EdgeRules) {
  EXPECT_EQ(histogram(std::vector<double>{-1.0, 1.0}, 2).counts, (std::vector<std::size_t>{1, 1}));
  EXPECT_EQ(histogram(std::vector<double>{0.0}, 2).counts, (std::vector<std::size_t>{0, 1}));
  const auto h = histogram(std::vector<double>{}, 40);
  EXPECT_EQ(h.edges.size(), 41u);
  EXPECT_EQ(h.edges.front(), -1.0);
  EXPECT_EQ(h.edges.back(), 1.0);
}

TEST(Histogram, SymmetricForSymmetricSample) {
  // Cosines of isotropic Gaussian filters are symmetric about 0; each mirrored
  // bin pair must agree within 3 sigma of the difference of two multinomial counts.
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  const ConvGeometry g{1, 6, 6, 3, 1, 1, PaddingMode::Zero};
  std::vector<double> cos;
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> f(9);
    for (auto& v : f) v = n(rng);
    cos.push_back(filter_cosine<double>(f, g));
  }
  const auto h = histogram(cos, 20);
  std::size_t total = 0;
  for (const auto c : h.counts) total += c;
  EXPECT_EQ(total, 10000u);
  for (std::size_t b = 0; b < 10; ++b) {
    const double a = static_cast<double>(h.counts[b]), z = static_cast<double>(h.counts[19 - b]);
    EXPECT_LE(std::abs(a - z), 3.0 * std::sqrt(a + z) + 1.0) << b;
  }
}

TEST(Trajectory, SingleEpochAndConstantWeights) {
  ModelWeights w;
  LayerParams l;
  l.id = 1;
  l.name = "conv1";
  l.geometry = {1, 5, 5, 3, 1, 1, PaddingMode::Zero};
  l.weight = Tensor<float>({4, 1, 3, 3});
  l.bias = Tensor<float>({4});
  for (std::size_t i = 0; i < l.weight.size(); ++i) l.weight[i] = (i % 4 == 0) ? -1.0f : 0.5f;
  w.layers = {l};
  io::SnapshotStore store;
  store.save(0, w);
  auto t = trajectory(store, 1);
  ASSERT_EQ(t.points.size(), 1u);
  EXPECT_EQ(t.filter_count, 4u);
  for (std::size_t e = 1; e <= 3; ++e) store.save(e, w);
  t = trajectory(store, 1);
  ASSERT_EQ(t.points.size(), 4u);
  for (const auto& p : t.points) EXPECT_EQ(p.second, t.points[0].second);
  EXPECT_THROW(trajectory(store, 2), Error);
}

TEST(NullModel, KaimingLayerStaysNearHalf) {
  // Per-draw bound |n_l - 0.5| <= 0.15 for F = 128.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto model = nn::Model<float>(64, 8, 8).conv(128);
    nn::kaiming_init(model, nn::InitSpec{nn::KaimingNormal{}, seed});
    const auto w = model.export_weights();
    const auto n = layer_bias(w.layer(1), 0).n_l;
    EXPECT_LE(std::abs(n - 0.5), 0.15) << seed;
  }
}

}  // namespace
}  // namespace convarrange
