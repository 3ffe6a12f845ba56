// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0

#include "convarrange/vectorize.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

namespace convarrange {
namespace {

oracle::Geom Mirror(const ConvGeometry& g) {
  return {static_cast<int>(g.in_channels), static_cast<int>(g.in_height), static_cast<int>(g.in_width),
          static_cast<int>(g.kernel),      static_cast<int>(g.stride),    static_cast<int>(g.padding),
          g.padding_mode == PaddingMode::Circular};
}

Tensor<double> RandomLayer(std::size_t F, const ConvGeometry& g, std::uint64_t seed) {
  return Tensor<double>({F, g.in_channels, g.kernel, g.kernel},
                        oracle::normal_vector(F * g.filter_size(), seed));
}

TEST(Geometry, ReceptiveFieldCounts) {
  EXPECT_EQ(receptive_field_count({1, 4, 4, 3, 1, 1, PaddingMode::Zero}), 16u);
  EXPECT_EQ(receptive_field_count({1, 5, 5, 3, 1, 1, PaddingMode::Circular}), 25u);
  EXPECT_EQ(receptive_field_count({3, 8, 8, 3, 2, 1, PaddingMode::Zero}), 16u);
}

TEST(Geometry, StridedCountMatchesAnchorEnumeration) {
  for (std::size_t H = 3; H <= 9; ++H) {
    for (std::size_t s = 1; s <= 3; ++s) {
      for (std::size_t p = 0; p <= 2; ++p) {
        const ConvGeometry g{1, H, H + 1, 3, s, p, PaddingMode::Zero};
        std::size_t anchors = 0;
        for (long y = -static_cast<long>(p); y + 3 <= static_cast<long>(H + p); y += static_cast<long>(s)) {
          for (long x = -static_cast<long>(p); x + 3 <= static_cast<long>(H + 1 + p); x += static_cast<long>(s)) {
            ++anchors;
          }
        }
        EXPECT_EQ(receptive_field_count(g), anchors) << g.describe();
      }
    }
  }
}

TEST(Geometry, ValidateRejectsDegenerate) {
  EXPECT_THROW(ConvGeometry({1, 2, 2, 3, 1, 0, PaddingMode::Zero}).validate(), Error);
  EXPECT_THROW(ConvGeometry({1, 4, 4, 3, 2, 1, PaddingMode::Circular}).validate(), Error);
  EXPECT_THROW(ConvGeometry({0, 4, 4, 3, 1, 1, PaddingMode::Zero}).validate(), Error);
  EXPECT_NO_THROW(ConvGeometry({1, 4, 4, 3, 1, 1, PaddingMode::Zero}).validate());
}

TEST(SparseRow, PointwiseKernel) {
  const std::vector<double> f{1.0};
  const auto row = sparse_row<double>(f, {1, 2, 2, 1, 1, 0, PaddingMode::Zero}, 0);
  EXPECT_EQ(row.indices, (std::vector<std::size_t>{0}));
  EXPECT_EQ(row.values, (std::vector<double>{1.0}));
}

TEST(SparseRow, CornerIsClipped) {
  const std::vector<double> ones(9, 1.0);
  const auto row = sparse_row<double>(ones, {1, 4, 4, 3, 1, 1, PaddingMode::Zero}, 0);
  EXPECT_EQ(row.indices, (std::vector<std::size_t>{0, 1, 4, 5}));
}

TEST(SparseRow, OutOfRange) {
  const std::vector<double> f(9, 1.0);
  try {
    sparse_row<double>(f, {1, 4, 4, 3, 1, 1, PaddingMode::Zero}, 16);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RowOutOfRange);
  }
}

TEST(SparseRow, DotMatchesDirectConvolution) {
  const ConvGeometry g{2, 5, 5, 3, 1, 1, PaddingMode::Zero};
  const auto f = oracle::normal_vector(g.filter_size(), 1);
  for (std::uint64_t t = 0; t < 20; ++t) {
    const auto x = oracle::normal_vector(g.input_size(), 100 + t);
    const auto ref = oracle::direct_conv(x, f, Mirror(g));
    for (std::size_t m = 0; m < receptive_field_count(g); ++m) {
      EXPECT_NEAR(sparse_row<double>(f, g, m).dot(x), ref[m], 1e-12);
    }
  }
}

TEST(DenseMatrix, PointwiseIsScaledIdentity) {
  const Tensor<double> layer({1, 1, 1, 1}, 2.0);
  const auto m = dense_matrix(layer, {1, 2, 2, 1, 1, 0, PaddingMode::Zero});
  EXPECT_TRUE(m.isApprox(2.0 * Eigen::MatrixXd::Identity(4, 4)));
}

TEST(DenseMatrix, ZeroFilterGivesZeroMatrix) {
  const Tensor<double> layer({2, 1, 3, 3}, 0.0);
  EXPECT_TRUE(dense_matrix(layer, {1, 4, 4, 3, 1, 1, PaddingMode::Zero}).isZero(0.0));
}

TEST(DenseMatrix, CircularMatvecMatchesDirectConvolution) {
  const ConvGeometry g{1, 5, 5, 3, 1, 1, PaddingMode::Circular};
  const auto layer = RandomLayer(4, g, 2);
  const auto A = dense_matrix(layer, g);
  const std::size_t r = receptive_field_count(g);
  for (std::uint64_t t = 0; t < 50; ++t) {
    const auto x = oracle::normal_vector(g.input_size(), 500 + t);
    const Eigen::VectorXd y = A * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    for (std::size_t i = 0; i < 4; ++i) {
      const std::vector<double> f(layer.slice(i).begin(), layer.slice(i).end());
      const auto ref = oracle::direct_conv(x, f, Mirror(g));
      for (std::size_t m = 0; m < r; ++m) {
        EXPECT_NEAR(y(static_cast<Eigen::Index>(i * r + m)), ref[m], 1e-12);
      }
    }
  }
}

TEST(DenseMatrix, ManyGeometriesMatchDirectConvolution) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> c(1, 3), hw(3, 7), s(1, 2), p(0, 2);
  for (int trial = 0; trial < 40; ++trial) {
    ConvGeometry g{c(rng), hw(rng), hw(rng), 3, s(rng), p(rng), PaddingMode::Zero};
    if (trial % 3 == 0) {
      g.padding_mode = PaddingMode::Circular;
      g.stride = 1;
      g.padding = 1;
    }
    const auto layer = RandomLayer(2, g, 10 + trial);
    const auto A = dense_matrix(layer, g);
    const auto x = oracle::normal_vector(g.input_size(), 900 + trial);
    const Eigen::VectorXd y = A * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    const std::size_t r = receptive_field_count(g);
    for (std::size_t i = 0; i < 2; ++i) {
      const std::vector<double> f(layer.slice(i).begin(), layer.slice(i).end());
      const auto ref = oracle::direct_conv(x, f, Mirror(g));
      ASSERT_EQ(ref.size(), r) << g.describe();
      for (std::size_t m = 0; m < r; ++m) {
        ASSERT_NEAR(y(static_cast<Eigen::Index>(i * r + m)), ref[m], 1e-12) << g.describe();
      }
    }
  }
}

TEST(DenseMatrix, CircularRowsShareTheFrobeniusNorm) {
  const ConvGeometry g{2, 6, 5, 3, 1, 1, PaddingMode::Circular};
  const auto layer = RandomLayer(1, g, 4);
  double fro = 0.0;
  for (const double w : layer.data) fro += w * w;
  const auto A = dense_matrix(layer, g);
  for (Eigen::Index m = 0; m < A.rows(); ++m) EXPECT_NEAR(A.row(m).norm(), std::sqrt(fro), 1e-15);
}

TEST(DenseMatrix, Budget) {
  const ConvGeometry g{1, 8, 8, 3, 1, 1, PaddingMode::Zero};
  try {
    dense_matrix(RandomLayer(2, g, 5), g, 100);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BudgetExceeded);
  }
}

TEST(Circulant, CircularSingleChannelIsCirculant) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ConvGeometry g{1, 4 + seed % 4, 3 + seed % 5, 3, 1, 1, PaddingMode::Circular};
    const auto rep = verify_circulant(RandomLayer(2, g, seed), g);
    EXPECT_TRUE(rep.applicable);
    EXPECT_TRUE(rep.is_circulant) << g.describe();
  }
}

TEST(Circulant, ZeroPaddingIsNotApplicable) {
  const ConvGeometry g{1, 5, 5, 3, 1, 1, PaddingMode::Zero};
  const auto rep = verify_circulant(RandomLayer(1, g, 6), g);
  EXPECT_FALSE(rep.applicable);
  EXPECT_FALSE(rep.is_circulant);
}

TEST(Circulant, RowsAreTorusShiftsOfRowZero) {
  // Independent restatement: row m holds the filter translated to anchor m.
  const ConvGeometry g{1, 5, 4, 3, 1, 1, PaddingMode::Circular};
  const auto layer = RandomLayer(1, g, 7);
  const auto A = dense_matrix(layer, g);
  for (std::size_t m = 0; m < 20; ++m) {
    const std::size_t ay = m / 4, ax = m % 4;
    for (std::size_t col = 0; col < 20; ++col) {
      const std::size_t y = col / 4, x = col % 4;
      const std::size_t sy = (y + 5 - ay) % 5, sx = (x + 4 - ax) % 4;  // position relative to anchor
      EXPECT_EQ(A(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(col)),
                A(0, static_cast<Eigen::Index>(sy * 4 + sx)));
    }
  }
}

}  // namespace
}  // namespace convarrange
