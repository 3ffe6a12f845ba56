// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Which cell of a filter's hyperplane arrangement contains the identity ray
// lambda * (1, ..., 1), and how surprising a layer-wide agreement is under a
// zero-centred null model.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "convarrange/projection.hpp"
#include "convarrange/vectorize.hpp"

namespace convarrange {

/// Filter i of a layer together with its bias: the polyhedron
/// { x : W_m x + b >= 0 for every row m of the filter }.
struct FilterPolyhedron {
  std::size_t filter_index = 0;
  ConvGeometry geometry;
  std::vector<double> weights;  // C x k x k
  double bias = 0.0;
};

enum class CellTag { AllPositive, AllNegative, Mixed };

inline const char* to_string(CellTag t) {
  switch (t) {
    case CellTag::AllPositive: return "all_positive";
    case CellTag::AllNegative: return "all_negative";
    case CellTag::Mixed: return "mixed";
  }
  return "?";
}

struct CellAssignment {
  CellTag tag = CellTag::Mixed;
  double lambda_star = 0.0;  // tag is stable for every lambda > lambda_star
};

/// Row sums <W_m, 1> for every receptive field of the filter. Values are
/// added in ascending order, so rows holding the same multiset of weights
/// (every row in circular mode) get bit-identical sums.
inline std::vector<double> row_sums(const FilterPolyhedron& poly) {
  std::vector<double> sums;
  for (auto& row : filter_rows(std::span<const double>(poly.weights), poly.geometry)) {
    std::sort(row.values.begin(), row.values.end());
    double s = 0.0;
    for (const double v : row.values) s += v;
    sums.push_back(s);
  }
  return sums;
}

/// Sign pattern of W_m (lambda 1) + b for large lambda. In circular mode all
/// rows share sum(weights) and the cell is AllPositive or AllNegative. In zero
/// mode clipped boundary rows can disagree in sign with the interior; such a
/// filter is tagged Mixed. lambda_star is the largest sign-change point
/// max(0, -b / s_m) over the row sums s_m.
inline CellAssignment asymptotic_cell(const FilterPolyhedron& poly) {
  double total = 0.0;
  for (const double w : poly.weights) total += w;
  if (total == 0.0) fail(ErrorCode::ZeroSum, "identity ray lies on every hyperplane");

  std::vector<double> sums;
  if (poly.geometry.padding_mode == PaddingMode::Circular) {
    sums.push_back(total);
  } else {
    sums = row_sums(poly);
  }
  CellAssignment out;
  out.tag = total > 0.0 ? CellTag::AllPositive : CellTag::AllNegative;
  for (const double s : sums) {
    if (s == 0.0 || (s > 0.0) != (total > 0.0)) out.tag = CellTag::Mixed;
    if (s != 0.0) out.lambda_star = std::max(out.lambda_star, -poly.bias / s);
  }
  return out;
}

struct UniformityReport {
  double max_deviation = 0.0;
  /// Exactness (deviation == 0) is only claimed in circular mode.
  bool exactness_applicable = false;
};

/// max_m |<W_m, 1> - <W_0, 1>|.
inline UniformityReport row_angle_uniformity(const FilterPolyhedron& poly) {
  const auto sums = row_sums(poly);
  UniformityReport r;
  r.exactness_applicable = poly.geometry.padding_mode == PaddingMode::Circular;
  for (const double s : sums) r.max_deviation = std::max(r.max_deviation, std::abs(s - sums[0]));
  return r;
}

/// Null-model probability F / 2^F that all F filters of a layer align along
/// the identity ray.
inline double alignment_probability(std::size_t filters) {
  if (filters == 0) fail(ErrorCode::EmptyLayer, "alignment probability needs F >= 1");
  return std::ldexp(static_cast<double>(filters), -static_cast<int>(filters));
}

/// log of C(n, k) / 2^n.
inline double log_binomial_half_pmf(std::size_t n, std::size_t k) {
  const double dn = static_cast<double>(n), dk = static_cast<double>(k);
  return std::lgamma(dn + 1.0) - std::lgamma(dk + 1.0) - std::lgamma(dn - dk + 1.0) -
         dn * std::log(2.0);
}

/// Exact two-sided p-value of `negatives` out of `n` under Binomial(n, 1/2):
/// the mass of every outcome at least as far from n/2 as the observation.
inline double binomial_two_sided_p(std::size_t n, std::size_t negatives) {
  const double half = static_cast<double>(n) / 2.0;
  const double observed = std::abs(static_cast<double>(negatives) - half);
  double p = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    if (std::abs(static_cast<double>(k) - half) >= observed) {
      p += std::exp(log_binomial_half_pmf(n, k));
    }
  }
  return std::min(1.0, p);
}

struct SignificanceReport {
  double n_l = 0.0;
  std::size_t filter_count = 0;
  std::size_t negatives = 0;
  double null_mean = 0.5;
  double p_two_sided = 1.0;
  double alignment_probability = 0.0;
};

inline SignificanceReport significance_report(std::span<const double> cosines,
                                              std::size_t filters) {
  if (filters == 0 || cosines.size() != filters) {
    fail(ErrorCode::ShapeMismatch, "significance report needs F == number of cosines >= 1");
  }
  SignificanceReport r;
  r.n_l = negative_fraction(cosines);
  r.filter_count = filters;
  r.negatives = static_cast<std::size_t>(
      std::count_if(cosines.begin(), cosines.end(), [](double c) { return c <= 0.0; }));
  r.p_two_sided = binomial_two_sided_p(filters, r.negatives);
  r.alignment_probability = alignment_probability(filters);
  return r;
}

}  // namespace convarrange
