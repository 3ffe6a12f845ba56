// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "convarrange/error.hpp"
#include "convarrange/geometry.hpp"
#include "convarrange/tensor.hpp"

namespace convarrange {

enum class Normalization { SignedUnit, PositiveUnit };

inline const char* to_string(Normalization n) {
  return n == Normalization::SignedUnit ? "signed_unit" : "positive_unit";
}

inline Normalization normalization_from_string(const std::string& s) {
  if (s == "signed_unit") return Normalization::SignedUnit;
  if (s == "positive_unit") return Normalization::PositiveUnit;
  fail(ErrorCode::InvalidConfig, "unknown normalization '" + s + "'");
}

enum class ParamKind { Conv, Dense };

/// Parameters of one trainable layer in float32. Conv weights are F x C x k x k,
/// dense weights out x in; `id` is 1-based over trainable layers.
struct LayerParams {
  std::size_t id = 0;
  ParamKind kind = ParamKind::Conv;
  std::string name;  // record prefix: conv1, conv2, ..., fc1
  ConvGeometry geometry;  // meaningful for conv layers only
  Tensor<float> weight;
  Tensor<float> bias;

  bool operator==(const LayerParams&) const = default;
};

/// A full model's weights, trainable layers in forward order.
struct ModelWeights {
  std::vector<LayerParams> layers;

  const LayerParams& layer(std::size_t id) const {
    for (const auto& l : layers) {
      if (l.id == id) return l;
    }
    fail(ErrorCode::MissingLayer, "layer " + std::to_string(id));
  }
  LayerParams& layer(std::size_t id) {
    return const_cast<LayerParams&>(std::as_const(*this).layer(id));
  }

  std::vector<std::size_t> conv_layer_ids() const {
    std::vector<std::size_t> ids;
    for (const auto& l : layers) {
      if (l.kind == ParamKind::Conv) ids.push_back(l.id);
    }
    return ids;
  }

  bool operator==(const ModelWeights&) const = default;
};

}  // namespace convarrange
