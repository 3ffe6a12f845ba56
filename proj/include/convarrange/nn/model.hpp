// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
//
// A small sequential CNN: conv / ReLU / 2x2 max-pool / flatten / dense.
// Activations are N x C x H x W (or N x D after flatten); conv weights are
// F x C x k x k, dense weights out x in. No batch normalization.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "convarrange/geometry.hpp"
#include "convarrange/parallel.hpp"
#include "convarrange/tensor.hpp"
#include "convarrange/vectorize.hpp"
#include "convarrange/weights.hpp"

namespace convarrange::nn {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

template <class T>
struct Conv2d {
  ConvGeometry geometry;
  std::size_t filters = 0;
  Tensor<T> weight;  // F x C x k x k
  Tensor<T> bias;    // F
  /// im2col gather table, (C*k*k) x r; -1 marks a zero-padding tap.
  std::vector<std::int32_t> gather;

  std::size_t rows() const { return geometry.filter_size(); }
  std::size_t fields() const { return geometry.out_height() * geometry.out_width(); }

  void build_gather() {
    const std::size_t r = receptive_field_count(geometry);
    const std::size_t k = geometry.kernel;
    const std::size_t HW = geometry.in_height * geometry.in_width;
    gather.assign(rows() * r, -1);
    for (std::size_t oh = 0; oh < geometry.out_height(); ++oh) {
      for (std::size_t ow = 0; ow < geometry.out_width(); ++ow) {
        const std::size_t col = oh * geometry.out_width() + ow;
        for (std::size_t p = 0; p < k; ++p) {
          const auto h = detail::tap_position(geometry, oh, p, geometry.in_height);
          for (std::size_t q = 0; q < k; ++q) {
            const auto w = detail::tap_position(geometry, ow, q, geometry.in_width);
            if (!h || !w) continue;
            for (std::size_t c = 0; c < geometry.in_channels; ++c) {
              gather[((c * k + p) * k + q) * r + col] =
                  static_cast<std::int32_t>(c * HW + *h * geometry.in_width + *w);
            }
          }
        }
      }
    }
  }
};

struct ReLU {};
struct MaxPool2 {};
struct Flatten {};

template <class T>
struct Dense {
  std::size_t in = 0;
  std::size_t out = 0;
  Tensor<T> weight;  // out x in
  Tensor<T> bias;    // out
};

template <class T>
using Layer = std::variant<Conv2d<T>, ReLU, MaxPool2, Flatten, Dense<T>>;

/// Architecture description shared by configs, builders and the CLI.
struct ModelSpec {
  std::size_t in_channels = 1;
  std::size_t in_height = 16;
  std::size_t in_width = 16;
  std::vector<std::size_t> conv_channels = {16, 16, 32, 32, 64, 64};
  std::vector<std::size_t> pool_after = {2, 4, 6};  // 1-based conv indices
  std::size_t kernel = 3;
  std::size_t classes = 4;

  bool operator==(const ModelSpec&) const = default;
};

/// Six 3x3 conv layers (16, 16, 32, 32, 64, 64), ReLU after each, 2x2
/// max-pool after conv 2/4/6, one dense classifier head.
inline ModelSpec reference_spec(std::size_t c, std::size_t h, std::size_t w, std::size_t classes) {
  return ModelSpec{c, h, w, {16, 16, 32, 32, 64, 64}, {2, 4, 6}, 3, classes};
}

/// Twelve-conv variant used for the vanishing-signal control.
inline ModelSpec deep_spec(std::size_t c, std::size_t h, std::size_t w, std::size_t classes) {
  return ModelSpec{c, h, w, {16, 16, 16, 16, 32, 32, 32, 32, 64, 64, 64, 64}, {4, 8, 12}, 3,
                   classes};
}

template <class T>
class Model {
 public:
  Model() = default;
  Model(std::size_t c, std::size_t h, std::size_t w) : input_shape_{c, h, w}, shape_{c, h, w} {}

  Model& conv(std::size_t filters, std::size_t kernel = 3, std::size_t padding = 1,
              std::size_t stride = 1, PaddingMode mode = PaddingMode::Zero) {
    if (shape_.size() != 3) fail(ErrorCode::ShapeMismatch, "conv after flatten");
    Conv2d<T> layer;
    layer.geometry = ConvGeometry{shape_[0], shape_[1], shape_[2], kernel, stride, padding, mode};
    layer.geometry.validate();
    layer.filters = filters;
    layer.weight = Tensor<T>({filters, shape_[0], kernel, kernel});
    layer.bias = Tensor<T>({filters});
    layer.build_gather();
    shape_ = {filters, layer.geometry.out_height(), layer.geometry.out_width()};
    layers_.emplace_back(std::move(layer));
    return *this;
  }
  Model& relu() {
    layers_.emplace_back(ReLU{});
    return *this;
  }
  Model& maxpool() {
    if (shape_.size() != 3 || shape_[1] < 2 || shape_[2] < 2) {
      fail(ErrorCode::ShapeMismatch, "max-pool needs spatial extent >= 2");
    }
    layers_.emplace_back(MaxPool2{});
    shape_ = {shape_[0], shape_[1] / 2, shape_[2] / 2};
    return *this;
  }
  Model& flatten() {
    layers_.emplace_back(Flatten{});
    shape_ = {element_count(shape_)};
    return *this;
  }
  Model& dense(std::size_t out) {
    if (shape_.size() != 1) flatten();
    Dense<T> layer{shape_[0], out, Tensor<T>({out, shape_[0]}), Tensor<T>({out})};
    layers_.emplace_back(std::move(layer));
    shape_ = {out};
    return *this;
  }

  static Model build(const ModelSpec& spec) {
    Model m(spec.in_channels, spec.in_height, spec.in_width);
    for (std::size_t i = 0; i < spec.conv_channels.size(); ++i) {
      m.conv(spec.conv_channels[i], spec.kernel, spec.kernel / 2);
      m.relu();
      if (std::find(spec.pool_after.begin(), spec.pool_after.end(), i + 1) !=
          spec.pool_after.end()) {
        m.maxpool();
      }
    }
    m.dense(spec.classes);
    return m;
  }

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return shape_; }
  std::vector<Layer<T>>& layers() { return layers_; }
  const std::vector<Layer<T>>& layers() const { return layers_; }

  /// Weight and bias tensors of every trainable layer, in forward order.
  std::vector<Tensor<T>*> parameters() {
    std::vector<Tensor<T>*> out;
    for (auto& layer : layers_) {
      std::visit(
          [&](auto& l) {
            if constexpr (requires { l.weight; }) {
              out.push_back(&l.weight);
              out.push_back(&l.bias);
            }
          },
          layer);
    }
    return out;
  }
  std::vector<const Tensor<T>*> parameters() const {
    std::vector<const Tensor<T>*> out;
    for (auto* p : const_cast<Model*>(this)->parameters()) out.push_back(p);
    return out;
  }
  /// true for weights (decayed), false for biases.
  std::vector<bool> decay_mask() const {
    std::vector<bool> mask;
    for (std::size_t i = 0; i < parameters().size(); ++i) mask.push_back(i % 2 == 0);
    return mask;
  }

  /// Bumped whenever parameters change; forward caches record it.
  std::uint64_t version() const { return version_; }
  void touch() { ++version_; }

  std::vector<const Conv2d<T>*> conv_layers() const {
    std::vector<const Conv2d<T>*> out;
    for (const auto& layer : layers_) {
      if (const auto* c = std::get_if<Conv2d<T>>(&layer)) out.push_back(c);
    }
    return out;
  }

  /// Float32 copy of the trainable parameters; ids count conv layers first
  /// (conv1..convL) and continue over dense layers (named fc1, fc2, ...).
  ModelWeights export_weights() const {
    ModelWeights w;
    std::size_t id = 0, conv_no = 0, dense_no = 0;
    for (const auto& layer : layers_) {
      std::visit(
          [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, Conv2d<T>>) {
              w.layers.push_back({++id, ParamKind::Conv, "conv" + std::to_string(++conv_no),
                                  l.geometry, tensor_cast<float>(l.weight),
                                  tensor_cast<float>(l.bias)});
            } else if constexpr (std::is_same_v<L, Dense<T>>) {
              w.layers.push_back({++id, ParamKind::Dense, "fc" + std::to_string(++dense_no), {},
                                  tensor_cast<float>(l.weight), tensor_cast<float>(l.bias)});
            }
          },
          layer);
    }
    return w;
  }

  /// Overwrites the parameters of layer `params.id` (same numbering as export).
  void import_layer(const LayerParams& params) {
    std::size_t id = 0;
    bool found = false;
    for (auto& layer : layers_) {
      std::visit(
          [&](auto& l) {
            if constexpr (requires { l.weight; }) {
              if (++id != params.id) return;
              if (l.weight.shape != params.weight.shape || l.bias.shape != params.bias.shape) {
                fail(ErrorCode::ShapeMismatch,
                     "layer " + std::to_string(id) + ": " + shape_string(params.weight.shape) +
                         " vs model " + shape_string(l.weight.shape));
              }
              l.weight = tensor_cast<T>(params.weight);
              l.bias = tensor_cast<T>(params.bias);
              found = true;
            }
          },
          layer);
    }
    if (!found) fail(ErrorCode::MissingLayer, "layer " + std::to_string(params.id));
    touch();
  }

  void import_weights(const ModelWeights& w) {
    for (const auto& l : w.layers) import_layer(l);
  }

  template <class U>
  Model<U> cast() const {
    Model<U> out(input_shape_[0], input_shape_[1], input_shape_[2]);
    for (const auto& layer : layers_) {
      std::visit(
          [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, Conv2d<T>>) {
              const auto& g = l.geometry;
              out.conv(l.filters, g.kernel, g.padding, g.stride, g.padding_mode);
              auto& c = std::get<Conv2d<U>>(out.layers().back());
              c.weight = tensor_cast<U>(l.weight);
              c.bias = tensor_cast<U>(l.bias);
            } else if constexpr (std::is_same_v<L, Dense<T>>) {
              out.dense(l.out);
              auto& d = std::get<Dense<U>>(out.layers().back());
              d.weight = tensor_cast<U>(l.weight);
              d.bias = tensor_cast<U>(l.bias);
            } else if constexpr (std::is_same_v<L, ReLU>) {
              out.relu();
            } else if constexpr (std::is_same_v<L, MaxPool2>) {
              out.maxpool();
            } else {
              out.flatten();
            }
          },
          layer);
    }
    return out;
  }

 private:
  Shape input_shape_;
  Shape shape_;
  std::vector<Layer<T>> layers_;
  std::uint64_t version_ = 0;
};

/// Activations kept by forward() for backward(): the input of every layer
/// plus max-pool argmax positions.
template <class T>
struct ForwardCache {
  std::vector<Tensor<T>> inputs;
  std::vector<std::vector<std::uint32_t>> argmax;  // per layer, empty unless max-pool
  std::uint64_t version = 0;
  bool filled = false;
};

namespace detail {

template <class T>
void im2col(const Conv2d<T>& conv, const T* x, T* cols) {
  const std::size_t n = conv.gather.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = conv.gather[i];
    cols[i] = idx >= 0 ? x[idx] : T{0};
  }
}

template <class T>
void col2im_add(const Conv2d<T>& conv, const T* cols, T* dx) {
  const std::size_t n = conv.gather.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = conv.gather[i];
    if (idx >= 0) dx[idx] += cols[i];
  }
}

template <class T>
Tensor<T> conv_forward(const Conv2d<T>& conv, const Tensor<T>& x) {
  const std::size_t N = x.dim(0);
  const std::size_t K = conv.rows();
  const std::size_t R = conv.fields();
  const std::size_t F = conv.filters;
  Tensor<T> y({N, F, conv.geometry.out_height(), conv.geometry.out_width()});
  const std::size_t in_stride = conv.geometry.input_size();
  ConstMatMap<T> W(conv.weight.ptr(), static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(K));
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(conv.bias.ptr(),
                                                         static_cast<Eigen::Index>(F));
  parallel_for(N, [&](std::size_t n) {
    RowMatrix<T> cols(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(R));
    im2col(conv, x.ptr() + n * in_stride, cols.data());
    MatMap<T> out(y.ptr() + n * F * R, static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(R));
    out.noalias() = W * cols;
    out.colwise() += b;
  });
  return y;
}

/// Accumulates dW/db in sample order (fixed reduction order); dX per sample.
template <class T>
Tensor<T> conv_backward(const Conv2d<T>& conv, const Tensor<T>& x, const Tensor<T>& dy,
                        Tensor<T>& dw, Tensor<T>& db, bool need_dx) {
  const std::size_t N = x.dim(0);
  const std::size_t K = conv.rows();
  const std::size_t R = conv.fields();
  const std::size_t F = conv.filters;
  const std::size_t in_stride = conv.geometry.input_size();
  ConstMatMap<T> W(conv.weight.ptr(), static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(K));
  MatMap<T> dW(dw.ptr(), static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(K));
  Tensor<T> dx;
  if (need_dx) dx = Tensor<T>(x.shape);
  RowMatrix<T> cols(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(R));
  RowMatrix<T> dcols(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(R));
  for (std::size_t n = 0; n < N; ++n) {
    ConstMatMap<T> dY(dy.ptr() + n * F * R, static_cast<Eigen::Index>(F),
                      static_cast<Eigen::Index>(R));
    im2col(conv, x.ptr() + n * in_stride, cols.data());
    dW.noalias() += dY * cols.transpose();
    // Plain loops: Eigen reductions over mapped memory peel by address
    // alignment, which would make the summation order heap dependent.
    for (std::size_t f = 0; f < F; ++f) {
      const T* row = dy.ptr() + (n * F + f) * R;
      T acc{0};
      for (std::size_t r = 0; r < R; ++r) acc += row[r];
      db[f] += acc;
    }
    if (need_dx) {
      dcols.noalias() = W.transpose() * dY;
      col2im_add(conv, dcols.data(), dx.ptr() + n * in_stride);
    }
  }
  return dx;
}

template <class T>
Tensor<T> maxpool_forward(const Tensor<T>& x, std::vector<std::uint32_t>* argmax) {
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t OH = H / 2, OW = W / 2;
  Tensor<T> y({N, C, OH, OW});
  if (argmax) argmax->assign(y.size(), 0);
  for (std::size_t nc = 0; nc < N * C; ++nc) {
    const T* plane = x.ptr() + nc * H * W;
    for (std::size_t oh = 0; oh < OH; ++oh) {
      for (std::size_t ow = 0; ow < OW; ++ow) {
        std::uint32_t best = static_cast<std::uint32_t>(2 * oh * W + 2 * ow);
        for (std::size_t dh = 0; dh < 2; ++dh) {
          for (std::size_t dw = 0; dw < 2; ++dw) {
            const auto idx = static_cast<std::uint32_t>((2 * oh + dh) * W + 2 * ow + dw);
            if (plane[idx] > plane[best]) best = idx;  // first occurrence wins ties
          }
        }
        const std::size_t o = nc * OH * OW + oh * OW + ow;
        y[o] = plane[best];
        if (argmax) (*argmax)[o] = best;
      }
    }
  }
  return y;
}

template <class T>
Tensor<T> dense_forward(const Dense<T>& d, const Tensor<T>& x) {
  const std::size_t N = x.dim(0);
  Tensor<T> y({N, d.out});
  ConstMatMap<T> X(x.ptr(), static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(d.in));
  ConstMatMap<T> W(d.weight.ptr(), static_cast<Eigen::Index>(d.out),
                   static_cast<Eigen::Index>(d.in));
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(d.bias.ptr(),
                                                         static_cast<Eigen::Index>(d.out));
  MatMap<T> Y(y.ptr(), static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(d.out));
  Y.noalias() = X * W.transpose();
  Y.rowwise() += b;
  return y;
}

}  // namespace detail

/// Logits for an N x C x H x W batch. When `cache` is given it receives
/// everything backward() needs.
template <class T>
Tensor<T> forward(const Model<T>& model, const Tensor<T>& batch, ForwardCache<T>* cache = nullptr) {
  const auto& in = model.input_shape();
  if (batch.shape.size() != 4 || batch.dim(1) != in[0] || batch.dim(2) != in[1] ||
      batch.dim(3) != in[2]) {
    fail(ErrorCode::ShapeMismatch, "batch " + shape_string(batch.shape) + " vs model input " +
                                       shape_string(in));
  }
  if (cache) {
    cache->inputs.clear();
    cache->argmax.assign(model.layers().size(), {});
    cache->version = model.version();
    cache->filled = true;
  }
  Tensor<T> x = batch;
  for (std::size_t li = 0; li < model.layers().size(); ++li) {
    const auto& layer = model.layers()[li];
    Tensor<T> y = std::visit(
        [&](const auto& l) -> Tensor<T> {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Conv2d<T>>) {
            return detail::conv_forward(l, x);
          } else if constexpr (std::is_same_v<L, ReLU>) {
            Tensor<T> out = x;
            for (auto& v : out.data) v = v > T{0} ? v : T{0};
            return out;
          } else if constexpr (std::is_same_v<L, MaxPool2>) {
            return detail::maxpool_forward(x, cache ? &cache->argmax[li] : nullptr);
          } else if constexpr (std::is_same_v<L, Flatten>) {
            Tensor<T> out = x;
            out.shape = {x.dim(0), x.size() / x.dim(0)};
            return out;
          } else {
            return detail::dense_forward(l, x);
          }
        },
        layer);
    if (cache) {
      cache->inputs.push_back(std::move(x));
    }
    x = std::move(y);
  }
  return x;
}

/// Gradients of every parameter (same order as Model::parameters()) given
/// dLoss/dLogits.
template <class T>
std::vector<Tensor<T>> backward(const Model<T>& model, const ForwardCache<T>& cache,
                                const Tensor<T>& dlogits) {
  if (!cache.filled || cache.version != model.version() ||
      cache.inputs.size() != model.layers().size()) {
    fail(ErrorCode::StaleCache, "forward cache does not match the current parameters");
  }
  std::vector<Tensor<T>> grads;
  for (const auto* p : model.parameters()) grads.emplace_back(p->shape);
  std::size_t param = grads.size();

  Tensor<T> g = dlogits;
  for (std::size_t li = model.layers().size(); li-- > 0;) {
    const auto& x = cache.inputs[li];
    const bool need_dx = li > 0;
    g = std::visit(
        [&](const auto& l) -> Tensor<T> {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Conv2d<T>>) {
            param -= 2;
            return detail::conv_backward(l, x, g, grads[param], grads[param + 1], need_dx);
          } else if constexpr (std::is_same_v<L, ReLU>) {
            Tensor<T> out = g;
            for (std::size_t i = 0; i < out.size(); ++i) {
              if (!(x[i] > T{0})) out[i] = T{0};
            }
            return out;
          } else if constexpr (std::is_same_v<L, MaxPool2>) {
            Tensor<T> out(x.shape);
            const std::size_t plane_in = x.dim(2) * x.dim(3);
            const std::size_t plane_out = g.dim(2) * g.dim(3);
            const auto& am = cache.argmax[li];
            for (std::size_t o = 0; o < g.size(); ++o) {
              out[(o / plane_out) * plane_in + am[o]] += g[o];
            }
            return out;
          } else if constexpr (std::is_same_v<L, Flatten>) {
            Tensor<T> out = g;
            out.shape = x.shape;
            return out;
          } else {
            param -= 2;
            const std::size_t N = x.dim(0);
            ConstMatMap<T> X(x.ptr(), static_cast<Eigen::Index>(N),
                             static_cast<Eigen::Index>(l.in));
            ConstMatMap<T> dY(g.ptr(), static_cast<Eigen::Index>(N),
                              static_cast<Eigen::Index>(l.out));
            ConstMatMap<T> W(l.weight.ptr(), static_cast<Eigen::Index>(l.out),
                             static_cast<Eigen::Index>(l.in));
            MatMap<T> dW(grads[param].ptr(), static_cast<Eigen::Index>(l.out),
                         static_cast<Eigen::Index>(l.in));
            dW.noalias() = dY.transpose() * X;
            for (std::size_t o = 0; o < l.out; ++o) {
              T acc{0};
              for (std::size_t n = 0; n < N; ++n) acc += g[n * l.out + o];
              grads[param + 1][o] = acc;
            }
            Tensor<T> out;
            if (need_dx) {
              out = Tensor<T>(x.shape);
              MatMap<T> dX(out.ptr(), static_cast<Eigen::Index>(N),
                           static_cast<Eigen::Index>(l.in));
              dX.noalias() = dY * W;
            }
            return out;
          }
        },
        model.layers()[li]);
  }
  return grads;
}

}  // namespace convarrange::nn
