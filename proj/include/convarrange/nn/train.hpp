// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "convarrange/data/dataset.hpp"
#include "convarrange/data/transforms.hpp"
#include "convarrange/io/snapshot.hpp"
#include "convarrange/nn/loss.hpp"
#include "convarrange/nn/model.hpp"
#include "convarrange/nn/optim.hpp"

namespace convarrange::nn {

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based; epoch e trains with lr_at(schedule, e - 1)
  double lr = 0.0;
  double train_loss = 0.0;  // running mean over the epoch's minibatches
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainConfig {
  LRSchedule schedule = StepSchedule{};
  std::size_t epochs = 0;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  bool augment = false;
  SgdConfig sgd;
  Normalization normalization = Normalization::SignedUnit;
};

/// Receives every snapshot (epoch 0 included) right after it is stored.
using SnapshotCallback = std::function<void(std::size_t epoch, const ModelWeights&)>;

struct TrainResult {
  EvalResult initial_train;  // model at epoch 0 on the training split
  EvalResult initial_val;
  std::vector<EpochMetrics> metrics;
  io::SnapshotStore store;
};

template <class T>
Tensor<T> gather_batch(const data::Dataset& d, std::span<const std::size_t> idx) {
  Shape s = d.images.shape;
  s[0] = idx.size();
  Tensor<T> batch(s);
  const std::size_t stride = d.sample_size();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto src = d.images.slice(idx[i]);
    std::copy(src.begin(), src.end(), batch.ptr() + i * stride);
  }
  return batch;
}

template <class T>
EvalResult evaluate(const Model<T>& model, const data::Dataset& d, std::size_t batch_size = 256) {
  EvalResult r;
  if (d.size() == 0) return r;
  double loss = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  std::vector<int> labels;
  for (std::size_t start = 0; start < d.size(); start += batch_size) {
    const std::size_t end = std::min(d.size(), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    labels.assign(d.labels.begin() + static_cast<std::ptrdiff_t>(start),
                  d.labels.begin() + static_cast<std::ptrdiff_t>(end));
    const auto res = softmax_xent(forward(model, gather_batch<T>(d, idx)), labels);
    loss += res.loss * static_cast<double>(idx.size());
    correct += res.correct;
  }
  r.loss = loss / static_cast<double>(d.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(d.size());
  return r;
}

/// Minibatch SGD. The sample order of epoch e is a permutation drawn from
/// (seed, e); augmentation draws per (seed, e, sample). A snapshot is stored
/// before training (epoch 0) and after every epoch.
template <class T>
TrainResult train_run(Model<T>& model, const data::Dataset& train, const data::Dataset& val,
                      const TrainConfig& config, io::SnapshotStore store = {},
                      const std::vector<SnapshotCallback>& callbacks = {}) {
  if (config.batch_size == 0) fail(ErrorCode::InvalidConfig, "batch size must be positive");
  TrainResult result;
  auto snapshot = [&](std::size_t epoch) {
    const auto weights = model.export_weights();
    store.save(epoch, weights, config.normalization);
    for (const auto& cb : callbacks) cb(epoch, weights);
  };
  result.initial_train = evaluate(model, train);
  result.initial_val = evaluate(model, val);
  snapshot(0);

  OptimizerState<T> opt{config.sgd, {}};
  auto params = model.parameters();
  const auto mask = model.decay_mask();
  const std::size_t C = train.channels(), H = train.height(), W = train.width();
  const std::size_t stride = train.sample_size();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = lr_at(config.schedule, epoch - 1);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng order_rng = make_rng(config.seed, {epoch, 0x0dd});
    std::shuffle(order.begin(), order.end(), order_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::vector<int> labels;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      Tensor<T> batch = gather_batch<T>(train, idx);
      if (config.augment) {
        std::vector<float> in(stride), out(stride);
        for (std::size_t i = 0; i < idx.size(); ++i) {
          const auto src = train.images.slice(idx[i]);
          std::copy(src.begin(), src.end(), in.begin());
          Rng aug = make_rng(config.seed, {epoch, idx[i], 0xa06});
          data::augment_shift_flip(in, out, C, H, W, aug);
          std::copy(out.begin(), out.end(), batch.ptr() + i * stride);
        }
      }
      labels.clear();
      for (const auto i : idx) labels.push_back(train.labels[i]);

      ForwardCache<T> cache;
      const auto logits = forward(model, batch, &cache);
      const auto loss = softmax_xent(logits, labels);
      if (!std::isfinite(loss.loss)) {
        fail(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ", batch starting at " +
                                           std::to_string(start) + ", lr " + std::to_string(lr));
      }
      loss_sum += loss.loss * static_cast<double>(idx.size());
      correct += loss.correct;
      const auto grads = backward(model, cache, loss.dlogits);
      sgd_step<T>(params, grads, mask, lr, opt);
      model.touch();
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.lr = lr;
    if (!train.labels.empty()) {
      m.train_loss = loss_sum / static_cast<double>(train.size());
      m.train_accuracy = static_cast<double>(correct) / static_cast<double>(train.size());
    }
    const auto v = evaluate(model, val);
    m.val_loss = v.loss;
    m.val_accuracy = v.accuracy;
    result.metrics.push_back(m);
    snapshot(epoch);
  }
  result.store = std::move(store);
  return result;
}

}  // namespace convarrange::nn
