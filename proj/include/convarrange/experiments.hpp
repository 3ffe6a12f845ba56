// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Experiment drivers: bias tracking over training, the non-learning control,
// layer reinitialization heatmaps and training on corrupted data.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "convarrange/arrangement.hpp"
#include "convarrange/data/formats.hpp"
#include "convarrange/data/synth.hpp"
#include "convarrange/data/transforms.hpp"
#include "convarrange/nn/init.hpp"
#include "convarrange/nn/train.hpp"
#include "convarrange/projection.hpp"

namespace convarrange::experiments {

enum class Corruption { None, NoisyLabels, PixelShuffle };

inline const char* to_string(Corruption c) {
  switch (c) {
    case Corruption::None: return "none";
    case Corruption::NoisyLabels: return "noisy_labels";
    case Corruption::PixelShuffle: return "pixel_shuffle";
  }
  return "?";
}

struct DatasetConfig {
  std::string kind = "synth";  // synth | idx | cifar
  std::size_t samples = 4000;  // synth: train + val pool
  std::size_t test_samples = 1000;
  std::size_t classes = 8;
  std::uint64_t seed = 0;  // synth generation; fixed across run seeds
  Normalization normalization = Normalization::SignedUnit;
  std::string train_images;  // idx image file, or cifar batch
  std::string train_labels;  // idx label file
  std::string test_images;
  std::string test_labels;

  bool operator==(const DatasetConfig&) const = default;
};

/// Everything that determines a run. Same config => same outputs.
struct RunConfig {
  std::string run_id = "run";
  nn::ModelSpec model;  // input extents are taken from the dataset
  std::variant<nn::KaimingNormal, nn::FixedGaussian> init = nn::KaimingNormal{};
  nn::LRSchedule schedule = nn::StepSchedule{};
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;  // initialization and sample order
  bool augment = false;
  nn::SgdConfig sgd;
  DatasetConfig dataset;
  Corruption corruption = Corruption::None;
  double noise_fraction = 1.0;
  bool per_image_shuffle = false;
};

/// Reference desk setup: 6-conv model on 8-class synthetic shapes,
/// step schedule from 0.01, 30 epochs, batch 16.
inline RunConfig desk_config(std::uint64_t seed = 1) {
  RunConfig c;
  c.run_id = "desk-seed" + std::to_string(seed);
  c.seed = seed;
  c.model = nn::reference_spec(1, data::kSynthSize, data::kSynthSize, 8);
  return c;
}

struct PreparedData {
  data::Dataset train;
  data::Dataset val;
  data::Dataset test;
};

/// Loads or synthesizes the data, holds out 10% of the training pool for
/// validation and applies the configured corruption to the training split.
inline PreparedData prepare_data(const RunConfig& cfg) {
  const auto& dc = cfg.dataset;
  data::Dataset pool, test;
  if (dc.kind == "synth") {
    pool = data::synth_shapes(dc.samples, dc.classes, dc.seed, dc.normalization);
    test = data::synth_shapes(dc.test_samples, dc.classes, derive_seed(dc.seed, {0x7e57}),
                              dc.normalization);
  } else if (dc.kind == "idx") {
    pool = data::load_idx(dc.train_images, dc.train_labels, dc.normalization, dc.classes);
    test = data::load_idx(dc.test_images, dc.test_labels, dc.normalization, dc.classes);
  } else if (dc.kind == "cifar") {
    pool = data::load_cifar_binary(dc.train_images, dc.normalization, dc.classes);
    test = data::load_cifar_binary(dc.test_images, dc.normalization, dc.classes);
  } else {
    fail(ErrorCode::InvalidConfig, "unknown dataset kind '" + dc.kind + "'");
  }
  test.split = data::Split::Test;
  auto split = data::split_validation(pool, dc.seed);
  PreparedData out{std::move(split.train), std::move(split.val), std::move(test)};
  switch (cfg.corruption) {
    case Corruption::None: break;
    case Corruption::NoisyLabels:
      out.train = data::randomize_labels(out.train, cfg.noise_fraction, derive_seed(cfg.seed, {0xb0}));
      break;
    case Corruption::PixelShuffle:
      out.train = data::pixel_shuffle(out.train, derive_seed(cfg.seed, {0xb1}), cfg.per_image_shuffle);
      break;
  }
  return out;
}

inline nn::ModelSpec resolved_spec(const RunConfig& cfg, const data::Dataset& d) {
  auto spec = cfg.model;
  spec.in_channels = d.channels();
  spec.in_height = d.height();
  spec.in_width = d.width();
  spec.classes = d.class_count;
  return spec;
}

inline nn::Model<float> initial_model(const RunConfig& cfg, const data::Dataset& d) {
  auto model = nn::Model<float>::build(resolved_spec(cfg, d));
  nn::kaiming_init(model, nn::InitSpec{cfg.init, derive_seed(cfg.seed, {0x1a1})});
  return model;
}

inline nn::TrainConfig train_config(const RunConfig& cfg) {
  nn::TrainConfig t;
  t.schedule = cfg.schedule;
  t.epochs = cfg.epochs;
  t.batch_size = cfg.batch_size;
  t.seed = cfg.seed;
  t.augment = cfg.augment;
  t.sgd = cfg.sgd;
  t.normalization = cfg.dataset.normalization;
  return t;
}

struct RunOutput {
  RunConfig config;
  nn::Model<float> model;  // final weights
  nn::TrainResult train;
  nn::EvalResult test;
  std::vector<BiasTrajectory> trajectories;  // one per conv layer, ids ascending
};

/// Trains one configuration and computes n_l for every conv layer at every
/// stored epoch. `store` decides where snapshots live (memory by default).
inline RunOutput run_bias_tracking(const RunConfig& cfg, io::SnapshotStore store = {}) {
  const auto data = prepare_data(cfg);
  auto model = initial_model(cfg, data.train);
  store.set_run_id(cfg.run_id);
  auto train = nn::train_run(model, data.train, data.val, train_config(cfg), std::move(store));
  RunOutput out{cfg, std::move(model), std::move(train), {}, {}};
  out.test = nn::evaluate(out.model, data.test);
  for (const auto id : out.train.store.load(0).conv_layer_ids()) {
    out.trajectories.push_back(trajectory(out.train.store, id));
  }
  return out;
}

struct TrajectoryStats {
  std::size_t layer_id = 0;
  std::vector<std::size_t> epochs;
  std::vector<double> mean;
  std::vector<double> stddev;  // population standard deviation across seeds
};

/// Mean and spread of n_l per (layer, epoch) over several runs.
inline std::vector<TrajectoryStats> aggregate(const std::vector<RunOutput>& runs) {
  std::vector<TrajectoryStats> out;
  if (runs.empty()) return out;
  for (std::size_t li = 0; li < runs.front().trajectories.size(); ++li) {
    TrajectoryStats s;
    s.layer_id = runs.front().trajectories[li].layer_id;
    const auto& points = runs.front().trajectories[li].points;
    for (std::size_t e = 0; e < points.size(); ++e) {
      double sum = 0.0, sq = 0.0;
      for (const auto& r : runs) {
        const double v = r.trajectories[li].points.at(e).second;
        sum += v;
        sq += v * v;
      }
      const double n = static_cast<double>(runs.size());
      const double mean = sum / n;
      s.epochs.push_back(points[e].first);
      s.mean.push_back(mean);
      s.stddev.push_back(std::sqrt(std::max(0.0, sq / n - mean * mean)));
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<RunOutput> run_bias_tracking_multi(RunConfig cfg,
                                                      const std::vector<std::uint64_t>& seeds) {
  std::vector<RunOutput> runs;
  const auto base_id = cfg.run_id;
  for (const auto s : seeds) {
    cfg.seed = s;
    cfg.run_id = base_id + "-seed" + std::to_string(s);
    runs.push_back(run_bias_tracking(cfg));
  }
  return runs;
}

/// Relative change of the training loss between initialization and the last epoch.
inline double relative_loss_change(const nn::TrainResult& t) {
  if (t.metrics.empty() || t.initial_train.loss == 0.0) return 0.0;
  return std::abs(t.metrics.back().train_loss - t.initial_train.loss) / t.initial_train.loss;
}

inline constexpr double kConvergenceTolerance = 0.01;
inline constexpr double kFlatBand = 0.1;

struct ConvergenceReport {
  double initial_train_loss = 0.0;
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;
  double relative_change = 0.0;
  bool converged = false;  // false iff relative_change < 1%
  std::vector<BiasTrajectory> trajectories;
  double max_deviation = 0.0;  // max |n_l - 0.5| over layers and epochs
  bool flat = false;           // max_deviation <= 0.1
};

inline ConvergenceReport convergence_report(const RunOutput& run) {
  ConvergenceReport r;
  r.initial_train_loss = run.train.initial_train.loss;
  for (const auto& m : run.train.metrics) {
    r.train_loss.push_back(m.train_loss);
    r.val_loss.push_back(m.val_loss);
  }
  r.relative_change = relative_loss_change(run.train);
  r.converged = !(r.relative_change < kConvergenceTolerance);
  r.trajectories = run.trajectories;
  for (const auto& t : r.trajectories) {
    for (const auto& [e, n] : t.points) r.max_deviation = std::max(r.max_deviation, std::abs(n - 0.5));
  }
  r.flat = r.max_deviation <= kFlatBand;
  return r;
}

/// 12-conv control initialized from N(0, 0.01^2). Every conv layer has 256
/// filters so the initial n_l sits within 0.5 +- 0.1 with high probability
/// (Binomial(256, 1/2)); pooling after conv 1, 2 and 3 keeps it cheap.
inline RunConfig failure_control_config(std::uint64_t seed = 1) {
  RunConfig c = desk_config(seed);
  c.run_id = "failure-control-seed" + std::to_string(seed);
  c.model.conv_channels.assign(12, 256);
  c.model.pool_after = {1, 2, 3};
  c.init = nn::FixedGaussian{0.01};
  c.epochs = 10;
  c.dataset.samples = 1000;
  c.dataset.test_samples = 200;
  return c;
}

/// Trains the control and reports whether it learned. With `strict`, a
/// control that does converge raises ControlConverged.
inline ConvergenceReport run_failure_control(const RunConfig& cfg, bool strict = false) {
  const auto report = convergence_report(run_bias_tracking(cfg));
  if (strict && report.converged) {
    fail(ErrorCode::ControlConverged, "relative train-loss change " +
                                          std::to_string(report.relative_change));
  }
  return report;
}

inline constexpr double kCriticalDrop = 0.05;

struct HeatmapGrid {
  std::vector<std::size_t> epochs;     // rows
  std::vector<std::size_t> layer_ids;  // columns
  std::vector<std::vector<double>> drop;  // [epoch][layer] accuracy_full - accuracy_reinit
  double full_accuracy = 0.0;

  /// Layers whose epoch-0 reset costs more than `threshold` accuracy.
  std::vector<std::size_t> critical_layers(double threshold = kCriticalDrop) const {
    std::vector<std::size_t> out;
    const auto it = std::find(epochs.begin(), epochs.end(), std::size_t{0});
    if (it == epochs.end()) return out;
    const auto row = static_cast<std::size_t>(it - epochs.begin());
    for (std::size_t j = 0; j < layer_ids.size(); ++j) {
      if (drop[row][j] > threshold) out.push_back(layer_ids[j]);
    }
    return out;
  }
};

/// Default reinit rows: {0, 1, 2, 5, 10, final}, restricted to stored epochs.
inline std::vector<std::size_t> default_reinit_epochs(const io::SnapshotStore& store) {
  const auto stored = store.epochs();
  std::vector<std::size_t> out;
  for (const std::size_t e : {0, 1, 2, 5, 10}) {
    if (store.contains(e)) out.push_back(e);
  }
  if (!stored.empty() && std::find(out.begin(), out.end(), stored.back()) == out.end()) {
    out.push_back(stored.back());
  }
  return out;
}

/// For every (epoch, conv layer): copy the final model, reset that layer's
/// weights and bias to the snapshot of that epoch, and measure the accuracy
/// drop on `eval`. No retraining. Cells are evaluated independently.
inline HeatmapGrid run_reinit(const nn::Model<float>& final_model, const io::SnapshotStore& store,
                              const data::Dataset& eval, std::vector<std::size_t> layer_ids,
                              const std::vector<std::size_t>& epochs) {
  const auto final_weights = final_model.export_weights();
  if (layer_ids.empty()) layer_ids = final_weights.conv_layer_ids();
  std::vector<ModelWeights> snapshots;
  for (const auto e : epochs) snapshots.push_back(store.load(e));
  for (const auto id : layer_ids) {
    if (final_weights.layer(id).kind != ParamKind::Conv) {
      fail(ErrorCode::MissingLayer, "layer " + std::to_string(id) + " is not a conv layer");
    }
    for (const auto& s : snapshots) s.layer(id);
  }

  HeatmapGrid grid;
  grid.epochs = epochs;
  grid.layer_ids = layer_ids;
  grid.full_accuracy = nn::evaluate(final_model, eval).accuracy;
  grid.drop.assign(epochs.size(), std::vector<double>(layer_ids.size(), 0.0));
  const std::size_t cells = epochs.size() * layer_ids.size();
  parallel_for(cells, [&](std::size_t cell) {
    const std::size_t row = cell / layer_ids.size();
    const std::size_t col = cell % layer_ids.size();
    const auto& replacement = snapshots[row].layer(layer_ids[col]);
    if (replacement == final_weights.layer(layer_ids[col])) {
      grid.drop[row][col] = 0.0;  // identity swap
      return;
    }
    nn::Model<float> copy = final_model;
    copy.import_layer(replacement);
    grid.drop[row][col] = grid.full_accuracy - nn::evaluate(copy, eval).accuracy;
  });
  return grid;
}

/// Reinitialization heatmap for a finished run, on its test split.
inline HeatmapGrid run_reinit(const RunOutput& run, std::vector<std::size_t> layer_ids = {},
                              std::vector<std::size_t> epochs = {}) {
  if (epochs.empty()) epochs = default_reinit_epochs(run.train.store);
  const auto data = prepare_data(run.config);
  return run_reinit(run.model, run.train.store, data.test, std::move(layer_ids), epochs);
}

/// Mean |n_l - 0.5| over conv layers with id >= `first_layer` at the point
/// with the given index of each trajectory (npos = last point).
inline double mean_abs_bias(const std::vector<BiasTrajectory>& trajectories, std::size_t first_layer,
                            std::size_t point = std::string::npos) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& t : trajectories) {
    if (t.layer_id < first_layer || t.points.empty()) continue;
    const auto& p = point == std::string::npos ? t.points.back() : t.points.at(point);
    sum += std::abs(p.second - 0.5);
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

/// Corrupted-data run. For noisy labels, augmentation and weight decay are
/// switched off and the learning rate decays by 0.95 per epoch.
inline RunOutput run_corruption(RunConfig cfg, Corruption corruption) {
  cfg.corruption = corruption;
  if (corruption == Corruption::NoisyLabels) {
    cfg.augment = false;
    cfg.sgd.weight_decay = 0.0;
    cfg.schedule = nn::PerEpochFactorSchedule{0.01, 0.95};
  } else if (corruption == Corruption::PixelShuffle) {
    cfg.schedule = nn::PerEpochFactorSchedule{0.01, 0.95};
  }
  cfg.run_id += std::string("-") + to_string(corruption);
  return run_bias_tracking(cfg);
}

/// Points (epochs) at which the training loss is still within `tolerance`
/// (relative) of its initial value; epoch 0 always qualifies.
inline std::vector<std::size_t> flat_loss_epochs(const nn::TrainResult& t, double tolerance = 0.01) {
  std::vector<std::size_t> out{0};
  for (const auto& m : t.metrics) {
    if (std::abs(m.train_loss - t.initial_train.loss) <= tolerance * t.initial_train.loss) {
      out.push_back(m.epoch);
    }
  }
  return out;
}

}  // namespace convarrange::experiments
