// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
//
// JSON form of RunConfig. Missing keys keep the defaults of the chosen
// preset ("desk" unless "preset" says otherwise); unknown keys are rejected.
#pragma once

#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "convarrange/experiments.hpp"

namespace convarrange::experiments {

inline Corruption corruption_from_string(const std::string& s) {
  if (s == "none") return Corruption::None;
  if (s == "noisy_labels") return Corruption::NoisyLabels;
  if (s == "pixel_shuffle") return Corruption::PixelShuffle;
  fail(ErrorCode::InvalidConfig, "unknown corruption '" + s + "'");
}

inline nlohmann::json schedule_to_json(const nn::LRSchedule& s) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using S = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<S, nn::StepSchedule>) {
          return {{"kind", "step"}, {"base", v.base}, {"factor", v.factor}, {"every", v.every}};
        } else if constexpr (std::is_same_v<S, nn::ExponentialSchedule>) {
          return {{"kind", "exponential"}, {"base", v.base}, {"period", v.period}};
        } else {
          return {{"kind", "per_epoch_factor"}, {"base", v.base}, {"factor", v.factor}};
        }
      },
      s);
}

inline nn::LRSchedule schedule_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "step") {
    nn::StepSchedule s;
    s.base = j.value("base", s.base);
    s.factor = j.value("factor", s.factor);
    s.every = j.value("every", s.every);
    if (s.every == 0) fail(ErrorCode::InvalidConfig, "step schedule needs every >= 1");
    return s;
  }
  if (kind == "exponential") {
    nn::ExponentialSchedule s;
    s.base = j.value("base", s.base);
    s.period = j.value("period", s.period);
    return s;
  }
  if (kind == "per_epoch_factor") {
    nn::PerEpochFactorSchedule s;
    s.base = j.value("base", s.base);
    s.factor = j.value("factor", s.factor);
    return s;
  }
  fail(ErrorCode::InvalidConfig, "unknown schedule kind '" + kind + "'");
}

inline nlohmann::json init_to_json(const std::variant<nn::KaimingNormal, nn::FixedGaussian>& init) {
  if (const auto* g = std::get_if<nn::FixedGaussian>(&init)) {
    return {{"kind", "fixed_gaussian"}, {"sigma", g->sigma}};
  }
  const auto& k = std::get<nn::KaimingNormal>(init);
  return {{"kind", "kaiming_normal"}, {"fan", k.fan == nn::FanMode::FanOut ? "fan_out" : "fan_in"}};
}

inline std::variant<nn::KaimingNormal, nn::FixedGaussian> init_from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "fixed_gaussian") return nn::FixedGaussian{j.value("sigma", 0.01)};
  if (kind == "kaiming_normal") {
    const auto fan = j.value("fan", std::string("fan_out"));
    if (fan != "fan_out" && fan != "fan_in") fail(ErrorCode::InvalidConfig, "fan must be fan_out or fan_in");
    return nn::KaimingNormal{fan == "fan_out" ? nn::FanMode::FanOut : nn::FanMode::FanIn};
  }
  fail(ErrorCode::InvalidConfig, "unknown init kind '" + kind + "'");
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  const auto& d = c.dataset;
  return {
      {"run_id", c.run_id},
      {"seed", c.seed},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"augment", c.augment},
      {"model",
       {{"conv_channels", c.model.conv_channels},
        {"pool_after", c.model.pool_after},
        {"kernel", c.model.kernel}}},
      {"init", init_to_json(c.init)},
      {"schedule", schedule_to_json(c.schedule)},
      {"sgd", {{"momentum", c.sgd.momentum}, {"weight_decay", c.sgd.weight_decay}}},
      {"dataset",
       {{"kind", d.kind},
        {"samples", d.samples},
        {"test_samples", d.test_samples},
        {"classes", d.classes},
        {"seed", d.seed},
        {"normalization", to_string(d.normalization)},
        {"train_images", d.train_images},
        {"train_labels", d.train_labels},
        {"test_images", d.test_images},
        {"test_labels", d.test_labels}}},
      {"corruption",
       {{"kind", to_string(c.corruption)},
        {"noise_fraction", c.noise_fraction},
        {"per_image", c.per_image_shuffle}}},
  };
}

namespace detail {
inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                           const std::string& where) {
  if (!j.is_object()) fail(ErrorCode::InvalidConfig, where + " must be an object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) fail(ErrorCode::InvalidConfig, "unknown key '" + key + "' in " + where);
  }
}
}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
  try {
    detail::reject_unknown(j,
                           {"preset", "run_id", "seed", "epochs", "batch_size", "augment", "model",
                            "init", "schedule", "sgd", "dataset", "corruption"},
                           "config");
    const auto seed = j.value("seed", std::uint64_t{1});
    const auto preset = j.value("preset", std::string("desk"));
    RunConfig c;
    if (preset == "desk") {
      c = desk_config(seed);
    } else if (preset == "failure_control") {
      c = failure_control_config(seed);
    } else {
      fail(ErrorCode::InvalidConfig, "unknown preset '" + preset + "'");
    }
    c.run_id = j.value("run_id", c.run_id);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.augment = j.value("augment", c.augment);
    if (j.contains("model")) {
      const auto& m = j["model"];
      detail::reject_unknown(m, {"conv_channels", "pool_after", "kernel"}, "model");
      c.model.conv_channels = m.value("conv_channels", c.model.conv_channels);
      c.model.pool_after = m.value("pool_after", c.model.pool_after);
      c.model.kernel = m.value("kernel", c.model.kernel);
    }
    if (j.contains("init")) c.init = init_from_json(j["init"]);
    if (j.contains("schedule")) c.schedule = schedule_from_json(j["schedule"]);
    if (j.contains("sgd")) {
      const auto& s = j["sgd"];
      detail::reject_unknown(s, {"momentum", "weight_decay"}, "sgd");
      c.sgd.momentum = s.value("momentum", c.sgd.momentum);
      c.sgd.weight_decay = s.value("weight_decay", c.sgd.weight_decay);
    }
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      detail::reject_unknown(d,
                             {"kind", "samples", "test_samples", "classes", "seed", "normalization",
                              "train_images", "train_labels", "test_images", "test_labels"},
                             "dataset");
      auto& o = c.dataset;
      o.kind = d.value("kind", o.kind);
      o.samples = d.value("samples", o.samples);
      o.test_samples = d.value("test_samples", o.test_samples);
      o.classes = d.value("classes", o.classes);
      o.seed = d.value("seed", o.seed);
      if (d.contains("normalization")) {
        o.normalization = normalization_from_string(d["normalization"].get<std::string>());
      }
      o.train_images = d.value("train_images", o.train_images);
      o.train_labels = d.value("train_labels", o.train_labels);
      o.test_images = d.value("test_images", o.test_images);
      o.test_labels = d.value("test_labels", o.test_labels);
    }
    if (j.contains("corruption")) {
      const auto& k = j["corruption"];
      detail::reject_unknown(k, {"kind", "noise_fraction", "per_image"}, "corruption");
      c.corruption = corruption_from_string(k.value("kind", std::string("none")));
      c.noise_fraction = k.value("noise_fraction", c.noise_fraction);
      c.per_image_shuffle = k.value("per_image", c.per_image_shuffle);
    }
    if (c.model.conv_channels.empty()) fail(ErrorCode::InvalidConfig, "model has no conv layers");
    if (c.batch_size == 0) fail(ErrorCode::InvalidConfig, "batch_size must be >= 1");
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, e.what());
  }
}

}  // namespace convarrange::experiments
