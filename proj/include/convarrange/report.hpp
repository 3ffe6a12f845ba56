// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
//
// CSV, JSON and SVG output. Floats are printed in shortest round-trip form so
// a CSV re-parses to the exact doubles that produced it.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "convarrange/arrangement.hpp"
#include "convarrange/experiments.hpp"
#include "convarrange/projection.hpp"

namespace convarrange::report {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// Per-layer result of analyzing one checkpoint.
struct LayerAnalysis {
  std::size_t layer_id = 0;
  std::string name;
  ConvGeometry geometry;
  std::vector<double> cosines;
  SignificanceReport significance;
  Histogram histogram;
};

/// Cosines, n_l, significance and a histogram for the selected conv layers
/// (all conv layers when `layer_ids` is empty).
inline std::vector<LayerAnalysis> analyze(const ModelWeights& w, std::vector<std::size_t> layer_ids = {},
                                          std::size_t bins = 40) {
  if (layer_ids.empty()) layer_ids = w.conv_layer_ids();
  std::vector<LayerAnalysis> out;
  for (const auto id : layer_ids) {
    const auto& l = w.layer(id);
    if (l.kind != ParamKind::Conv) {
      fail(ErrorCode::MissingLayer, "layer " + std::to_string(id) + " is not a conv layer");
    }
    LayerAnalysis a;
    a.layer_id = id;
    a.name = l.name;
    a.geometry = l.geometry;
    a.cosines = layer_cosines(l.weight, l.geometry);
    a.significance = significance_report(a.cosines, a.cosines.size());
    a.histogram = histogram(a.cosines, bins);
    out.push_back(std::move(a));
  }
  return out;
}

// ---- CSV ----

inline std::string cosines_csv(const std::vector<LayerAnalysis>& layers) {
  std::string s = "layer_id,index,cosine\n";
  for (const auto& l : layers) {
    for (std::size_t i = 0; i < l.cosines.size(); ++i) {
      s += std::to_string(l.layer_id) + "," + std::to_string(i) + "," + format_double(l.cosines[i]) + "\n";
    }
  }
  return s;
}

inline std::string histogram_csv(const std::vector<LayerAnalysis>& layers) {
  std::string s = "layer_id,bin,lower,upper,count\n";
  for (const auto& l : layers) {
    const auto& h = l.histogram;
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      s += std::to_string(l.layer_id) + "," + std::to_string(b) + "," + format_double(h.edges[b]) +
           "," + format_double(h.edges[b + 1]) + "," + std::to_string(h.counts[b]) + "\n";
    }
  }
  return s;
}

inline std::string trajectories_csv(const std::vector<BiasTrajectory>& ts) {
  std::string s = "epoch,layer_id,n_l,filter_count\n";
  for (const auto& t : ts) {
    for (const auto& [e, n] : t.points) {
      s += std::to_string(e) + "," + std::to_string(t.layer_id) + "," + format_double(n) + "," +
           std::to_string(t.filter_count) + "\n";
    }
  }
  return s;
}

inline std::string trajectory_stats_csv(const std::vector<experiments::TrajectoryStats>& ts) {
  std::string s = "epoch,layer_id,mean_n_l,std_n_l\n";
  for (const auto& t : ts) {
    for (std::size_t i = 0; i < t.epochs.size(); ++i) {
      s += std::to_string(t.epochs[i]) + "," + std::to_string(t.layer_id) + "," +
           format_double(t.mean[i]) + "," + format_double(t.stddev[i]) + "\n";
    }
  }
  return s;
}

inline std::string metrics_csv(const nn::TrainResult& r) {
  std::string s = "epoch,lr,train_loss,train_accuracy,val_loss,val_accuracy\n";
  s += "0,," + format_double(r.initial_train.loss) + "," + format_double(r.initial_train.accuracy) +
       "," + format_double(r.initial_val.loss) + "," + format_double(r.initial_val.accuracy) + "\n";
  for (const auto& m : r.metrics) {
    s += std::to_string(m.epoch) + "," + format_double(m.lr) + "," + format_double(m.train_loss) + "," +
         format_double(m.train_accuracy) + "," + format_double(m.val_loss) + "," +
         format_double(m.val_accuracy) + "\n";
  }
  return s;
}

inline std::string heatmap_csv(const experiments::HeatmapGrid& g) {
  std::string s = "epoch,layer_id,drop\n";
  for (std::size_t r = 0; r < g.epochs.size(); ++r) {
    for (std::size_t c = 0; c < g.layer_ids.size(); ++c) {
      s += std::to_string(g.epochs[r]) + "," + std::to_string(g.layer_ids[c]) + "," +
           format_double(g.drop[r][c]) + "\n";
    }
  }
  return s;
}

// ---- JSON ----

inline nlohmann::json significance_json(const SignificanceReport& s) {
  return {{"n_l", s.n_l},
          {"filter_count", s.filter_count},
          {"negatives", s.negatives},
          {"null_mean", s.null_mean},
          {"p_two_sided", s.p_two_sided},
          {"alignment_probability", s.alignment_probability}};
}

inline nlohmann::json analysis_json(const std::vector<LayerAnalysis>& layers) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& l : layers) {
    arr.push_back({{"layer_id", l.layer_id},
                   {"name", l.name},
                   {"geometry", io::geometry_to_json(l.geometry)},
                   {"significance", significance_json(l.significance)},
                   {"histogram", {{"edges", l.histogram.edges}, {"counts", l.histogram.counts}}}});
  }
  return {{"layers", arr}};
}

inline nlohmann::json heatmap_json(const experiments::HeatmapGrid& g) {
  return {{"epochs", g.epochs},
          {"layer_ids", g.layer_ids},
          {"drop", g.drop},
          {"full_accuracy", g.full_accuracy},
          {"critical_layers", g.critical_layers()}};
}

inline nlohmann::json run_summary_json(const experiments::RunOutput& run) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& t : run.trajectories) {
    layers.push_back({{"layer_id", t.layer_id},
                      {"filter_count", t.filter_count},
                      {"initial_n_l", t.points.front().second},
                      {"final_n_l", t.points.back().second}});
  }
  const auto& last = run.train.metrics;
  return {{"run_id", run.config.run_id},
          {"epochs", run.config.epochs},
          {"initial_train_loss", run.train.initial_train.loss},
          {"final_train_loss", last.empty() ? run.train.initial_train.loss : last.back().train_loss},
          {"final_train_accuracy", last.empty() ? run.train.initial_train.accuracy : last.back().train_accuracy},
          {"final_val_accuracy", last.empty() ? run.train.initial_val.accuracy : last.back().val_accuracy},
          {"test_loss", run.test.loss},
          {"test_accuracy", run.test.accuracy},
          {"relative_loss_change", experiments::relative_loss_change(run.train)},
          {"layers", layers}};
}

inline nlohmann::json convergence_json(const experiments::ConvergenceReport& r) {
  return {{"initial_train_loss", r.initial_train_loss},
          {"train_loss", r.train_loss},
          {"val_loss", r.val_loss},
          {"relative_change", r.relative_change},
          {"converged", r.converged},
          {"max_deviation", r.max_deviation},
          {"flat", r.flat}};
}

// ---- SVG ----

namespace svg {

inline constexpr double kWidth = 480, kHeight = 320, kMargin = 40;

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string open(double w = kWidth, double h = kHeight) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" viewBox=\"0 0 " + num(w) + " " + num(h) + "\">\n"
         "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline std::string text(double x, double y, const std::string& s, const char* anchor = "middle") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"11\" "
         "text-anchor=\"" + anchor + "\">" + s + "</text>\n";
}

inline std::string axes(const std::string& title) {
  const double x0 = kMargin, y0 = kHeight - kMargin, x1 = kWidth - kMargin / 2, y1 = kMargin / 2;
  return "<path d=\"M" + num(x0) + " " + num(y1) + " V" + num(y0) + " H" + num(x1) +
         "\" stroke=\"black\" fill=\"none\"/>\n" + text(kWidth / 2, 14, title);
}

/// Blue (0) to red (max) ramp.
inline std::string color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(255 * t), 64,
                static_cast<int>(255 * (1 - t)));
  return buf;
}

}  // namespace svg

inline std::string histogram_svg(const LayerAnalysis& a) {
  const auto& h = a.histogram;
  std::string s = svg::open();
  s += svg::axes(a.name + " cosines (n_l = " + svg::num(a.significance.n_l) + ")");
  const double x0 = svg::kMargin, y0 = svg::kHeight - svg::kMargin;
  const double w = svg::kWidth - 1.5 * svg::kMargin, hgt = svg::kHeight - 1.5 * svg::kMargin;
  const std::size_t peak = std::max<std::size_t>(1, *std::max_element(h.counts.begin(), h.counts.end()));
  const double bw = w / static_cast<double>(h.counts.size());
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    const double bh = hgt * static_cast<double>(h.counts[b]) / static_cast<double>(peak);
    s += "<rect x=\"" + svg::num(x0 + b * bw) + "\" y=\"" + svg::num(y0 - bh) + "\" width=\"" +
         svg::num(bw) + "\" height=\"" + svg::num(bh) + "\" fill=\"steelblue\"/>\n";
  }
  s += svg::text(x0, y0 + 14, svg::num(h.edges.front()));
  s += svg::text(x0 + w, y0 + 14, svg::num(h.edges.back()));
  s += svg::text(x0 + w / 2, y0 + 14, "0");
  return s + "</svg>\n";
}

inline std::string trajectories_svg(const std::vector<BiasTrajectory>& ts, const std::string& title) {
  std::string s = svg::open();
  s += svg::axes(title);
  std::size_t last_epoch = 1;
  for (const auto& t : ts) {
    if (!t.points.empty()) last_epoch = std::max(last_epoch, t.points.back().first);
  }
  const double x0 = svg::kMargin, y0 = svg::kHeight - svg::kMargin;
  const double w = svg::kWidth - 1.5 * svg::kMargin, h = svg::kHeight - 1.5 * svg::kMargin;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    std::string d;
    for (const auto& [e, n] : ts[i].points) {
      d += (d.empty() ? "M" : " L") + svg::num(x0 + w * static_cast<double>(e) / static_cast<double>(last_epoch)) +
           " " + svg::num(y0 - h * n);
    }
    const double t = ts.size() > 1 ? static_cast<double>(i) / static_cast<double>(ts.size() - 1) : 0.0;
    s += "<path d=\"" + d + "\" stroke=\"" + svg::color(t) + "\" fill=\"none\"/>\n";
  }
  s += svg::text(x0 - 6, y0, "0", "end") + svg::text(x0 - 6, y0 - h, "1", "end");
  s += svg::text(x0 + w, y0 + 14, "epoch " + std::to_string(last_epoch));
  return s + "</svg>\n";
}

inline std::string heatmap_svg(const experiments::HeatmapGrid& g) {
  std::string s = svg::open();
  s += svg::axes("accuracy drop after reinit");
  const double x0 = svg::kMargin, y1 = svg::kMargin / 2;
  const double w = svg::kWidth - 1.5 * svg::kMargin, h = svg::kHeight - 1.5 * svg::kMargin;
  const double cw = w / static_cast<double>(std::max<std::size_t>(1, g.layer_ids.size()));
  const double ch = h / static_cast<double>(std::max<std::size_t>(1, g.epochs.size()));
  double peak = 0.0;
  for (const auto& row : g.drop) {
    for (const auto v : row) peak = std::max(peak, v);
  }
  for (std::size_t r = 0; r < g.epochs.size(); ++r) {
    for (std::size_t c = 0; c < g.layer_ids.size(); ++c) {
      const double t = peak > 0 ? g.drop[r][c] / peak : 0.0;
      s += "<rect x=\"" + svg::num(x0 + c * cw) + "\" y=\"" + svg::num(y1 + r * ch) + "\" width=\"" +
           svg::num(cw) + "\" height=\"" + svg::num(ch) + "\" fill=\"" + svg::color(t) + "\"/>\n";
    }
    s += svg::text(x0 - 4, y1 + (r + 0.6) * ch, std::to_string(g.epochs[r]), "end");
  }
  for (std::size_t c = 0; c < g.layer_ids.size(); ++c) {
    s += svg::text(x0 + (c + 0.5) * cw, svg::kHeight - svg::kMargin + 14, std::to_string(g.layer_ids[c]));
  }
  return s + "</svg>\n";
}

// ---- bundle ----

inline std::uint32_t crc32_of(std::string_view s) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

/// A set of named output files plus a manifest with their sizes and CRC-32s.
class ReportBundle {
 public:
  void add(const std::string& name, std::string content) { files_[name] = std::move(content); }
  const std::map<std::string, std::string>& files() const { return files_; }

  nlohmann::json manifest() const {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& [name, content] : files_) {
      char crc[9];
      std::snprintf(crc, sizeof crc, "%08x", crc32_of(content));
      files.push_back({{"name", name}, {"bytes", content.size()}, {"crc32", crc}});
    }
    return {{"files", files}};
  }

  /// Writes every file and `manifest.json` under `dir`.
  void write(const std::filesystem::path& dir) const {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
    for (const auto& [name, content] : files_) io::write_file(dir / name, content);
    io::write_file(dir / "manifest.json", manifest().dump(2) + "\n");
  }

 private:
  std::map<std::string, std::string> files_;
};

}  // namespace convarrange::report
