// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
//
// convarrange: analyze checkpoints, train and track runs, build reinit
// heatmaps and run the self-checks.
//
// Exit codes: 0 ok, 1 usage, 2 data or format error, 3 verification failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "convarrange/config.hpp"
#include "convarrange/experiments.hpp"
#include "convarrange/report.hpp"
#include "convarrange/verify.hpp"

namespace fs = std::filesystem;
using namespace convarrange;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitVerify = 3;

struct Common {
  std::string out;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::size_t> layers;
  std::size_t bins = 40;
  std::vector<std::string> formats{"csv", "json"};

  bool wants(const std::string& f) const {
    return std::find(formats.begin(), formats.end(), f) != formats.end();
  }
};

experiments::RunConfig load_config(const Common& c) {
  nlohmann::json j = nlohmann::json::object();
  if (!c.config.empty()) {
    const auto bytes = io::read_file(c.config);
    j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::InvalidConfig, c.config + " is not valid JSON");
  }
  if (c.seed) j["seed"] = *c.seed;
  return experiments::config_from_json(j);
}

std::string layer_stem(const report::LayerAnalysis& a) { return "layer" + std::to_string(a.layer_id); }

int cmd_analyze(const Common& c, const std::string& checkpoint) {
  auto manifest_path = c.config;
  if (manifest_path.empty()) manifest_path = fs::path(checkpoint).replace_extension(".json").string();
  const auto weights = io::read_checkpoint(checkpoint, manifest_path);
  const auto layers = report::analyze(weights, c.layers, c.bins);
  report::ReportBundle bundle;
  if (c.wants("csv")) {
    bundle.add("cosines.csv", report::cosines_csv(layers));
    bundle.add("histograms.csv", report::histogram_csv(layers));
  }
  if (c.wants("json")) bundle.add("layers.json", report::analysis_json(layers).dump(2) + "\n");
  if (c.wants("svg")) {
    for (const auto& l : layers) bundle.add(layer_stem(l) + "_hist.svg", report::histogram_svg(l));
  }
  for (const auto& l : layers) {
    const auto& s = l.significance;
    std::printf("%-8s F=%-4zu n_l=%.4f p=%.3e\n", l.name.c_str(), s.filter_count, s.n_l, s.p_two_sided);
  }
  bundle.write(c.out.empty() ? "analysis" : c.out);
  return kExitOk;
}

void add_run_files(report::ReportBundle& bundle, const experiments::RunOutput& run, const Common& c,
                   const std::string& prefix = "") {
  if (c.wants("csv")) {
    bundle.add(prefix + "metrics.csv", report::metrics_csv(run.train));
    bundle.add(prefix + "trajectories.csv", report::trajectories_csv(run.trajectories));
  }
  if (c.wants("json")) bundle.add(prefix + "summary.json", report::run_summary_json(run).dump(2) + "\n");
  if (c.wants("svg")) {
    bundle.add(prefix + "trajectories.svg", report::trajectories_svg(run.trajectories, run.config.run_id));
  }
}

int cmd_train(const Common& c) {
  const auto cfg = load_config(c);
  const fs::path out = c.out.empty() ? fs::path(cfg.run_id) : fs::path(c.out);
  io::write_file(out / "config.json", experiments::config_to_json(cfg).dump(2) + "\n");
  const auto run = experiments::run_bias_tracking(cfg, io::SnapshotStore(out / "snapshots", cfg.run_id));
  report::ReportBundle bundle;
  add_run_files(bundle, run, c);
  bundle.write(out);
  const auto& last = run.train.metrics;
  std::printf("%s: %zu epochs, train acc %.4f, test acc %.4f\n", cfg.run_id.c_str(), last.size(),
              last.empty() ? run.train.initial_train.accuracy : last.back().train_accuracy,
              run.test.accuracy);
  for (const auto& t : run.trajectories) {
    std::printf("  layer %zu F=%zu n_l %.4f -> %.4f\n", t.layer_id, t.filter_count, t.points.front().second,
                t.points.back().second);
  }
  return kExitOk;
}

int cmd_track(const Common& c, std::size_t seeds) {
  const auto cfg = load_config(c);
  std::vector<std::uint64_t> list;
  for (std::size_t i = 0; i < seeds; ++i) list.push_back(cfg.seed + i);
  const auto runs = experiments::run_bias_tracking_multi(cfg, list);
  const auto stats = experiments::aggregate(runs);
  report::ReportBundle bundle;
  for (const auto& run : runs) add_run_files(bundle, run, c, "seed" + std::to_string(run.config.seed) + "_");
  if (c.wants("csv")) bundle.add("trajectory_stats.csv", report::trajectory_stats_csv(stats));
  bundle.write(c.out.empty() ? fs::path(cfg.run_id + "-track") : fs::path(c.out));
  for (const auto& s : stats) {
    std::printf("layer %zu final n_l %.4f +- %.4f\n", s.layer_id, s.mean.back(), s.stddev.back());
  }
  return kExitOk;
}

int cmd_reinit(const Common& c, const fs::path& run_dir, std::vector<std::size_t> epochs) {
  const auto bytes = io::read_file(run_dir / "config.json");
  const auto j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
  if (j.is_discarded()) fail(ErrorCode::InvalidConfig, "config.json is not valid JSON");
  const auto cfg = experiments::config_from_json(j);
  const auto store = io::SnapshotStore::open(run_dir / "snapshots");
  const auto stored = store.epochs();
  if (stored.empty()) fail(ErrorCode::MissingEpoch, "no snapshots under " + (run_dir / "snapshots").string());
  if (epochs.empty()) epochs = experiments::default_reinit_epochs(store);

  const auto data = experiments::prepare_data(cfg);
  auto model = nn::Model<float>::build(experiments::resolved_spec(cfg, data.train));
  model.import_weights(store.load(stored.back()));
  const auto grid = experiments::run_reinit(model, store, data.test, c.layers, epochs);

  report::ReportBundle bundle;
  if (c.wants("csv")) bundle.add("heatmap.csv", report::heatmap_csv(grid));
  if (c.wants("json")) bundle.add("heatmap.json", report::heatmap_json(grid).dump(2) + "\n");
  if (c.wants("svg")) bundle.add("heatmap.svg", report::heatmap_svg(grid));
  bundle.write(c.out.empty() ? run_dir / "reinit" : fs::path(c.out));
  std::printf("full accuracy %.4f\n", grid.full_accuracy);
  for (std::size_t r = 0; r < grid.epochs.size(); ++r) {
    std::printf("epoch %4zu:", grid.epochs[r]);
    for (const double d : grid.drop[r]) std::printf(" %+.4f", d);
    std::printf("\n");
  }
  return kExitOk;
}

int cmd_verify() {
  bool all = true;
  for (const auto& r : verify::run_all()) {
    std::printf("%-14s %s  %s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.detail.c_str());
    all = all && r.passed;
  }
  return all ? kExitOk : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Filter projection statistics for convolutional networks"};
  app.require_subcommand(1);
  Common c;
  const std::set<std::string> kFormats{"csv", "json", "svg"};
  auto common = [&](CLI::App* sub, bool with_config = true) {
    sub->add_option("--out", c.out, "Output directory");
    if (with_config) sub->add_option("--config", c.config, "Run config or geometry manifest (JSON)");
    sub->add_option("--seed", c.seed, "Override the run seed");
    sub->add_option("--layers", c.layers, "Layer ids (default: all conv layers)")->delimiter(',');
    sub->add_option("--bins", c.bins, "Histogram bins")->check(CLI::PositiveNumber);
    sub->add_option("--format", c.formats, "Output formats")->delimiter(',')->check(CLI::IsMember(kFormats));
  };

  std::string checkpoint;
  auto* analyze = app.add_subcommand("analyze", "Per-layer cosines, n_l and significance of a checkpoint");
  common(analyze);
  analyze->add_option("checkpoint", checkpoint, "Checkpoint .npz")->required();

  auto* train = app.add_subcommand("train", "Train one run and store its snapshots");
  common(train);

  std::size_t seeds = 3;
  auto* track = app.add_subcommand("track", "n_l trajectories over several seeds");
  common(track);
  track->add_option("--seeds", seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);

  std::string run_dir;
  std::vector<std::size_t> epochs;
  auto* reinit = app.add_subcommand("reinit", "Reinitialization heatmap of a trained run");
  common(reinit, false);
  reinit->add_option("run_dir", run_dir, "Directory written by `train`")->required();
  reinit->add_option("--epochs", epochs, "Snapshot epochs (default 0,1,2,5,10,final)")->delimiter(',');

  auto* verify_cmd = app.add_subcommand("verify", "Run the built-in consistency checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*analyze) return cmd_analyze(c, checkpoint);
    if (*train) return cmd_train(c);
    if (*track) return cmd_track(c, seeds);
    if (*reinit) return cmd_reinit(c, run_dir, epochs);
    if (*verify_cmd) return cmd_verify();
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(to_string(e.code())).c_str(), e.message().c_str());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
