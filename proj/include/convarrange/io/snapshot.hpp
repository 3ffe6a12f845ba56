// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoints are an NPZ archive (records convN.weight / convN.bias /
// fcN.weight / fcN.bias, float32) plus a JSON manifest describing the layer
// order and conv input geometry. A SnapshotStore keeps one checkpoint per
// epoch, epoch 0 being the initialization.
#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "convarrange/io/npz.hpp"
#include "convarrange/weights.hpp"

namespace convarrange::io {

struct ManifestLayer {
  std::size_t id = 0;
  ParamKind kind = ParamKind::Conv;
  std::string weight_record;
  std::string bias_record;
  std::optional<ConvGeometry> geometry;  // absent for dense layers

  bool operator==(const ManifestLayer&) const = default;
};

struct CheckpointManifest {
  std::string run_id;
  std::size_t epoch = 0;
  Normalization normalization = Normalization::SignedUnit;
  std::string archive;  // file name of the NPZ next to the manifest
  std::vector<ManifestLayer> layers;

  bool operator==(const CheckpointManifest&) const = default;
};

inline nlohmann::json geometry_to_json(const ConvGeometry& g) {
  return {{"in_channels", g.in_channels}, {"in_height", g.in_height},
          {"in_width", g.in_width},       {"kernel", g.kernel},
          {"stride", g.stride},           {"padding", g.padding},
          {"padding_mode", to_string(g.padding_mode)}};
}

inline ConvGeometry geometry_from_json(const nlohmann::json& j) {
  ConvGeometry g;
  g.in_channels = j.at("in_channels").get<std::size_t>();
  g.in_height = j.at("in_height").get<std::size_t>();
  g.in_width = j.at("in_width").get<std::size_t>();
  g.kernel = j.at("kernel").get<std::size_t>();
  g.stride = j.value("stride", std::size_t{1});
  g.padding = j.value("padding", std::size_t{0});
  g.padding_mode = padding_mode_from_string(j.value("padding_mode", std::string("zero")));
  return g;
}

inline nlohmann::json manifest_to_json(const CheckpointManifest& m) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : m.layers) {
    nlohmann::json e = {{"id", l.id},
                        {"kind", l.kind == ParamKind::Conv ? "conv" : "dense"},
                        {"weight", l.weight_record},
                        {"bias", l.bias_record}};
    if (l.geometry) e["geometry"] = geometry_to_json(*l.geometry);
    layers.push_back(std::move(e));
  }
  nlohmann::json j = {{"run_id", m.run_id},
                      {"epoch", m.epoch},
                      {"normalization", to_string(m.normalization)},
                      {"layers", std::move(layers)}};
  if (!m.archive.empty()) j["archive"] = m.archive;
  return j;
}

/// Parses and validates a manifest: layer ids must run 1, 2, 3, ...
inline CheckpointManifest manifest_from_json(const nlohmann::json& j) {
  try {
    CheckpointManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.epoch = j.at("epoch").get<std::size_t>();
    m.normalization = normalization_from_string(j.value("normalization", std::string("signed_unit")));
    m.archive = j.value("archive", std::string());
    std::size_t expected = 1;
    for (const auto& e : j.at("layers")) {
      ManifestLayer l;
      l.id = e.at("id").get<std::size_t>();
      if (l.id != expected++) {
        fail(ErrorCode::CorruptManifest, "layer ids must be consecutive from 1");
      }
      const auto kind = e.value("kind", std::string("conv"));
      if (kind == "conv") {
        l.kind = ParamKind::Conv;
      } else if (kind == "dense") {
        l.kind = ParamKind::Dense;
      } else {
        fail(ErrorCode::CorruptManifest, "unknown layer kind '" + kind + "'");
      }
      l.weight_record = e.at("weight").get<std::string>();
      l.bias_record = e.at("bias").get<std::string>();
      if (e.contains("geometry")) l.geometry = geometry_from_json(e.at("geometry"));
      if (l.kind == ParamKind::Conv && !l.geometry) {
        fail(ErrorCode::CorruptManifest, "conv layer " + std::to_string(l.id) + " lacks geometry");
      }
      m.layers.push_back(std::move(l));
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptManifest, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptManifest) throw;
    fail(ErrorCode::CorruptManifest, e.what());
  }
}

inline CheckpointManifest manifest_for(const ModelWeights& w, std::string run_id, std::size_t epoch,
                                       Normalization norm) {
  CheckpointManifest m{std::move(run_id), epoch, norm, {}, {}};
  for (const auto& l : w.layers) {
    ManifestLayer e{l.id, l.kind, l.name + ".weight", l.name + ".bias", std::nullopt};
    if (l.kind == ParamKind::Conv) e.geometry = l.geometry;
    m.layers.push_back(std::move(e));
  }
  return m;
}

inline Bytes encode_weights(const ModelWeights& w) {
  std::vector<TensorRecord> records;
  for (const auto& l : w.layers) {
    records.push_back(make_record(l.name + ".weight", l.weight));
    records.push_back(make_record(l.name + ".bias", l.bias));
  }
  return write_npz(records);
}

/// Resolves every manifest record in the archive. Float64 records are
/// narrowed to float32.
inline ModelWeights decode_weights(const CheckpointManifest& m, ByteView npz) {
  const auto records = read_npz(npz);
  auto find = [&](const std::string& name) -> const TensorRecord& {
    for (const auto& r : records) {
      if (r.name == name) return r;
    }
    fail(ErrorCode::CorruptManifest, "record '" + name + "' not found in archive");
  };
  ModelWeights w;
  for (const auto& l : m.layers) {
    LayerParams p;
    p.id = l.id;
    p.kind = l.kind;
    const auto dot = l.weight_record.rfind('.');
    p.name = dot == std::string::npos ? l.weight_record : l.weight_record.substr(0, dot);
    if (l.geometry) p.geometry = *l.geometry;
    p.weight = find(l.weight_record).as_tensor<float>();
    p.bias = find(l.bias_record).as_tensor<float>();
    if (l.kind == ParamKind::Conv) {
      const auto& s = p.weight.shape;
      if (s.size() != 4 || s[1] != p.geometry.in_channels || s[2] != p.geometry.kernel ||
          s[3] != p.geometry.kernel || p.bias.size() != s[0]) {
        fail(ErrorCode::CorruptManifest, p.name + ": weight " + shape_string(s) +
                                             " inconsistent with geometry " +
                                             p.geometry.describe());
      }
    }
    w.layers.push_back(std::move(p));
  }
  return w;
}

/// Reads a checkpoint given its NPZ and manifest paths.
inline ModelWeights read_checkpoint(const std::filesystem::path& npz,
                                    const std::filesystem::path& manifest) {
  const auto text = read_file(manifest);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::CorruptManifest, manifest.string() + ": " + e.what());
  }
  return decode_weights(manifest_from_json(j), read_file(npz));
}

/// Epoch-indexed checkpoints. Without a root directory the store lives in
/// memory; with one, every save writes epoch_NNNN.npz + epoch_NNNN.json.
/// Const member functions may be called concurrently; save() is single-writer.
class SnapshotStore {
 public:
  SnapshotStore() = default;
  SnapshotStore(std::filesystem::path root, std::string run_id)
      : root_(std::move(root)), run_id_(std::move(run_id)) {
    std::filesystem::create_directories(*root_);
  }

  /// Opens an existing directory-backed store by scanning its manifests.
  static SnapshotStore open(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root)) {
      fail(ErrorCode::MissingEpoch, "no snapshot directory at " + root.string());
    }
    SnapshotStore store;
    store.root_ = root;
    for (const auto& entry : std::filesystem::directory_iterator(root)) {
      const auto name = entry.path().filename().string();
      if (name.rfind("epoch_", 0) != 0 || entry.path().extension() != ".json") continue;
      const auto text = read_file(entry.path());
      CheckpointManifest m;
      try {
        m = manifest_from_json(nlohmann::json::parse(text.begin(), text.end()));
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::CorruptManifest, entry.path().string() + ": " + e.what());
      }
      store.run_id_ = m.run_id;
      store.entries_[m.epoch] = Entry{std::move(m), std::nullopt};
    }
    return store;
  }

  const std::string& run_id() const { return run_id_; }
  void set_run_id(std::string id) { run_id_ = std::move(id); }
  const std::optional<std::filesystem::path>& root() const { return root_; }

  CheckpointManifest save(std::size_t epoch, const ModelWeights& weights,
                          Normalization norm = Normalization::SignedUnit) {
    auto manifest = manifest_for(weights, run_id_, epoch, norm);
    manifest.archive = file_stem(epoch) + ".npz";
    if (root_) {
      write_file(*root_ / manifest.archive, encode_weights(weights));
      write_file(*root_ / (file_stem(epoch) + ".json"), manifest_to_json(manifest).dump(2) + "\n");
    }
    entries_[epoch] = Entry{manifest, weights};
    return manifest;
  }

  ModelWeights load(std::size_t epoch) const {
    const auto& e = entry(epoch);
    if (e.weights) return *e.weights;
    return decode_weights(e.manifest, read_file(*root_ / e.manifest.archive));
  }

  const CheckpointManifest& manifest(std::size_t epoch) const { return entry(epoch).manifest; }

  bool contains(std::size_t epoch) const { return entries_.count(epoch) != 0; }

  std::vector<std::size_t> epochs() const {
    std::vector<std::size_t> out;
    for (const auto& [epoch, _] : entries_) out.push_back(epoch);
    return out;
  }

 private:
  struct Entry {
    CheckpointManifest manifest;
    std::optional<ModelWeights> weights;
  };

  const Entry& entry(std::size_t epoch) const {
    const auto it = entries_.find(epoch);
    if (it == entries_.end()) fail(ErrorCode::MissingEpoch, "epoch " + std::to_string(epoch));
    return it->second;
  }

  static std::string file_stem(std::size_t epoch) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "epoch_%04zu", epoch);
    return buf;
  }

  std::optional<std::filesystem::path> root_;
  std::string run_id_ = "run";
  std::map<std::size_t, Entry> entries_;
};

}  // namespace convarrange::io
