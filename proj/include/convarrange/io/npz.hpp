// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "convarrange/io/npy.hpp"
#include "convarrange/io/zip.hpp"

namespace convarrange::io {

/// One record per ZIP entry, in archive order. Entry names lose a trailing
/// ".npy"; errors from individual entries carry the entry name.
inline std::vector<TensorRecord> read_npz(ByteView bytes) {
  std::vector<TensorRecord> records;
  for (auto& entry : read_zip(bytes)) {
    std::string name = entry.name;
    if (name.size() > 4 && name.compare(name.size() - 4, 4, ".npy") == 0) {
      name.resize(name.size() - 4);
    }
    try {
      records.push_back(read_npy(entry.data, name));
    } catch (const Error& e) {
      throw Error(e.code(), "entry '" + entry.name + "': " + e.message());
    }
  }
  return records;
}

inline Bytes write_npz(std::span<const TensorRecord> records,
                       ZipMethod method = ZipMethod::Stored) {
  std::vector<ZipEntry> entries;
  entries.reserve(records.size());
  for (const auto& r : records) entries.push_back({r.name + ".npy", write_npy(r)});
  return write_zip(entries, method);
}

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, ByteView bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

inline void write_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace convarrange::io
