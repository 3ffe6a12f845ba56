// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Minimal ZIP container support: enough for NPZ archives. Reads stored and
// deflate entries (including the zip64 extra fields numpy emits); writes
// either, with a fixed timestamp so identical inputs give identical bytes.
#pragma once

#include <zlib.h>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "convarrange/error.hpp"

namespace convarrange::io {

struct ZipEntry {
  std::string name;
  std::vector<std::uint8_t> data;
};

enum class ZipMethod : std::uint16_t { Stored = 0, Deflate = 8 };

namespace detail {

inline std::uint64_t le(std::span<const std::uint8_t> b, std::size_t off, std::size_t width) {
  if (off + width > b.size()) fail(ErrorCode::BadZip, "record runs past end of archive");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) v |= std::uint64_t{b[off + i]} << (8 * i);
  return v;
}

inline void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, std::size_t width) {
  for (std::size_t i = 0; i < width; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t crc32_of(std::span<const std::uint8_t> data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < data.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(data.size() - off, 1u << 30));
    crc = ::crc32(crc, data.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

inline std::vector<std::uint8_t> inflate_raw(std::span<const std::uint8_t> in,
                                             std::size_t expected, const std::string& name) {
  std::vector<std::uint8_t> out(expected);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) fail(ErrorCode::BadZip, "inflateInit failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) {
    fail(ErrorCode::BadZip, name + ": corrupt deflate stream");
  }
  return out;
}

inline std::vector<std::uint8_t> deflate_raw(std::span<const std::uint8_t> in) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK) {
    fail(ErrorCode::BadZip, "deflateInit failed");
  }
  std::vector<std::uint8_t> out(deflateBound(&zs, static_cast<uLong>(in.size())));
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  out.resize(zs.total_out);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) fail(ErrorCode::BadZip, "deflate failed");
  return out;
}

}  // namespace detail

inline std::vector<ZipEntry> read_zip(std::span<const std::uint8_t> b) {
  using detail::le;
  constexpr std::uint32_t kEocd = 0x06054b50;
  if (b.size() < 22) fail(ErrorCode::BadZip, "archive shorter than end-of-directory record");

  std::size_t eocd = std::string::npos;
  const std::size_t lowest = b.size() >= 22 + 0xFFFF ? b.size() - 22 - 0xFFFF : 0;
  for (std::size_t pos = b.size() - 22 + 1; pos-- > lowest;) {
    if (le(b, pos, 4) == kEocd) {
      eocd = pos;
      break;
    }
  }
  if (eocd == std::string::npos) fail(ErrorCode::BadZip, "no end-of-central-directory record");

  std::uint64_t count = le(b, eocd + 10, 2);
  std::uint64_t cd_offset = le(b, eocd + 16, 4);
  if ((count == 0xFFFF || cd_offset == 0xFFFFFFFF) && eocd >= 20 &&
      le(b, eocd - 20, 4) == 0x07064b50) {
    const std::uint64_t z64 = le(b, eocd - 20 + 8, 8);
    if (le(b, z64, 4) != 0x06064b50) fail(ErrorCode::BadZip, "bad zip64 end record");
    count = le(b, z64 + 32, 8);
    cd_offset = le(b, z64 + 48, 8);
  }

  std::vector<ZipEntry> entries;
  std::size_t pos = cd_offset;
  for (std::uint64_t i = 0; i < count; ++i) {
    if (le(b, pos, 4) != 0x02014b50) fail(ErrorCode::BadZip, "bad central directory entry");
    const auto flags = le(b, pos + 8, 2);
    const auto method = le(b, pos + 10, 2);
    const auto crc = static_cast<std::uint32_t>(le(b, pos + 16, 4));
    std::uint64_t comp_size = le(b, pos + 20, 4);
    std::uint64_t size = le(b, pos + 24, 4);
    const auto name_len = le(b, pos + 28, 2);
    const auto extra_len = le(b, pos + 30, 2);
    const auto comment_len = le(b, pos + 32, 2);
    std::uint64_t local = le(b, pos + 42, 4);
    if (pos + 46 + name_len > b.size()) fail(ErrorCode::BadZip, "entry name past end");
    std::string name(reinterpret_cast<const char*>(b.data()) + pos + 46, name_len);

    // zip64 extra: present fields appear in a fixed order, only for saturated values.
    std::size_t ex = pos + 46 + name_len;
    const std::size_t ex_end = ex + extra_len;
    while (ex + 4 <= ex_end) {
      const auto id = le(b, ex, 2);
      const auto len = le(b, ex + 2, 2);
      if (id == 0x0001) {
        std::size_t f = ex + 4;
        if (size == 0xFFFFFFFF) { size = le(b, f, 8); f += 8; }
        if (comp_size == 0xFFFFFFFF) { comp_size = le(b, f, 8); f += 8; }
        if (local == 0xFFFFFFFF) { local = le(b, f, 8); }
      }
      ex += 4 + len;
    }
    if (flags & 0x1) fail(ErrorCode::BadZip, name + ": encrypted entries are not supported");

    if (le(b, local, 4) != 0x04034b50) fail(ErrorCode::BadZip, name + ": bad local header");
    const std::size_t data_off = local + 30 + le(b, local + 26, 2) + le(b, local + 28, 2);
    if (data_off + comp_size > b.size()) fail(ErrorCode::BadZip, name + ": data past end");
    auto raw = b.subspan(data_off, comp_size);

    ZipEntry entry{name, {}};
    if (method == static_cast<std::uint16_t>(ZipMethod::Stored)) {
      if (comp_size != size) fail(ErrorCode::BadZip, name + ": stored size mismatch");
      entry.data.assign(raw.begin(), raw.end());
    } else if (method == static_cast<std::uint16_t>(ZipMethod::Deflate)) {
      entry.data = detail::inflate_raw(raw, size, name);
    } else {
      fail(ErrorCode::BadZip, name + ": unsupported compression method " + std::to_string(method));
    }
    if (detail::crc32_of(entry.data) != crc) fail(ErrorCode::BadZip, name + ": CRC mismatch");
    entries.push_back(std::move(entry));
    pos += 46 + name_len + extra_len + comment_len;
  }
  return entries;
}

inline std::vector<std::uint8_t> write_zip(std::span<const ZipEntry> entries,
                                           ZipMethod method = ZipMethod::Stored) {
  using detail::put_le;
  constexpr std::uint16_t kDosTime = 0;
  constexpr std::uint16_t kDosDate = (0 << 9) | (1 << 5) | 1;  // 1980-01-01
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> central;
  for (const auto& e : entries) {
    const std::uint32_t crc = detail::crc32_of(e.data);
    const auto payload =
        method == ZipMethod::Deflate ? detail::deflate_raw(e.data) : e.data;
    if (payload.size() >= 0xFFFFFFFFu || e.data.size() >= 0xFFFFFFFFu ||
        out.size() >= 0xFFFFFFFFu) {
      fail(ErrorCode::BadZip, e.name + ": entry too large for a non-zip64 archive");
    }
    const auto local_offset = out.size();
    put_le(out, 0x04034b50, 4);
    put_le(out, 20, 2);
    put_le(out, 0, 2);
    put_le(out, static_cast<std::uint16_t>(method), 2);
    put_le(out, kDosTime, 2);
    put_le(out, kDosDate, 2);
    put_le(out, crc, 4);
    put_le(out, payload.size(), 4);
    put_le(out, e.data.size(), 4);
    put_le(out, e.name.size(), 2);
    put_le(out, 0, 2);
    out.insert(out.end(), e.name.begin(), e.name.end());
    out.insert(out.end(), payload.begin(), payload.end());

    put_le(central, 0x02014b50, 4);
    put_le(central, 20, 2);
    put_le(central, 20, 2);
    put_le(central, 0, 2);
    put_le(central, static_cast<std::uint16_t>(method), 2);
    put_le(central, kDosTime, 2);
    put_le(central, kDosDate, 2);
    put_le(central, crc, 4);
    put_le(central, payload.size(), 4);
    put_le(central, e.data.size(), 4);
    put_le(central, e.name.size(), 2);
    put_le(central, 0, 2);  // extra
    put_le(central, 0, 2);  // comment
    put_le(central, 0, 2);  // disk
    put_le(central, 0, 2);  // internal attrs
    put_le(central, 0, 4);  // external attrs
    put_le(central, local_offset, 4);
    central.insert(central.end(), e.name.begin(), e.name.end());
  }
  const auto cd_offset = out.size();
  out.insert(out.end(), central.begin(), central.end());
  put_le(out, 0x06054b50, 4);
  put_le(out, 0, 2);
  put_le(out, 0, 2);
  put_le(out, entries.size(), 2);
  put_le(out, entries.size(), 2);
  put_le(out, central.size(), 4);
  put_le(out, cd_offset, 4);
  put_le(out, 0, 2);
  return out;
}

}  // namespace convarrange::io
