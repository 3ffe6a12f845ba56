// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
//
// NPY array files (format versions 1.0 and 2.0), little-endian float32 and
// float64 only. Output is byte-identical to what numpy.save produces for the
// same array.
#pragma once

#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "convarrange/error.hpp"
#include "convarrange/tensor.hpp"

namespace convarrange::io {

static_assert(std::endian::native == std::endian::little,
              "array archives are read and written assuming a little-endian host");

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

enum class DType { Float32, Float64 };

inline const char* dtype_descr(DType d) { return d == DType::Float32 ? "<f4" : "<f8"; }

struct TensorRecord {
  std::string name;
  Shape shape;
  std::variant<std::vector<float>, std::vector<double>> data;

  DType dtype() const { return data.index() == 0 ? DType::Float32 : DType::Float64; }
  std::size_t size() const {
    return std::visit([](const auto& v) { return v.size(); }, data);
  }

  template <class T>
  Tensor<T> as_tensor() const {
    return std::visit(
        [&](const auto& v) {
          return Tensor<T>(shape, std::vector<T>(v.begin(), v.end()));
        },
        data);
  }

  /// Bit-exact comparison (NaN payloads included).
  bool operator==(const TensorRecord& other) const {
    if (name != other.name || shape != other.shape || data.index() != other.data.index()) {
      return false;
    }
    return std::visit(
        [&](const auto& v) {
          const auto& w = std::get<std::decay_t<decltype(v)>>(other.data);
          return v.size() == w.size() &&
                 (v.empty() || std::memcmp(v.data(), w.data(), v.size() * sizeof(v[0])) == 0);
        },
        data);
  }
};

template <class T>
TensorRecord make_record(std::string name, const Tensor<T>& t) {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return TensorRecord{std::move(name), t.shape, t.data};
}

inline constexpr std::uint8_t kNpyMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};

namespace detail {

/// Parser for the restricted Python dict literal found in NPY headers.
class HeaderParser {
 public:
  explicit HeaderParser(std::string_view text) : s_(text) {}

  struct Header {
    std::string descr;
    bool fortran_order = false;
    Shape shape;
  };

  Header parse() {
    Header h;
    bool have_descr = false, have_order = false, have_shape = false;
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      const std::string key = parse_string();
      expect(':');
      if (key == "descr") {
        h.descr = parse_string();
        have_descr = true;
      } else if (key == "fortran_order") {
        h.fortran_order = parse_bool();
        have_order = true;
      } else if (key == "shape") {
        h.shape = parse_tuple();
        have_shape = true;
      } else {
        error("unexpected key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != '}') {
        error("expected ',' or '}'");
      }
    }
    if (!have_descr || !have_order || !have_shape) error("missing required key");
    skip_ws();
    if (pos_ != s_.size()) error("trailing characters after dict");
    return h;
  }

 private:
  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::HeaderParse, what + " at offset " + std::to_string(pos_));
  }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  void expect(char c) {
    skip_ws();
    if (peek() != c) error(std::string("expected '") + c + "'");
    ++pos_;
  }
  std::string parse_string() {
    skip_ws();
    const char quote = peek();
    if (quote != '\'' && quote != '"') error("expected string literal");
    const auto end = s_.find(quote, pos_ + 1);
    if (end == std::string_view::npos) error("unterminated string");
    std::string out(s_.substr(pos_ + 1, end - pos_ - 1));
    pos_ = end + 1;
    return out;
  }
  bool parse_bool() {
    skip_ws();
    if (s_.substr(pos_, 4) == "True") {
      pos_ += 4;
      return true;
    }
    if (s_.substr(pos_, 5) == "False") {
      pos_ += 5;
      return false;
    }
    error("expected True or False");
  }
  Shape parse_tuple() {
    expect('(');
    Shape shape;
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        return shape;
      }
      if (!std::isdigit(static_cast<unsigned char>(peek()))) error("expected extent");
      std::size_t v = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        v = v * 10 + static_cast<std::size_t>(peek() - '0');
        ++pos_;
      }
      shape.push_back(v);
      skip_ws();
      if (peek() == ',') {
        ++pos_;
      } else if (peek() != ')') {
        error("expected ',' or ')' in shape");
      }
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

inline std::uint32_t read_le(ByteView b, std::size_t offset, std::size_t width) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < width; ++i) v |= std::uint32_t{b[offset + i]} << (8 * i);
  return v;
}

}  // namespace detail

/// Parses one NPY document. `name` is attached to the record verbatim.
inline TensorRecord read_npy(ByteView bytes, std::string name = "array") {
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kNpyMagic, 6) != 0) {
    fail(ErrorCode::BadMagic, "not an NPY document");
  }
  const std::uint8_t major = bytes[6];
  const std::uint8_t minor = bytes[7];
  std::size_t len_width = 0;
  if (major == 1 && minor == 0) {
    len_width = 2;
  } else if (major == 2 && minor == 0) {
    len_width = 4;
  } else {
    fail(ErrorCode::HeaderParse, "unsupported NPY version " + std::to_string(major) + "." +
                                     std::to_string(minor));
  }
  if (bytes.size() < 8 + len_width) fail(ErrorCode::TruncatedPayload, "header length cut off");
  const std::size_t header_len = detail::read_le(bytes, 8, len_width);
  const std::size_t data_start = 8 + len_width + header_len;
  if (bytes.size() < data_start) fail(ErrorCode::TruncatedPayload, "header cut off");

  std::string_view text(reinterpret_cast<const char*>(bytes.data()) + 8 + len_width,
                        header_len);
  const auto header = detail::HeaderParser(text).parse();

  if (header.descr == ">f4" || header.descr == ">f8") {
    fail(ErrorCode::UnsupportedDtype, "big-endian dtype " + header.descr);
  }
  if (header.descr != "<f4" && header.descr != "<f8") {
    fail(ErrorCode::UnsupportedDtype, "dtype " + header.descr);
  }
  if (header.fortran_order) fail(ErrorCode::HeaderParse, "Fortran-order arrays are not supported");

  const std::size_t count = element_count(header.shape);
  const std::size_t width = header.descr == "<f4" ? 4 : 8;
  if (bytes.size() - data_start < count * width) {
    fail(ErrorCode::TruncatedPayload, "expected " + std::to_string(count * width) +
                                          " data bytes, have " +
                                          std::to_string(bytes.size() - data_start));
  }

  TensorRecord rec{std::move(name), header.shape, {}};
  if (width == 4) {
    std::vector<float> v(count);
    if (count) std::memcpy(v.data(), bytes.data() + data_start, count * 4);
    rec.data = std::move(v);
  } else {
    std::vector<double> v(count);
    if (count) std::memcpy(v.data(), bytes.data() + data_start, count * 8);
    rec.data = std::move(v);
  }
  return rec;
}

inline Bytes write_npy(const TensorRecord& rec) {
  const std::size_t count = rec.size();
  if (count != element_count(rec.shape)) {
    fail(ErrorCode::ShapeMismatch, rec.name + ": shape " + shape_string(rec.shape) +
                                       " vs " + std::to_string(count) + " values");
  }
  // Same dict text, growth padding and 64-byte alignment as numpy.
  std::string shape_repr = "(";
  for (std::size_t i = 0; i < rec.shape.size(); ++i) {
    if (i) shape_repr += ", ";
    shape_repr += std::to_string(rec.shape[i]);
  }
  if (rec.shape.size() == 1) shape_repr += ",";
  shape_repr += ")";

  std::string header = std::string("{'descr': '") + dtype_descr(rec.dtype()) +
                       "', 'fortran_order': False, 'shape': " + shape_repr + ", }";
  constexpr std::size_t kGrowthDigits = 21;
  if (!rec.shape.empty()) {
    header.append(kGrowthDigits - std::to_string(rec.shape[0]).size(), ' ');
  }
  std::size_t len_width = 2;
  std::uint8_t major = 1;
  auto padded_len = [&](std::size_t width) {
    const std::size_t unpadded = 6 + 2 + width + header.size() + 1;
    return header.size() + 1 + (64 - unpadded % 64) % 64;
  };
  std::size_t header_len = padded_len(2);
  if (header_len > 0xFFFF) {
    len_width = 4;
    major = 2;
    header_len = padded_len(4);
  }
  header.append(header_len - header.size() - 1, ' ');
  header.push_back('\n');

  Bytes out;
  const std::size_t width = rec.dtype() == DType::Float32 ? 4 : 8;
  out.reserve(8 + len_width + header.size() + count * width);
  out.insert(out.end(), kNpyMagic, kNpyMagic + 6);
  out.push_back(major);
  out.push_back(0);
  for (std::size_t i = 0; i < len_width; ++i) {
    out.push_back(static_cast<std::uint8_t>((header_len >> (8 * i)) & 0xFF));
  }
  out.insert(out.end(), header.begin(), header.end());
  std::visit(
      [&](const auto& v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
        out.insert(out.end(), p, p + v.size() * sizeof(v[0]));
      },
      rec.data);
  return out;
}

}  // namespace convarrange::io
