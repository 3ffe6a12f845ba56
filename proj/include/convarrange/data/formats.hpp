// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
//
// IDX (MNIST-style) and CIFAR binary loaders.
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "convarrange/data/dataset.hpp"
#include "convarrange/io/npz.hpp"

namespace convarrange::data {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {
inline std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
  if (off + 4 > b.size()) fail(ErrorCode::Truncated, "IDX header cut off");
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}
}  // namespace detail

/// Parses an IDX image file and its label file into an N x 1 x H x W dataset.
inline Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                         Normalization mode, std::size_t class_count = 10) {
  if (detail::read_be32(images, 0) != kIdxImagesMagic) {
    fail(ErrorCode::BadMagic, "IDX image magic");
  }
  if (detail::read_be32(labels, 0) != kIdxLabelsMagic) {
    fail(ErrorCode::BadMagic, "IDX label magic");
  }
  const std::size_t n = detail::read_be32(images, 4);
  const std::size_t h = detail::read_be32(images, 8);
  const std::size_t w = detail::read_be32(images, 12);
  const std::size_t n_labels = detail::read_be32(labels, 4);
  if (n != n_labels) {
    fail(ErrorCode::DimMismatch, std::to_string(n) + " images vs " + std::to_string(n_labels) +
                                     " labels");
  }
  if (images.size() < 16 + n * h * w) fail(ErrorCode::Truncated, "IDX image payload");
  if (labels.size() < 8 + n) fail(ErrorCode::Truncated, "IDX label payload");

  Dataset d;
  d.class_count = class_count;
  d.normalization = mode;
  d.images = Tensor<float>({n, 1, h, w});
  for (std::size_t i = 0; i < n * h * w; ++i) d.images[i] = normalize_pixel(images[16 + i], mode);
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.labels[i] = labels[8 + i];
    if (static_cast<std::size_t>(d.labels[i]) >= class_count) {
      fail(ErrorCode::LabelOutOfRange, "label " + std::to_string(d.labels[i]));
    }
  }
  return d;
}

inline Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        Normalization mode, std::size_t class_count = 10) {
  return parse_idx(io::read_file(images), io::read_file(labels), mode, class_count);
}

inline constexpr std::size_t kCifarRecord = 1 + 3 * 32 * 32;

/// CIFAR-10 binary batch: records of 1 label byte + 3072 channel-major bytes.
inline Dataset parse_cifar_binary(std::span<const std::uint8_t> bytes, Normalization mode,
                                  std::size_t class_count = 10) {
  if (bytes.size() % kCifarRecord != 0) {
    fail(ErrorCode::Truncated, std::to_string(bytes.size()) + " bytes is not a whole number of records");
  }
  const std::size_t n = bytes.size() / kCifarRecord;
  Dataset d;
  d.class_count = class_count;
  d.normalization = mode;
  d.images = Tensor<float>({n, 3, 32, 32});
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* rec = bytes.data() + i * kCifarRecord;
    if (rec[0] >= class_count) {
      fail(ErrorCode::LabelOutOfRange, "record " + std::to_string(i) + " label " +
                                           std::to_string(rec[0]));
    }
    d.labels[i] = rec[0];
    for (std::size_t j = 0; j < kCifarRecord - 1; ++j) {
      d.images[i * (kCifarRecord - 1) + j] = normalize_pixel(rec[1 + j], mode);
    }
  }
  return d;
}

inline Dataset load_cifar_binary(const std::filesystem::path& path, Normalization mode,
                                 std::size_t class_count = 10) {
  return parse_cifar_binary(io::read_file(path), mode, class_count);
}

}  // namespace convarrange::data
