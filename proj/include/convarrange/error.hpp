// Copyright 2026 The convarrange Authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace convarrange {

enum class ErrorCode {
  // checkpoint-io
  BadMagic,
  UnsupportedDtype,
  HeaderParse,
  TruncatedPayload,
  BadZip,
  ShapeMismatch,
  MissingEpoch,
  CorruptManifest,
  // geometry / vectorization
  DegenerateGeometry,
  RowOutOfRange,
  BudgetExceeded,
  UnsupportedGeometry,
  // statistics
  ZeroFilter,
  EmptyLayer,
  MissingLayer,
  ZeroSum,
  // training
  LabelOutOfRange,
  StaleCache,
  NonFiniteLoss,
  // data
  DimMismatch,
  Truncated,
  // harness
  ControlConverged,
  InvalidConfig,
  Io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::HeaderParse: return "HeaderParse";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::BadZip: return "BadZip";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MissingEpoch: return "MissingEpoch";
    case ErrorCode::CorruptManifest: return "CorruptManifest";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::RowOutOfRange: return "RowOutOfRange";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::UnsupportedGeometry: return "UnsupportedGeometry";
    case ErrorCode::ZeroFilter: return "ZeroFilter";
    case ErrorCode::EmptyLayer: return "EmptyLayer";
    case ErrorCode::MissingLayer: return "MissingLayer";
    case ErrorCode::ZeroSum: return "ZeroSum";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::ControlConverged: return "ControlConverged";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library. `code()` identifies the failure
/// class; `what()` carries the context (entry name, layer id, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the leading code name.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace convarrange
