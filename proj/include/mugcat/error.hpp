// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mugcat {

enum class ErrorCode {
  kInvalidValue,
  kInvalidResolution,
  kInvalidWindow,
  kInvalidThreshold,
  kBadMagic,
  kTruncatedPayload,
  kDimensionMismatch,
  kIoError,
  kUnreachable,
  kStageMismatch,
  kUnsupportedVersion,
  kDeadlineExceeded,
  kMalformedResponse,
  kBackendError,
  kDecodeError,
  kPayloadTooLarge,
  kEmptyText,
  kEmptyKeywords,
  kDimMismatch,
  kZeroVector,
  kStageFailed,
  kTurnTimeout,
  kLengthMismatch,
  kTooFewSamples,
  kEigenFailure,
  kBindError,
  kBackendUnreachable,
  kUnknownSession,
  kUnknownTurn,
  kIndexOutOfRange,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidValue: return "InvalidValue";
    case ErrorCode::kInvalidResolution: return "InvalidResolution";
    case ErrorCode::kInvalidWindow: return "InvalidWindow";
    case ErrorCode::kInvalidThreshold: return "InvalidThreshold";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kTruncatedPayload: return "TruncatedPayload";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kUnreachable: return "Unreachable";
    case ErrorCode::kStageMismatch: return "StageMismatch";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kDeadlineExceeded: return "DeadlineExceeded";
    case ErrorCode::kMalformedResponse: return "MalformedResponse";
    case ErrorCode::kBackendError: return "BackendError";
    case ErrorCode::kDecodeError: return "DecodeError";
    case ErrorCode::kPayloadTooLarge: return "PayloadTooLarge";
    case ErrorCode::kEmptyText: return "EmptyText";
    case ErrorCode::kEmptyKeywords: return "EmptyKeywords";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kZeroVector: return "ZeroVector";
    case ErrorCode::kStageFailed: return "StageFailed";
    case ErrorCode::kTurnTimeout: return "TurnTimeout";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kEigenFailure: return "EigenFailure";
    case ErrorCode::kBindError: return "BindError";
    case ErrorCode::kBackendUnreachable: return "BackendUnreachable";
    case ErrorCode::kUnknownSession: return "UnknownSession";
    case ErrorCode::kUnknownTurn: return "UnknownTurn";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
  }
  return "Unknown";
}

/// The single exception type thrown by the library. `code()` identifies the
/// failure class; `what()` carries a human-readable message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

/// DecodeError that remembers the JSON path of the offending value, e.g.
/// "$.frames[2].pixels".
class DecodeError : public Error {
 public:
  DecodeError(std::string path, const std::string& message)
      : Error(ErrorCode::kDecodeError, "at " + path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

namespace detail {

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace detail
}  // namespace mugcat
