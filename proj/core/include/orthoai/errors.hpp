#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace orthoai {

// Error kinds surfaced by the library. The names double as the
// machine-readable error identifiers emitted by the CLI and the service.
enum class Errc {
  DegenerateLandmarks,
  TooFewPoints,
  DegenerateCloud,
  SchemaError,
  InvalidFdi,
  DuplicateTooth,
  RejectionStall,
  ZeroScale,
  ShapeMismatch,
  NonFiniteActivation,
  EmptyBatch,
  NonFiniteLoss,
  VersionMismatch,
  HashMismatch,
  TruncatedFile,
  LengthMismatch,
  NoTeethInGroundTruth,
  NonPositiveLimit,
  UnmatchedTooth,
  MissingRule,
  WeightSumError,
  NotFound,
  CorruptArtifact,
  InvalidConfig,
  InvalidOverride,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }
  std::string_view name() const noexcept { return errc_name(code_); }

 private:
  Errc code_;
};

}  // namespace orthoai
