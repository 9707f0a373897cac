#include "orthoai/errors.hpp"

namespace orthoai {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::DegenerateLandmarks: return "DegenerateLandmarks";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::DegenerateCloud: return "DegenerateCloud";
    case Errc::SchemaError: return "SchemaError";
    case Errc::InvalidFdi: return "InvalidFdi";
    case Errc::DuplicateTooth: return "DuplicateTooth";
    case Errc::RejectionStall: return "RejectionStall";
    case Errc::ZeroScale: return "ZeroScale";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFiniteActivation: return "NonFiniteActivation";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::HashMismatch: return "HashMismatch";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NoTeethInGroundTruth: return "NoTeethInGroundTruth";
    case Errc::NonPositiveLimit: return "NonPositiveLimit";
    case Errc::UnmatchedTooth: return "UnmatchedTooth";
    case Errc::MissingRule: return "MissingRule";
    case Errc::WeightSumError: return "WeightSumError";
    case Errc::NotFound: return "NotFound";
    case Errc::CorruptArtifact: return "CorruptArtifact";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidOverride: return "InvalidOverride";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace orthoai
