#include "stdpnet/error.hpp"

namespace stdpnet {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::BadVersion: return "BadVersion";
    case Errc::FractionOutOfRange: return "FractionOutOfRange";
    case Errc::NonPositiveSigma: return "NonPositiveSigma";
    case Errc::ImageTooSmall: return "ImageTooSmall";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::GeometryMismatch: return "GeometryMismatch";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::BadDims: return "BadDims";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::EmptyStream: return "EmptyStream";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::EmptySet: return "EmptySet";
    case Errc::EmptyTrace: return "EmptyTrace";
    case Errc::FileNotFound: return "FileNotFound";
    case Errc::IoError: return "IoError";
    case Errc::MissingCache: return "MissingCache";
    case Errc::MissingSnapshot: return "MissingSnapshot";
    case Errc::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

}  // namespace stdpnet
