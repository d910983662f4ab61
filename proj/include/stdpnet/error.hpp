#pragma once

#include <stdexcept>
#include <string>

namespace stdpnet {

enum class Errc {
  // data and file format
  BadMagic,
  TruncatedFile,
  DimensionMismatch,
  BadVersion,
  // argument / geometry
  FractionOutOfRange,
  NonPositiveSigma,
  ImageTooSmall,
  ShapeMismatch,
  GeometryMismatch,
  LengthMismatch,
  BadDims,
  DimMismatch,
  LabelOutOfRange,
  ConfigInvalid,
  // empty inputs
  EmptyStream,
  EmptyBatch,
  EmptySet,
  EmptyTrace,
  // filesystem / pipeline
  FileNotFound,
  IoError,
  MissingCache,
  MissingSnapshot,
  // runtime invariant checks
  InvariantViolation,
};

const char* to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace stdpnet
