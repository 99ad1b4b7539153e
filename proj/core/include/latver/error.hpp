#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace latver {

// Every failure the library reports is one of these classes. The CLI prints
// the class name verbatim so callers can parse it.
enum class ErrorKind {
  MixedQuestion,
  DimMismatch,
  EmptyDataset,
  InvalidDims,
  StaleTrace,
  DegenerateDistribution,
  MissingLabels,
  ShapeMismatch,
  NonFiniteLoss,
  EmptyScores,
  MissingConfidence,
  InvalidSpec,
  InvalidConfig,
  InvalidArgument,
  IoError,
  InconsistentManifest,
  BlobSizeMismatch,
  BadRowIndex,
  VersionUnsupported,
  ShapeCorruption,
  MalformedInput,
};

std::string_view error_kind_name(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view kind_name() const noexcept { return error_kind_name(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace latver
