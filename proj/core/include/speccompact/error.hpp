#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace speccompact {

enum class ErrorCode {
  MissingColumn,
  NonNumericValue,
  DuplicateId,
  InvalidSpec,
  AlreadyNormalized,
  UnknownSpecName,
  EmptyDataset,
  DimensionMismatch,
  DegenerateLabels,
  EmptyRetainedSet,
  CellLimitExceeded,
  LengthMismatch,
  InvalidCounts,
  InvalidConfig,
  CyclicDependence,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code so the
// CLI can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix that what() carries.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace speccompact
