#include "speccompact/error.hpp"

namespace speccompact {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonNumericValue: return "NonNumericValue";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::AlreadyNormalized: return "AlreadyNormalized";
    case ErrorCode::UnknownSpecName: return "UnknownSpecName";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::EmptyRetainedSet: return "EmptyRetainedSet";
    case ErrorCode::CellLimitExceeded: return "CellLimitExceeded";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidCounts: return "InvalidCounts";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::CyclicDependence: return "CyclicDependence";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

}  // namespace speccompact
