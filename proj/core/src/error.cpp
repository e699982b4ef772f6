#include "synaug/error.hpp"

namespace synaug {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooFewMinority: return "TooFewMinority";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::MissingClass: return "MissingClass";
    case ErrorCode::InvalidRho: return "InvalidRho";
    case ErrorCode::Unsupported: return "Unsupported";
    case ErrorCode::SeparableWithoutRidge: return "SeparableWithoutRidge";
    case ErrorCode::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::ZeroVectorAngle: return "ZeroVectorAngle";
    case ErrorCode::ZeroPhi: return "ZeroPhi";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::DegenerateGenerator: return "DegenerateGenerator";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::EmptyMinority: return "EmptyMinority";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::MissingFullData: return "MissingFullData";
    case ErrorCode::MissingModelHandle: return "MissingModelHandle";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidRho:
    case ErrorCode::KTooLarge:
    case ErrorCode::MissingModelHandle:
    case ErrorCode::MissingFullData:
    case ErrorCode::Unsupported:
      return ErrorCategory::Usage;
    case ErrorCode::DimensionMismatch:
    case ErrorCode::TooFewMinority:
    case ErrorCode::TooFewSamples:
    case ErrorCode::MissingClass:
    case ErrorCode::EmptyMinority:
    case ErrorCode::ParseError:
    case ErrorCode::IoError:
      return ErrorCategory::Data;
    default:
      return ErrorCategory::Numeric;
  }
}

}  // namespace synaug
