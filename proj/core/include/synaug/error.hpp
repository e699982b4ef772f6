#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace synaug {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  TooFewMinority,
  TooFewSamples,
  MissingClass,
  InvalidRho,
  Unsupported,
  SeparableWithoutRidge,
  SingularNormalEquations,
  SingularMatrix,
  NotPositiveDefinite,
  ZeroVectorAngle,
  ZeroPhi,
  DegenerateDenominator,
  DegenerateGenerator,
  NonPositiveInput,
  EmptyMinority,
  KTooLarge,
  MissingFullData,
  MissingModelHandle,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Coarse category used by the CLI to pick an exit code.
enum class ErrorCategory { Usage, Data, Numeric };

ErrorCategory category_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace synaug
