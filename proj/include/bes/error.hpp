#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bes {

enum class ErrorCode {
  IndexOutOfRange,
  SelfLoop,
  LengthMismatch,
  NegativePotential,
  ZeroPotential,
  IsolatedNodeUnderMu,
  UnstableStep,
  NotSymmetric,
  TooLarge,
  NotConverged,
  ZeroSignal,
  BadN,
  NonPositiveLambdaMax,
  ShapeMismatch,
  NotScalar,
  DetachedLoss,
  EmptyMask,
  BadSize,
  DisconnectedAfterRetries,
  ConfigInvalid,
  DatasetMissing,
  NaNLoss,
  ParseError,
};

std::string_view to_string(ErrorCode code);

/// All library failures are reported as bes::Error carrying a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bes
