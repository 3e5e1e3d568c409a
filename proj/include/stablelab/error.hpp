#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stablelab {

enum class ErrorCode {
  DuplicateEntry,
  MissingPartner,
  ValueOrderMismatch,
  InvalidIndex,
  ParseError,
  SizeMismatch,
  NotABlockingPair,
  CapExceeded,
  FirmUnmatched,
  InputNotStable,
  BreakmarriageUnsuccessful,
  FullSizeSubset,
  NotBalanced,
  PremiseViolated,
  StateNotFound,
  SingularSystem,
  InvalidWeights,
  MissingCardinalValues,
  KappaViolated,
  NotUniqueStable,
  NotFound,
  PreconditionFailed,
  StarConditionViolated,
  DomainError,
  ConfigError,
};

std::string_view errorName(ErrorCode code);

/// Every library failure carries a machine-readable code next to the message.
class LabError : public std::runtime_error {
 public:
  LabError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(errorName(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stablelab
