#pragma once

#include <stdexcept>
#include <string>

namespace mfgc {

enum class ErrorKind {
  InvalidGrid,
  NotPSD,
  NegativeDensity,
  HypothesisViolation,
  NoConvergence,
  StepSizeViolation,
  CFLViolation,
  ShiftTooLarge,
  DeltaNotOnGrid,
  PerspectiveViolation,
  ConfigParse,
  MissingArtifact,
  AssumptionRefused,
};

const char* to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` tells callers which
/// contract was broken so the CLI can map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mfgc
