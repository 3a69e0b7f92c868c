#include "mfgc/error.hpp"

namespace mfgc {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidGrid: return "InvalidGrid";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::NegativeDensity: return "NegativeDensity";
    case ErrorKind::HypothesisViolation: return "HypothesisViolation";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::StepSizeViolation: return "StepSizeViolation";
    case ErrorKind::CFLViolation: return "CFLViolation";
    case ErrorKind::ShiftTooLarge: return "ShiftTooLarge";
    case ErrorKind::DeltaNotOnGrid: return "DeltaNotOnGrid";
    case ErrorKind::PerspectiveViolation: return "PerspectiveViolation";
    case ErrorKind::ConfigParse: return "ConfigParse";
    case ErrorKind::MissingArtifact: return "MissingArtifact";
    case ErrorKind::AssumptionRefused: return "AssumptionRefused";
  }
  return "Error";
}

}  // namespace mfgc
