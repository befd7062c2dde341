#include "perturbmc/errors.hpp"

namespace perturbmc {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::NonSquare: return "NonSquare";
    case Errc::NegativeEntry: return "NegativeEntry";
    case Errc::RowSumViolation: return "RowSumViolation";
    case Errc::NotIrreducible: return "NotIrreducible";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::DomainTooSmall: return "DomainTooSmall";
    case Errc::NonGeometricCovariance: return "NonGeometricCovariance";
    case Errc::TruncationNotConverged: return "TruncationNotConverged";
    case Errc::TailNotSummable: return "TailNotSummable";
    case Errc::SingularResolvent: return "SingularResolvent";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InvalidZetaDomain: return "InvalidZetaDomain";
    case Errc::LagTooLarge: return "LagTooLarge";
    case Errc::SupportViolation: return "SupportViolation";
    case Errc::TailNotConverged: return "TailNotConverged";
    case Errc::InvalidLoad: return "InvalidLoad";
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::NotSimulable: return "NotSimulable";
    case Errc::BadConfig: return "BadConfig";
    case Errc::IoFailure: return "IoFailure";
  }
  return "UnknownError";
}

int exit_category(Errc c) {
  switch (c) {
    case Errc::TruncationNotConverged:
    case Errc::TailNotSummable:
    case Errc::SingularResolvent:
    case Errc::SingularSystem:
    case Errc::TailNotConverged:
      return 2;
    case Errc::IoFailure:
      return 3;
    default:
      return 1;
  }
}

}  // namespace perturbmc
