#pragma once

#include <stdexcept>
#include <string>

namespace perturbmc {

enum class Errc {
  NonSquare,
  NegativeEntry,
  RowSumViolation,
  NotIrreducible,
  SingularSystem,
  DomainTooSmall,
  NonGeometricCovariance,
  TruncationNotConverged,
  TailNotSummable,
  SingularResolvent,
  DimensionMismatch,
  InvalidZetaDomain,
  LagTooLarge,
  SupportViolation,
  TailNotConverged,
  InvalidLoad,
  InvalidInput,
  NotSimulable,
  BadConfig,
  IoFailure,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// CLI exit category: 1 = validation, 2 = numerical, 3 = I/O.
int exit_category(Errc c);

}  // namespace perturbmc
