#pragma once

#include <stdexcept>
#include <string>

namespace qphase {

enum class ErrorCode {
  EmptySpectrum,
  NonMatrix,
  ShapeMismatch,
  ZeroNorm,
  NotCanonical,
  SiteOutOfRange,
  NonConvergedEigensolve,
  UnknownModel,
  MissingCoupling,
  TooLarge,
  Breakdown,
  NoConvergence,
  UnsupportedRange,
  NonLinearRegime,
  PoorFit,
  NonPositiveData,
  NonUniformGrid,
  DimMismatch,
  UnsupportedGate,
  BadTrashCount,
  EmptyPool,
  ParseError,
  ValidationError,
  ChecksumMismatch,
  SchemaVersionMismatch,
  ConfigError,
  SolverFailure,
  IoError,
};

const char* error_code_name(ErrorCode c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qphase
