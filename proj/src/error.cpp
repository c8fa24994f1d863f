#include "qphase/error.hpp"

namespace qphase {

const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::EmptySpectrum: return "EmptySpectrum";
    case ErrorCode::NonMatrix: return "NonMatrix";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ZeroNorm: return "ZeroNorm";
    case ErrorCode::NotCanonical: return "NotCanonical";
    case ErrorCode::SiteOutOfRange: return "SiteOutOfRange";
    case ErrorCode::NonConvergedEigensolve: return "NonConvergedEigensolve";
    case ErrorCode::UnknownModel: return "UnknownModel";
    case ErrorCode::MissingCoupling: return "MissingCoupling";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::Breakdown: return "Breakdown";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::UnsupportedRange: return "UnsupportedRange";
    case ErrorCode::NonLinearRegime: return "NonLinearRegime";
    case ErrorCode::PoorFit: return "PoorFit";
    case ErrorCode::NonPositiveData: return "NonPositiveData";
    case ErrorCode::NonUniformGrid: return "NonUniformGrid";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::UnsupportedGate: return "UnsupportedGate";
    case ErrorCode::BadTrashCount: return "BadTrashCount";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace qphase
