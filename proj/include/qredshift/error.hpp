#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qredshift {

enum class ErrorCode {
  invalid_argument,
  zero_norm,
  non_finite,
  negative_frequency,
  positive_support,
  phase_undefined,
  quadrature_failure,
  non_finite_integrand,
  linear_dependence,
  not_orthonormal,
  completion_failed,
  bracket_invalid,
  optimization_not_converged,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::zero_norm: return "ZeroNorm";
    case ErrorCode::non_finite: return "NonFinite";
    case ErrorCode::negative_frequency: return "NegativeFrequency";
    case ErrorCode::positive_support: return "PositiveSupport";
    case ErrorCode::phase_undefined: return "PhaseUndefined";
    case ErrorCode::quadrature_failure: return "QuadratureFailure";
    case ErrorCode::non_finite_integrand: return "NonFiniteIntegrand";
    case ErrorCode::linear_dependence: return "LinearDependence";
    case ErrorCode::not_orthonormal: return "NotOrthonormal";
    case ErrorCode::completion_failed: return "CompletionFailed";
    case ErrorCode::bracket_invalid: return "BracketInvalid";
    case ErrorCode::optimization_not_converged: return "OptimizationNotConverged";
  }
  return "Unknown";
}

/// Every recoverable failure in the library is reported through this type.
/// Structured outcomes (e.g. a Gram deficit that cannot be completed) are
/// returned as values instead.
/// Short decimal for diagnostics.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qredshift
