#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace critnls {

enum class ErrorCode {
  invalid_config,
  numerical_input,
  geometry_mismatch,
  unsupported_on_backend,
  resolution_loss,
  undefined_ratio,
  out_of_regime,
  spectral_failure,
  discretization_failure,
  degenerate_basis,
  recursion_failure,
  shift_collision,
  stiffness_failure,
  range_error,
  degenerate_fit,
  scan_failure,
  io_error,
};

const char* to_string(ErrorCode code);

/// Single exception type for the library. The code identifies the failure
/// class; `diagnostics` carries numbers worth reporting (residual history,
/// norm-loss estimate, conditioning, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::vector<double> diagnostics = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        diagnostics_(std::move(diagnostics)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<double>& diagnostics() const noexcept { return diagnostics_; }

 private:
  ErrorCode code_;
  std::vector<double> diagnostics_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::numerical_input: return "numerical-input";
    case ErrorCode::geometry_mismatch: return "geometry-mismatch";
    case ErrorCode::unsupported_on_backend: return "unsupported-on-backend";
    case ErrorCode::resolution_loss: return "resolution-loss";
    case ErrorCode::undefined_ratio: return "undefined-ratio";
    case ErrorCode::out_of_regime: return "out-of-regime";
    case ErrorCode::spectral_failure: return "spectral-failure";
    case ErrorCode::discretization_failure: return "discretization-failure";
    case ErrorCode::degenerate_basis: return "degenerate-basis";
    case ErrorCode::recursion_failure: return "recursion-failure";
    case ErrorCode::shift_collision: return "shift-collision";
    case ErrorCode::stiffness_failure: return "stiffness-failure";
    case ErrorCode::range_error: return "range-error";
    case ErrorCode::degenerate_fit: return "degenerate-fit";
    case ErrorCode::scan_failure: return "scan-failure";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

}  // namespace critnls
