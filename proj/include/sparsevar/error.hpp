#pragma once

#include <stdexcept>
#include <string>

namespace sparsevar {

enum class ErrorCode {
  invalid_order,
  invalid_data,
  invalid_length,
  invalid_input,
  invalid_folds,
  invalid_correlation,
  stability,
  generation_failure,
  scaling,
  singular_design,
  degenerate_design,
  degenerate_covariance,
  non_convergence,
  numeric,
  undefined_roc,
  parse,
  io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_order: return "invalid-order";
    case ErrorCode::invalid_data: return "invalid-data";
    case ErrorCode::invalid_length: return "invalid-length";
    case ErrorCode::invalid_input: return "invalid-input";
    case ErrorCode::invalid_folds: return "invalid-folds";
    case ErrorCode::invalid_correlation: return "invalid-correlation";
    case ErrorCode::stability: return "stability";
    case ErrorCode::generation_failure: return "generation-failure";
    case ErrorCode::scaling: return "scaling";
    case ErrorCode::singular_design: return "singular-design";
    case ErrorCode::degenerate_design: return "degenerate-design";
    case ErrorCode::degenerate_covariance: return "degenerate-covariance";
    case ErrorCode::non_convergence: return "non-convergence";
    case ErrorCode::numeric: return "numeric";
    case ErrorCode::undefined_roc: return "undefined-roc";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sparsevar
