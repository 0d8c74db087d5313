#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wusn {

enum class ErrorCode {
  invalid_input,
  invalid_modulation,
  schema,
  timing,
  unrecoverable_data,
  invalid_config,
  degenerate_fit,
  contract_violation,
  convergence_failure,
  configuration,
  undefined_ratio,
  io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "invalid input";
    case ErrorCode::invalid_modulation: return "invalid modulation";
    case ErrorCode::schema: return "schema error";
    case ErrorCode::timing: return "timing error";
    case ErrorCode::unrecoverable_data: return "unrecoverable data";
    case ErrorCode::invalid_config: return "invalid config";
    case ErrorCode::degenerate_fit: return "degenerate fit";
    case ErrorCode::contract_violation: return "contract violation";
    case ErrorCode::convergence_failure: return "convergence failure";
    case ErrorCode::configuration: return "configuration error";
    case ErrorCode::undefined_ratio: return "undefined ratio";
    case ErrorCode::io: return "i/o error";
  }
  return "error";
}

// Base of every error thrown by the library. The code lets callers branch
// without a catch clause per subclass.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Irregular or non-monotone timestamps; row is the 0-based data row.
class TimingError : public Error {
 public:
  TimingError(std::size_t row, const std::string& what)
      : Error(ErrorCode::timing, "row " + std::to_string(row) + ": " + what), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(double residual, std::size_t sweeps)
      : Error(ErrorCode::convergence_failure,
              "no convergence after " + std::to_string(sweeps) +
                  " sweeps, residual " + std::to_string(residual)),
        residual_(residual),
        sweeps_(sweeps) {}

  double residual() const noexcept { return residual_; }
  std::size_t sweeps() const noexcept { return sweeps_; }

 private:
  double residual_;
  std::size_t sweeps_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace wusn
