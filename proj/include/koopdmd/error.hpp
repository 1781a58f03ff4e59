// SPDX-License-Identifier: Apache-2.0

#ifndef KOOPDMD_ERROR_HPP
#define KOOPDMD_ERROR_HPP

#include <stdexcept>
#include <string>

namespace koopdmd {

enum class ErrorCode {
  Dimension,
  Domain,
  Convergence,
  InsufficientData,
  DegenerateData,
  IllConditioned,
  SingularLog,
  StepSize,
  Io,
  Format,
  Usage,
  Protocol,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the engine. The code survives the C boundary.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// Newton did not reach tolerance. Carries the last residual norm.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, double residual)
      : Error(ErrorCode::Convergence, what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

}  // namespace koopdmd

#endif
