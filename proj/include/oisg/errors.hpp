#pragma once

#include <stdexcept>
#include <string>

namespace oisg {

// Argument outside the mathematical domain of a transform or objective.
struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ZeroVarianceError : std::runtime_error {
  explicit ZeroVarianceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Fixed-point or optimizer failure; carries the last residual in the message.
struct NoConvergenceError : std::runtime_error {
  NoConvergenceError(const std::string& msg, double last_residual)
      : std::runtime_error(msg + " (last residual " + std::to_string(last_residual) + ")"),
        residual(last_residual) {}
  double residual;
};

struct TooLargeError : std::runtime_error {
  explicit TooLargeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct QuadratureOverflowError : std::runtime_error {
  explicit QuadratureOverflowError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InfeasibleAlphaError : std::runtime_error {
  explicit InfeasibleAlphaError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SingularGramError : std::runtime_error {
  explicit SingularGramError(const std::string& msg) : std::runtime_error(msg) {}
};

struct BarrierStallError : std::runtime_error {
  BarrierStallError(const std::string& msg, double g, double nu, double rho)
      : std::runtime_error(msg), last_gamma(g), last_nu(nu), last_rho(rho) {}
  double last_gamma, last_nu, last_rho;
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace oisg
