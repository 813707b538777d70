#pragma once

#include <stdexcept>
#include <string>

namespace qens {

enum class ErrorKind {
  invalid_argument,
  fermi_degeneracy,
  budget_exceeded,
  non_convergence,
  no_solution,
  support_mismatch,
  io,
};

const char* to_string(ErrorKind kind);

/// Base of every error raised by the library. The kind is what the CLI maps
/// onto exit codes and machine-readable error objects.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error(ErrorKind::invalid_argument, what) {}
};

/// The pre-quench Fermi level is degenerate and no resolution rule was given.
class FermiDegeneracy : public Error {
 public:
  FermiDegeneracy(const std::string& what, int first_level, int last_level)
      : Error(ErrorKind::fermi_degeneracy, what),
        first_level_(first_level),
        last_level_(last_level) {}
  int first_level() const noexcept { return first_level_; }
  int last_level() const noexcept { return last_level_; }

 private:
  int first_level_;
  int last_level_;
};

class BudgetExceeded : public Error {
 public:
  explicit BudgetExceeded(const std::string& what)
      : Error(ErrorKind::budget_exceeded, what) {}
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double final_residual)
      : Error(ErrorKind::non_convergence, what),
        final_residual_(final_residual) {}
  double final_residual() const noexcept { return final_residual_; }

 private:
  double final_residual_;
};

class NoSolution : public Error {
 public:
  explicit NoSolution(const std::string& what)
      : Error(ErrorKind::no_solution, what) {}
};

class SupportMismatch : public Error {
 public:
  explicit SupportMismatch(const std::string& what)
      : Error(ErrorKind::support_mismatch, what) {}
};

}  // namespace qens
