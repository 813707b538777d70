#include "qens/error.hpp"

namespace qens {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::fermi_degeneracy: return "FermiDegeneracy";
    case ErrorKind::budget_exceeded: return "BudgetExceeded";
    case ErrorKind::non_convergence: return "NonConvergence";
    case ErrorKind::no_solution: return "NoSolution";
    case ErrorKind::support_mismatch: return "SupportMismatch";
    case ErrorKind::io: return "IOError";
  }
  return "Error";
}

}  // namespace qens
