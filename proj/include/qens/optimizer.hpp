#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

namespace qens {

/// One evaluation of a smooth convex objective. `residual` is the
/// problem-specific stopping measure (for moment matching, the max-norm of
/// the moment mismatch).
struct Evaluation {
  double value = 0.0;
  Eigen::VectorXd gradient;
  std::optional<Eigen::MatrixXd> hessian;
  double residual = 0.0;
};

using ObjectiveFn = std::function<Evaluation(const Eigen::VectorXd& x, bool want_hessian)>;

struct OptimizerOptions {
  double tolerance = 1e-8;
  int max_iterations = 200;
  int lbfgs_memory = 20;
  double armijo = 1e-4;
  int max_backtracks = 60;
};

struct OptimizerResult {
  Eigen::VectorXd x;
  Evaluation last;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> accepted_values;  // objective after each accepted step
};

/// Damped Newton with backtracking line search. The linear solve adds a tiny
/// ridge so flat directions (e.g. gauge freedom on a fixed-particle support)
/// do not break the factorization.
OptimizerResult newton_minimize(const ObjectiveFn& f, Eigen::VectorXd x0,
                                const OptimizerOptions& options);

/// Limited-memory BFGS with backtracking line search; gradient only.
OptimizerResult lbfgs_minimize(const ObjectiveFn& f, Eigen::VectorXd x0,
                               const OptimizerOptions& options);

}  // namespace qens
