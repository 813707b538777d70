#include "qens/optimizer.hpp"

#include <cmath>
#include <deque>

namespace qens {

namespace {

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

// Armijo, or (at the rounding floor of the objective) a strict residual
// decrease with no measurable increase of the value.
bool acceptable(const Evaluation& current, const Evaluation& trial, double step, double slope,
                double armijo) {
  if (!std::isfinite(trial.value)) return false;
  if (trial.value <= current.value + armijo * step * slope) return true;
  const double floor = 1e-14 * (1.0 + std::abs(current.value));
  return std::abs(trial.value - current.value) <= floor && trial.residual < current.residual;
}

struct LineSearch {
  bool ok = false;
  double step = 0.0;
  Evaluation eval;
};

LineSearch backtrack(const ObjectiveFn& f, const Eigen::VectorXd& x, const Eigen::VectorXd& d,
                     const Evaluation& current, double first_step, const OptimizerOptions& o,
                     int& evaluations) {
  const double slope = current.gradient.dot(d);
  double t = first_step;
  for (int k = 0; k < o.max_backtracks; ++k, t *= 0.5) {
    Evaluation trial = f(x + t * d, false);
    ++evaluations;
    if (acceptable(current, trial, t, slope, o.armijo)) return {true, t, std::move(trial)};
  }
  return {};
}

}  // namespace

OptimizerResult newton_minimize(const ObjectiveFn& f, Eigen::VectorXd x0, const OptimizerOptions& o) {
  OptimizerResult r;
  r.x = std::move(x0);
  for (r.iterations = 0;; ++r.iterations) {
    r.last = f(r.x, true);
    ++r.evaluations;
    if (r.iterations == 0) r.accepted_values.push_back(r.last.value);
    if (r.last.residual <= o.tolerance) {
      r.converged = true;
      return r;
    }
    if (r.iterations >= o.max_iterations) return r;

    const Eigen::MatrixXd& h = *r.last.hessian;
    const double ridge = 1e-12 * (1.0 + h.diagonal().cwiseAbs().maxCoeff());
    Eigen::MatrixXd damped = h;
    damped.diagonal().array() += ridge;
    Eigen::VectorXd d = -damped.ldlt().solve(r.last.gradient);
    if (!finite(d) || d.dot(r.last.gradient) >= 0) d = -r.last.gradient;

    LineSearch ls = backtrack(f, r.x, d, r.last, 1.0, o, r.evaluations);
    if (!ls.ok) {
      d = -r.last.gradient;
      ls = backtrack(f, r.x, d, r.last, 1.0, o, r.evaluations);
      if (!ls.ok) return r;
    }
    r.x += ls.step * d;
    r.accepted_values.push_back(ls.eval.value);
  }
}

OptimizerResult lbfgs_minimize(const ObjectiveFn& f, Eigen::VectorXd x0, const OptimizerOptions& o) {
  OptimizerResult r;
  r.x = std::move(x0);
  r.last = f(r.x, false);
  ++r.evaluations;
  r.accepted_values.push_back(r.last.value);

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  for (r.iterations = 0;; ++r.iterations) {
    if (r.last.residual <= o.tolerance) {
      r.converged = true;
      return r;
    }
    if (r.iterations >= o.max_iterations) return r;

    const Eigen::VectorXd& g = r.last.gradient;
    Eigen::VectorXd q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(q);
      q -= alpha[k] * y_hist[k];
    }
    double first_step = 1.0;
    if (!s_hist.empty()) {
      q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    } else {
      first_step = std::min(1.0, 1.0 / std::max(1e-300, g.cwiseAbs().maxCoeff()));
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(q);
      q += (alpha[k] - beta) * s_hist[k];
    }
    Eigen::VectorXd d = -q;
    if (!finite(d) || d.dot(g) >= 0) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      first_step = std::min(1.0, 1.0 / std::max(1e-300, g.cwiseAbs().maxCoeff()));
    }

    LineSearch ls = backtrack(f, r.x, d, r.last, first_step, o, r.evaluations);
    if (!ls.ok) {
      if (s_hist.empty()) return r;
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }
    Eigen::VectorXd s = ls.step * d;
    Eigen::VectorXd y = ls.eval.gradient - g;
    r.x += s;
    r.last = std::move(ls.eval);
    r.accepted_values.push_back(r.last.value);
    const double sy = s.dot(y);
    if (sy > 1e-14 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > o.lbfgs_memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
  }
}

}  // namespace qens
