#include "qens/ensemble_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "nlohmann/json.hpp"
#include "qens/error.hpp"
#include "qens/optimizer.hpp"
#include "qens/parallel.hpp"

namespace qens {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double binary_entropy(double h) {
  double s = 0.0;
  if (h > 0.0) s -= h * std::log(h);
  if (h < 1.0) s -= (1.0 - h) * std::log1p(-h);
  return s;
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// 1 / (exp(x) + 1)
double fermi(double x) {
  if (x > 0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

std::vector<int> modes_of(Mask s) { return mask_to_modes(s); }

}  // namespace

// ---------------------------------------------------------------- GGE

double GGEModel::entropy() const {
  CompensatedSum s;
  for (Eigen::Index j = 0; j < occupations.size(); ++j)
    if (!((saturated() >> j) & 1)) s.add(binary_entropy(occupations(j)));
  return s.value();
}

GGEModel fit_gge(const Eigen::VectorXd& h, double saturation) {
  const int n = static_cast<int>(h.size());
  if (n > max_modes) throw InvalidArgument("at most 64 modes");
  GGEModel m;
  m.occupations = h;
  m.lambdas.resize(n);
  for (int j = 0; j < n; ++j) {
    if (!(h(j) >= -1e-12 && h(j) <= 1.0 + 1e-12))
      throw InvalidArgument("occupation outside [0, 1] for mode " + std::to_string(j));
    if (h(j) < saturation) {
      m.lambdas(j) = inf;
      m.frozen_empty |= Mask{1} << j;
    } else if (h(j) > 1.0 - saturation) {
      m.lambdas(j) = -inf;
      m.frozen_full |= Mask{1} << j;
    } else {
      m.lambdas(j) = std::log((1.0 - h(j)) / h(j));
    }
  }
  return m;
}

GGEModel fit_gge(const MomentTargets& targets, double saturation) {
  return fit_gge(targets.means, saturation);
}

// ---------------------------------------------------------------- GCE

Eigen::VectorXd GCEModel::occupations(const Eigen::VectorXd& e) const {
  Eigen::VectorXd f(e.size());
  for (Eigen::Index j = 0; j < e.size(); ++j) {
    if (zero_temperature) {
      const double d = beta > 0 ? e(j) - mu : mu - e(j);
      f(j) = d < 0 ? 1.0 : (d > 0 ? 0.0 : 0.5);
    } else {
      f(j) = fermi(beta * e(j) + alpha);
    }
  }
  return f;
}

Eigen::VectorXd GCEModel::lambdas(const Eigen::VectorXd& e) const {
  Eigen::VectorXd l(e.size());
  for (Eigen::Index j = 0; j < e.size(); ++j) {
    if (zero_temperature) {
      const double d = beta > 0 ? e(j) - mu : mu - e(j);
      l(j) = d < 0 ? -inf : (d > 0 ? inf : 0.0);
    } else {
      l(j) = beta * e(j) + alpha;
    }
  }
  return l;
}

double GCEModel::entropy(const Eigen::VectorXd& e) const {
  const Eigen::VectorXd f = occupations(e);
  CompensatedSum s;
  for (Eigen::Index j = 0; j < f.size(); ++j) s.add(binary_entropy(f(j)));
  return s.value();
}

namespace {

struct FermiSums {
  double n = 0, e = 0;     // sum f, sum eps f
  double w = 0, we = 0, wee = 0;  // sums of f(1-f), eps f(1-f), eps^2 f(1-f)
};

FermiSums fermi_sums(const Eigen::VectorXd& eps, double beta, double alpha) {
  FermiSums s;
  for (Eigen::Index j = 0; j < eps.size(); ++j) {
    const double f = fermi(beta * eps(j) + alpha);
    const double w = f * (1.0 - f);
    s.n += f;
    s.e += eps(j) * f;
    s.w += w;
    s.we += eps(j) * w;
    s.wee += eps(j) * eps(j) * w;
  }
  return s;
}

// alpha with sum f = m at fixed beta; sum f decreases in alpha.
double solve_alpha(const Eigen::VectorXd& eps, double beta, double m) {
  const double lo_e = eps.minCoeff(), hi_e = eps.maxCoeff();
  double lo = -std::max(std::abs(beta * lo_e), std::abs(beta * hi_e)) - 50.0;
  double hi = -lo;
  for (int k = 0; k < 200 && fermi_sums(eps, beta, lo).n < m; ++k) lo *= 2;
  for (int k = 0; k < 200 && fermi_sums(eps, beta, hi).n > m; ++k) hi *= 2;
  for (int k = 0; k < 300 && hi - lo > 1e-15 * (1.0 + std::abs(lo) + std::abs(hi)); ++k) {
    const double mid = 0.5 * (lo + hi);
    if (fermi_sums(eps, beta, mid).n > m) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double filled_energy(Eigen::VectorXd eps, double m, bool lowest) {
  std::sort(eps.data(), eps.data() + eps.size());
  if (!lowest) eps.reverseInPlace();
  double e = 0.0, left = m;
  for (Eigen::Index j = 0; j < eps.size() && left > 0; ++j) {
    const double take = std::min(1.0, left);
    e += take * eps(j);
    left -= take;
  }
  return e;
}

}  // namespace

GCEModel fit_gce(const Eigen::VectorXd& eps, double e_target, double m_target) {
  const double n = static_cast<double>(eps.size());
  if (eps.size() == 0) throw InvalidArgument("empty spectrum");
  if (!(m_target > 0.0 && m_target < n))
    throw NoSolution("particle number must lie strictly between 0 and N");
  const double e_low = filled_energy(eps, m_target, true);
  const double e_high = filled_energy(eps, m_target, false);
  const double tol = 1e-10 * (1.0 + std::abs(e_low) + std::abs(e_high));
  if (e_target < e_low - tol || e_target > e_high + tol) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "energy " << e_target << " outside the attainable range [" << e_low << ", " << e_high
        << "] for " << m_target << " particles";
    throw NoSolution(msg.str());
  }

  GCEModel g;
  const bool at_bottom = std::abs(e_target - e_low) <= tol;
  const bool at_top = std::abs(e_target - e_high) <= tol;
  if (at_bottom || at_top) {
    Eigen::VectorXd sorted = eps;
    std::sort(sorted.data(), sorted.data() + sorted.size());
    const auto k = static_cast<Eigen::Index>(std::llround(m_target));
    g.zero_temperature = true;
    if (at_bottom) {
      g.beta = inf;
      g.mu = 0.5 * (sorted(k - 1) + sorted(k));
    } else {
      g.beta = -inf;
      g.mu = 0.5 * (sorted(sorted.size() - k) + sorted(sorted.size() - k - 1));
    }
    g.alpha = at_bottom ? -inf : inf;
    const Eigen::VectorXd f = g.occupations(eps);
    g.particle_residual = std::abs(f.sum() - m_target);
    g.energy_residual = std::abs(eps.dot(f) - e_target);
    return g;
  }

  // Mean energy at fixed particle number decreases monotonically in beta.
  const auto energy_at = [&](double beta) {
    return fermi_sums(eps, beta, solve_alpha(eps, beta, m_target)).e;
  };
  double lo = -1.0, hi = 1.0;
  for (int k = 0; k < 80 && energy_at(lo) < e_target; ++k) lo *= 2;
  for (int k = 0; k < 80 && energy_at(hi) > e_target; ++k) hi *= 2;
  for (int k = 0; k < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo) + std::abs(hi)); ++k) {
    const double mid = 0.5 * (lo + hi);
    if (energy_at(mid) > e_target) lo = mid;
    else hi = mid;
  }
  double beta = 0.5 * (lo + hi);
  double alpha = solve_alpha(eps, beta, m_target);

  // Joint Newton polish of both conditions.
  auto residual = [&](double b, double a) {
    const FermiSums s = fermi_sums(eps, b, a);
    return std::max(std::abs(s.n - m_target), std::abs(s.e - e_target));
  };
  double r = residual(beta, alpha);
  for (int it = 0; it < 50 && r > 1e-14 * (1.0 + std::abs(e_target)); ++it) {
    const FermiSums s = fermi_sums(eps, beta, alpha);
    Eigen::Matrix2d jac;
    jac << -s.we, -s.w, -s.wee, -s.we;
    const Eigen::Vector2d rhs(s.n - m_target, s.e - e_target);
    const Eigen::Vector2d d = jac.fullPivLu().solve(-rhs);
    if (!d.allFinite()) break;
    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < 30; ++k, t *= 0.5) {
      const double rt = residual(beta + t * d(0), alpha + t * d(1));
      if (rt < r) {
        beta += t * d(0);
        alpha += t * d(1);
        r = rt;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }

  const FermiSums s = fermi_sums(eps, beta, alpha);
  g.beta = beta;
  g.alpha = alpha;
  g.particle_residual = std::abs(s.n - m_target);
  g.energy_residual = std::abs(s.e - e_target);
  if (std::abs(beta) < 1e-12 && std::abs(2.0 * m_target - n) < 1e-12) g.mu = eps.mean();
  else g.mu = -alpha / beta;
  if (g.particle_residual > 1e-8 || g.energy_residual > 1e-8)
    throw NonConvergence("thermal fit did not reach the residual target",
                         std::max(g.particle_residual, g.energy_residual));
  return g;
}

GCEModel fit_gce(const ModeBasis& basis, double e_target, double m_target) {
  return fit_gce(basis.energies, e_target, m_target);
}

// ---------------------------------------------------------------- reduced problems

namespace {

// The family restricted to the modes that are not frozen.
struct Reduced {
  std::vector<int> modes;  // full-space index of each active mode
  PairwiseParams params;
  Support support;
};

Reduced reduce(const PairwiseParams& params, Mask frozen_empty, Mask frozen_full,
               const Support& support) {
  const int n = params.n_modes();
  Reduced r;
  r.modes = modes_of(low_bits(n) & ~(frozen_empty | frozen_full));
  const int k = static_cast<int>(r.modes.size());
  r.params.lambdas.resize(k);
  r.params.v.resize(k, k);
  for (int a = 0; a < k; ++a) {
    r.params.lambdas(a) = params.lambdas(r.modes[a]);
    for (int b = 0; b < k; ++b) r.params.v(a, b) = params.v(r.modes[a], r.modes[b]);
  }
  if (support.is_full()) {
    r.support = Support::full_space(k);
  } else {
    const int m = support.particles - popcount(frozen_full);
    if (m < 0 || m > k) throw SupportMismatch("frozen modes are incompatible with the particle sector");
    r.support = Support::sector(k, m);
  }
  return r;
}

double sector_or_full_independent_log_z(const Eigen::VectorXd& lambdas, const Support& support) {
  if (!support.is_full()) return independent_sector_log_z(lambdas, support.particles);
  CompensatedSum s;
  for (Eigen::Index j = 0; j < lambdas.size(); ++j) s.add(softplus(-lambdas(j)));
  return s.value();
}

FamilyStats reduced_stats(const Reduced& r, int threads) {
  const int k = r.params.n_modes();
  if (k == 0) {
    FamilyStats s;
    s.log_z = 0.0;
    s.means = Eigen::VectorXd::Zero(0);
    s.pairs = Eigen::MatrixXd::Zero(0, 0);
    return s;
  }
  if (r.params.v.isZero(0.0)) {
    if (!r.support.is_full()) return independent_sector_stats(r.params.lambdas, r.support.particles);
    FamilyStats s;
    s.log_z = sector_or_full_independent_log_z(r.params.lambdas, r.support);
    s.means.resize(k);
    for (int j = 0; j < k; ++j) s.means(j) = fermi(r.params.lambdas(j));
    s.pairs = s.means * s.means.transpose();
    s.pairs.diagonal() = s.means;
    return s;
  }
  return family_stats(r.params, r.support, threads);
}

double max_moment_residual(const Eigen::VectorXd& grad, int k) {
  double r = 0.0;
  for (Eigen::Index i = 0; i < grad.size(); ++i)
    r = std::max(r, std::abs(grad(i)) * (i < k ? 1.0 : 0.5));
  return r;
}

// ---------------------------------------------------------------- sampler

class PairwiseSampler {
 public:
  PairwiseSampler(const PairwiseParams& p, const Support& support, std::uint64_t seed)
      : p_(p), support_(support), rng_(seed), k_(p.n_modes()) {
    if (support.is_full()) {
      for (int j = 0; j < k_; ++j)
        if (p.lambdas(j) < 0) state_ |= Mask{1} << j;
    } else {
      std::vector<int> order(k_);
      for (int j = 0; j < k_; ++j) order[j] = j;
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return p.lambdas(a) < p.lambdas(b); });
      for (int j = 0; j < support.particles; ++j) state_ |= Mask{1} << order[j];
    }
  }

  void set_params(const PairwiseParams& p) { p_ = p; }
  Mask state() const { return state_; }

  void sweep() {
    if (support_.is_full()) {
      for (int j = 0; j < k_; ++j) {
        double h = p_.lambdas(j);
        for_each_bit(state_ & ~(Mask{1} << j), [&](int i) { h += 2.0 * p_.v(i, j); });
        if (uniform() < fermi(h)) state_ |= Mask{1} << j;
        else state_ &= ~(Mask{1} << j);
      }
      return;
    }
    const int m = support_.particles;
    if (m == 0 || m == k_) return;
    for (int step = 0; step < k_; ++step) {
      const int i = nth_bit(state_, pick(m));
      const int j = nth_bit(~state_ & low_bits(k_), pick(k_ - m));
      double de = p_.lambdas(j) - p_.lambdas(i);
      for_each_bit(state_ & ~(Mask{1} << i), [&](int l) { de += 2.0 * (p_.v(j, l) - p_.v(i, l)); });
      if (de <= 0 || uniform() < std::exp(-de)) state_ ^= (Mask{1} << i) | (Mask{1} << j);
    }
  }

 private:
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  int pick(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(rng_()) * static_cast<unsigned>(n)) >> 64);
  }
  static int nth_bit(Mask s, int n) {
    for (int k = 0; k < n; ++k) s &= s - 1;
    return std::countr_zero(s);
  }

  PairwiseParams p_;
  Support support_;
  std::mt19937_64 rng_;
  int k_;
  Mask state_ = 0;
};

// Packed feature averages over `sweeps` sweeps of the chain.
Eigen::VectorXd sample_features(PairwiseSampler& sampler, int k, long sweeps) {
  Eigen::VectorXd first = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd pairs = Eigen::MatrixXd::Zero(k, k);
  for (long t = 0; t < sweeps; ++t) {
    sampler.sweep();
    const Mask s = sampler.state();
    for_each_bit(s, [&](int i) {
      first(i) += 1.0;
      for_each_bit(s & low_bits(i), [&](int j) { pairs(i, j) += 1.0; });
    });
  }
  first /= static_cast<double>(sweeps);
  pairs /= static_cast<double>(sweeps);
  pairs = pairs.selfadjointView<Eigen::Lower>();
  pairs.diagonal() = first;
  return pack_moments(first, pairs);
}

struct SampledFit {
  Eigen::VectorXd theta;
  int iterations = 0;
  double sampled_residual = 0.0;
  std::vector<double> history;
};

SampledFit sampled_fit(const Eigen::VectorXd& target, const Eigen::VectorXd& theta0,
                       const Support& support, const SamplerOptions& o, std::uint64_t seed) {
  const int k = support.n_modes;
  SampledFit fit;
  Eigen::VectorXd theta = theta0;
  Eigen::VectorXd average = Eigen::VectorXd::Zero(theta.size());
  int averaged = 0;
  PairwiseSampler sampler(unpack_parameters(theta, k), support, seed);
  for (int b = 0; b < o.burn_in; ++b) sampler.sweep();
  const double decay = std::max(1.0, o.iterations / 10.0);
  for (int it = 0; it < o.iterations; ++it) {
    sampler.set_params(unpack_parameters(theta, k));
    const Eigen::VectorXd grad = target - sample_features(sampler, k, o.sweeps_per_iteration);
    fit.history.push_back(max_moment_residual(grad, k));
    theta -= (o.learning_rate / (1.0 + it / decay)) * grad;
    if (2 * it >= o.iterations) {
      average += theta;
      ++averaged;
    }
  }
  fit.theta = averaged > 0 ? Eigen::VectorXd(average / averaged) : theta;
  sampler.set_params(unpack_parameters(fit.theta, k));
  for (int b = 0; b < o.burn_in; ++b) sampler.sweep();
  const Eigen::VectorXd est = sample_features(sampler, k, o.final_sweeps);
  fit.sampled_residual = max_moment_residual(target - est, k);
  fit.iterations = o.iterations;
  return fit;
}

}  // namespace

// ---------------------------------------------------------------- gauge

void canonicalize_sector_gauge(PairwiseParams& p, int particles) {
  const int k = p.n_modes();
  if (k <= 2) return;
  Eigen::VectorXd rows = p.v.rowwise().sum() - p.v.diagonal();
  const double total = rows.sum();
  const double a_sum = -total / (2.0 * k - 2.0);
  const Eigen::VectorXd a = (-(rows.array() + a_sum) / (k - 2.0)).matrix();
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (i != j) p.v(i, j) += a(i) + a(j);
  p.lambdas -= 2.0 * (particles - 1) * a;
}

// ---------------------------------------------------------------- CGGE

CGGEModel fit_cgge(const MomentTargets& targets, const CGGEOptions& o) {
  const int n = targets.n_modes();
  if (n < 1 || n > max_modes) throw InvalidArgument("mode count out of range");
  if (targets.pairs.rows() != n || targets.pairs.cols() != n)
    throw InvalidArgument("pair moments must be N x N");
  if (o.particles > n) throw InvalidArgument("sector particle number exceeds mode count");

  CGGEModel model;
  model.warnings = realizability_issues(targets, o.particles);
  model.support = o.particles < 0 ? Support::full_space(n) : Support::sector(n, o.particles);
  model.backend = o.backend == Backend::exact ? "exact" : "sampled";
  model.tolerance = o.tolerance;

  const GGEModel gge = fit_gge(targets);
  model.frozen_empty = gge.frozen_empty;
  model.frozen_full = gge.frozen_full;

  PairwiseParams start = PairwiseParams::independent(gge.lambdas);
  for_each_bit(gge.saturated(), [&](int j) { start.lambdas(j) = 0.0; });
  Reduced r = reduce(start, model.frozen_empty, model.frozen_full, model.support);
  const int k = r.params.n_modes();

  Eigen::VectorXd h(k);
  Eigen::MatrixXd c(k, k);
  for (int a = 0; a < k; ++a) {
    h(a) = targets.means(r.modes[a]);
    for (int b = 0; b < k; ++b) c(a, b) = targets.pairs(r.modes[a], r.modes[b]);
  }
  c.diagonal() = h;
  const Eigen::VectorXd target = pack_moments(h, c);

  const auto finish = [&](const Eigen::VectorXd& theta) {
    r.params = unpack_parameters(theta, k);
    if (!r.support.is_full()) canonicalize_sector_gauge(r.params, r.support.particles);
    model.lambdas = gge.lambdas;
    model.v = Eigen::MatrixXd::Zero(n, n);
    for (int a = 0; a < k; ++a) {
      model.lambdas(r.modes[a]) = r.params.lambdas(a);
      for (int b = 0; b < k; ++b) model.v(r.modes[a], r.modes[b]) = r.params.v(a, b);
    }
  };

  if (k == 0) {
    finish(Eigen::VectorXd::Zero(0));
    model.log_z = 0.0;
    model.converged = true;
    model.optimizer = "none";
    return model;
  }

  if (o.backend == Backend::exact) {
    if (r.support.size() > o.budget || k > 48)
      throw BudgetExceeded("exact fit needs " + std::to_string(r.support.size()) +
                           " configurations; raise the budget or use the sampled backend");
    const bool newton = o.optimizer != OptimizerKind::lbfgs;
    const ObjectiveFn f = [&](const Eigen::VectorXd& theta, bool want_hessian) {
      const PairwiseParams p = unpack_parameters(theta, k);
      FamilyStats s = family_stats(p, r.support, o.threads, want_hessian);
      Evaluation e;
      e.gradient = target - pack_moments(s.means, s.pairs);
      e.value = s.log_z + theta.dot(target);
      e.residual = max_moment_residual(e.gradient, k);
      if (want_hessian) e.hessian = std::move(s.covariance);
      return e;
    };
    OptimizerOptions oo;
    oo.tolerance = o.tolerance;
    oo.max_iterations = o.max_iterations > 0 ? o.max_iterations : (newton ? 200 : 5000);
    const OptimizerResult res =
        newton ? newton_minimize(f, pack_parameters(r.params), oo) : lbfgs_minimize(f, pack_parameters(r.params), oo);
    model.optimizer = newton ? "newton" : "lbfgs";
    model.iterations = res.iterations;
    model.residual = res.last.residual;
    model.converged = res.converged;
    model.objective_history = res.accepted_values;
    finish(res.x);
  } else {
    SamplerOptions so = o.sampler;
    if (o.max_iterations > 0) so.iterations = o.max_iterations;
    const SampledFit fit = sampled_fit(target, pack_parameters(r.params), r.support, so, o.seed);
    model.optimizer = "stochastic-approximation";
    model.iterations = fit.iterations;
    model.objective_history = fit.history;
    finish(fit.theta);
    model.residual = fit.sampled_residual;
    if (r.support.size() <= o.budget && k <= 48) {
      const FamilyStats s = family_stats(r.params, r.support, o.threads);
      model.residual = max_moment_residual(target - pack_moments(s.means, s.pairs), k);
    }
    model.converged = model.residual <= o.tolerance;
  }

  if (r.support.size() <= o.budget && k <= 48) {
    model.log_z = family_stats(r.params, r.support, o.threads).log_z;
  } else {
    model.log_z = std::numeric_limits<double>::quiet_NaN();
    model.warnings.push_back("log partition function not evaluated: support exceeds the budget");
  }
  if (!model.converged && !o.allow_unconverged) {
    std::ostringstream msg;
    msg.precision(6);
    msg << "correlated fit stopped after " << model.iterations << " iterations with moment residual "
        << model.residual << " (tolerance " << o.tolerance << ")";
    throw NonConvergence(msg.str(), model.residual);
  }
  return model;
}

// ---------------------------------------------------------------- models

bool EnsembleModel::allows(Mask s) const {
  return support.contains(s) && (s & frozen_empty) == 0 && (s & frozen_full) == frozen_full;
}

double EnsembleModel::log_probability(Mask s) const {
  if (!allows(s)) return -inf;
  return -config_energy(params, s) - log_z;
}

namespace {

EnsembleModel independent_model(std::string name, const Eigen::VectorXd& lambdas, Mask empty,
                                 Mask full, const Support& support) {
  const int n = static_cast<int>(lambdas.size());
  if (support.n_modes != n) throw SupportMismatch("support and model disagree on mode count");
  EnsembleModel m;
  m.name = std::move(name);
  m.params = PairwiseParams::independent(lambdas);
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(lambdas(j))) {
      m.params.lambdas(j) = 0.0;
      if (lambdas(j) > 0) empty |= Mask{1} << j;
      else full |= Mask{1} << j;
    }
  }
  m.frozen_empty = empty;
  m.frozen_full = full;
  m.support = support;
  const Reduced r = reduce(m.params, empty, full, support);
  m.log_z = sector_or_full_independent_log_z(r.params.lambdas, r.support);
  if (!std::isfinite(m.log_z)) throw SupportMismatch("model has no weight on the requested support");
  return m;
}

}  // namespace

EnsembleModel make_model(const GGEModel& gge, const Support& support) {
  return independent_model("GGE", gge.lambdas, gge.frozen_empty, gge.frozen_full, support);
}

EnsembleModel make_model(const GCEModel& gce, const Eigen::VectorXd& energies, const Support& support) {
  return independent_model("GCE", gce.lambdas(energies), 0, 0, support);
}

EnsembleModel make_model(const CGGEModel& cgge) {
  EnsembleModel m;
  m.name = "CGGE";
  m.params.lambdas = cgge.lambdas;
  m.params.v = cgge.v;
  for_each_bit(cgge.frozen_empty | cgge.frozen_full, [&](int j) {
    m.params.lambdas(j) = 0.0;
    m.params.v.row(j).setZero();
    m.params.v.col(j).setZero();
  });
  m.frozen_empty = cgge.frozen_empty;
  m.frozen_full = cgge.frozen_full;
  m.support = cgge.support;
  m.log_z = cgge.log_z;
  if (!std::isfinite(m.log_z)) {
    const Reduced r = reduce(m.params, m.frozen_empty, m.frozen_full, m.support);
    m.log_z = reduced_stats(r, 0).log_z;
  }
  return m;
}

DiagonalDistribution model_distribution(const EnsembleModel& model, std::uint64_t budget, int threads) {
  const Support& sup = model.support;
  const std::uint64_t count = sup.size();
  if (count > budget)
    throw BudgetExceeded(describe(sup) + " has " + std::to_string(count) +
                         " configurations, above the budget of " + std::to_string(budget));
  DiagonalDistribution d;
  d.support = sup;
  d.probabilities.resize(count);
  if (!sup.is_full()) d.configs = enumerate_configs(sup.n_modes, sup.particles, budget);
  const std::uint64_t chunk = 1 << 16;
  run_chunks<int>((count + chunk - 1) / chunk, threads, [&](std::uint64_t c) {
    const std::uint64_t end = std::min(count, (c + 1) * chunk);
    for (std::uint64_t i = c * chunk; i < end; ++i)
      d.probabilities[i] = std::exp(model.log_probability(d.config(i)));
    return 0;
  });
  return d;
}

FamilyStats model_stats(const EnsembleModel& model, int threads) {
  const int n = model.n_modes();
  const Reduced r = reduce(model.params, model.frozen_empty, model.frozen_full, model.support);
  const FamilyStats rs = reduced_stats(r, threads);
  FamilyStats s;
  s.log_z = rs.log_z;
  s.means = Eigen::VectorXd::Zero(n);
  s.pairs = Eigen::MatrixXd::Zero(n, n);
  for_each_bit(model.frozen_full, [&](int j) { s.means(j) = 1.0; });
  const int k = static_cast<int>(r.modes.size());
  for (int a = 0; a < k; ++a) s.means(r.modes[a]) = rs.means(a);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const bool fi = (model.frozen_full >> i) & 1, fj = (model.frozen_full >> j) & 1;
      if (fi && fj) s.pairs(i, j) = 1.0;
      else if (fi) s.pairs(i, j) = s.means(j);
      else if (fj) s.pairs(i, j) = s.means(i);
    }
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) s.pairs(r.modes[a], r.modes[b]) = rs.pairs(a, b);
  s.pairs.diagonal() = s.means;
  return s;
}

double model_entropy(const EnsembleModel& model, int threads) {
  const Reduced r = reduce(model.params, model.frozen_empty, model.frozen_full, model.support);
  if (r.params.n_modes() == 0) return 0.0;
  return reduced_stats(r, threads).entropy(r.params);
}

double model_entropy_enumerated(const EnsembleModel& model, int threads) {
  return shannon_entropy(model_distribution(model, default_config_budget, threads).probabilities);
}

// ---------------------------------------------------------------- JSON

namespace {

nlohmann::json number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double number_from(const nlohmann::json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return inf;
    if (s == "-inf") return -inf;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw InvalidArgument("unexpected number string '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace

nlohmann::json to_json(const CGGEModel& m) {
  nlohmann::json j;
  const int n = static_cast<int>(m.lambdas.size());
  j["n_modes"] = n;
  j["particles"] = m.support.particles;
  nlohmann::json lambdas = nlohmann::json::array();
  for (int i = 0; i < n; ++i) lambdas.push_back(number(m.lambdas(i)));
  j["lambdas"] = std::move(lambdas);
  nlohmann::json v = nlohmann::json::array();
  for (int i = 1; i < n; ++i)
    for (int k = 0; k < i; ++k) v.push_back(number(m.v(i, k)));
  j["v"] = std::move(v);
  j["log_z"] = number(m.log_z);
  j["backend"] = m.backend;
  j["optimizer"] = m.optimizer;
  j["tolerance"] = m.tolerance;
  j["iterations"] = m.iterations;
  j["residual"] = number(m.residual);
  j["converged"] = m.converged;
  j["frozen_empty"] = mask_to_modes(m.frozen_empty);
  j["frozen_full"] = mask_to_modes(m.frozen_full);
  j["warnings"] = m.warnings;
  return j;
}

CGGEModel cgge_from_json(const nlohmann::json& j) {
  try {
    CGGEModel m;
    const auto& lambdas = j.at("lambdas");
    const int n = static_cast<int>(lambdas.size());
    if (n < 1 || n > max_modes) throw InvalidArgument("model has an invalid mode count");
    m.lambdas.resize(n);
    for (int i = 0; i < n; ++i) m.lambdas(i) = number_from(lambdas[i]);
    const auto& v = j.at("v");
    if (static_cast<int>(v.size()) != n * (n - 1) / 2) throw InvalidArgument("model V has wrong length");
    m.v = Eigen::MatrixXd::Zero(n, n);
    std::size_t k = 0;
    for (int i = 1; i < n; ++i)
      for (int l = 0; l < i; ++l, ++k) m.v(i, l) = m.v(l, i) = number_from(v[k]);
    const int particles = j.value("particles", -1);
    m.support = particles < 0 ? Support::full_space(n) : Support::sector(n, particles);
    m.log_z = number_from(j.at("log_z"));
    m.backend = j.at("backend").get<std::string>();
    m.optimizer = j.value("optimizer", std::string{});
    m.tolerance = j.at("tolerance").get<double>();
    m.iterations = j.at("iterations").get<int>();
    if (j.contains("residual")) m.residual = number_from(j["residual"]);
    m.converged = j.value("converged", true);
    if (j.contains("frozen_empty")) m.frozen_empty = modes_to_mask(j["frozen_empty"].get<std::vector<int>>());
    if (j.contains("frozen_full")) m.frozen_full = modes_to_mask(j["frozen_full"].get<std::vector<int>>());
    if (j.contains("warnings")) m.warnings = j["warnings"].get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace qens
