#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "nlohmann/json_fwd.hpp"
#include "qens/fock_ensembles.hpp"
#include "qens/lattice.hpp"
#include "qens/pairwise_family.hpp"

namespace qens {

/// Occupations closer than this to 0 or 1 are frozen: their multipliers
/// diverge, so they are pinned rather than fitted.
inline constexpr double saturation_tol = 1e-12;

/// Independent-mode ensemble exp(-sum lambda_j n_j) matching every mode
/// occupation.
struct GGEModel {
  Eigen::VectorXd lambdas;  // +inf for modes frozen empty, -inf for frozen full
  Eigen::VectorXd occupations;
  Mask frozen_empty = 0;
  Mask frozen_full = 0;

  Mask saturated() const { return frozen_empty | frozen_full; }
  /// Sum of binary entropies of the occupations.
  double entropy() const;
};

GGEModel fit_gge(const MomentTargets& targets, double saturation = saturation_tol);
GGEModel fit_gge(const Eigen::VectorXd& occupations, double saturation = saturation_tol);

/// Thermal ensemble f(e) = 1 / (exp(beta e + alpha) + 1), alpha = -beta mu,
/// matching the mean energy and particle number.
struct GCEModel {
  double beta = 0.0;
  double mu = 0.0;
  double alpha = 0.0;
  /// beta = +-inf: the ensemble is the ground (or highest) state itself.
  bool zero_temperature = false;
  double particle_residual = 0.0;
  double energy_residual = 0.0;

  Eigen::VectorXd occupations(const Eigen::VectorXd& energies) const;
  /// lambda_j = beta e_j + alpha, infinite entries for frozen modes.
  Eigen::VectorXd lambdas(const Eigen::VectorXd& energies) const;
  double entropy(const Eigen::VectorXd& energies) const;
};

GCEModel fit_gce(const Eigen::VectorXd& energies, double e_target, double m_target);
GCEModel fit_gce(const ModeBasis& basis, double e_target, double m_target);

enum class Backend { exact, sampled };
enum class OptimizerKind { automatic, newton, lbfgs };

struct SamplerOptions {
  int iterations = 600;
  int sweeps_per_iteration = 400;
  int burn_in = 200;
  int final_sweeps = 1'000'000;
  double learning_rate = 0.5;
};

struct CGGEOptions {
  Backend backend = Backend::exact;
  /// Fixed-particle sector when >= 0, full Fock space when -1.
  int particles = -1;
  double tolerance = 1e-8;  // set to 1e-3 for the sampled backend
  int max_iterations = 0;   // 0 = optimizer default
  /// automatic: Newton for the exact backend.
  OptimizerKind optimizer = OptimizerKind::automatic;
  std::uint64_t budget = default_config_budget;
  std::uint64_t seed = 0x5eed;
  SamplerOptions sampler;
  int threads = 0;
  /// Return the last iterate instead of throwing NonConvergence.
  bool allow_unconverged = false;
};

/// Correlated ensemble exp(-sum lambda_j n_j - sum_{i!=j} V_ij n_i n_j) / Z.
struct CGGEModel {
  Eigen::VectorXd lambdas;  // +-inf on frozen modes
  Eigen::MatrixXd v;        // symmetric, zero diagonal, zero on frozen modes
  Mask frozen_empty = 0;
  Mask frozen_full = 0;
  Support support;
  double log_z = 0.0;
  std::string backend = "exact";
  std::string optimizer;
  double tolerance = 0.0;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  std::vector<double> objective_history;
  std::vector<std::string> warnings;
};

CGGEModel fit_cgge(const MomentTargets& targets, const CGGEOptions& options);

/// Any of the ensembles above as a normalized distribution on a support.
/// Frozen modes are pinned; parameters of frozen modes are ignored.
struct EnsembleModel {
  std::string name;
  PairwiseParams params;
  Mask frozen_empty = 0;
  Mask frozen_full = 0;
  Support support;
  double log_z = 0.0;

  int n_modes() const { return params.n_modes(); }
  Mask active() const { return low_bits(n_modes()) & ~(frozen_empty | frozen_full); }
  bool allows(Mask s) const;
  /// -inf outside the support or when a frozen mode is violated.
  double log_probability(Mask s) const;
};

/// Independent-mode ensembles; on a sector support the normalization is
/// recomputed, i.e. the ensemble is projected onto fixed particle number.
EnsembleModel make_model(const GGEModel& gge, const Support& support);
EnsembleModel make_model(const GCEModel& gce, const Eigen::VectorXd& energies, const Support& support);
EnsembleModel make_model(const CGGEModel& cgge);

DiagonalDistribution model_distribution(const EnsembleModel& model,
                                        std::uint64_t budget = default_config_budget, int threads = 0);

/// Moments over all N modes (frozen modes included).
FamilyStats model_stats(const EnsembleModel& model, int threads = 0);
/// S = sum lambda_j <n_j> + sum V_ij <n_i n_j> + ln Z.
double model_entropy(const EnsembleModel& model, int threads = 0);
/// -sum p ln p over the materialized distribution.
double model_entropy_enumerated(const EnsembleModel& model, int threads = 0);

/// Brings a sector fit to the gauge in which every row of V sums to zero
/// (the minimum-Frobenius-norm V among all parameter sets describing the
/// same sector distribution).
void canonicalize_sector_gauge(PairwiseParams& params, int particles);

nlohmann::json to_json(const CGGEModel& model);
CGGEModel cgge_from_json(const nlohmann::json& j);

}  // namespace qens
