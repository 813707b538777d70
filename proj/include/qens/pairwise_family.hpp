#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "qens/combinatorics.hpp"
#include "qens/fock_ensembles.hpp"

namespace qens {

/// Coefficients of the pairwise occupation family
///   weight(s) = exp(-sum_j lambda_j s_j - sum_{i != j} V_ij s_i s_j),
/// V symmetric with zero diagonal.
struct PairwiseParams {
  Eigen::VectorXd lambdas;
  Eigen::MatrixXd v;

  int n_modes() const { return static_cast<int>(lambdas.size()); }
  static PairwiseParams independent(const Eigen::VectorXd& lambdas);
};

/// sum_j lambda_j s_j + sum_{i<j} 2 V_ij s_i s_j
double config_energy(const PairwiseParams& params, Mask s);

/// log Z and the first and pair moments E[s_j], E[s_i s_j] of the family on
/// a support. pairs.diagonal() == means.
struct FamilyStats {
  double log_z = 0.0;
  Eigen::VectorXd means;
  Eigen::MatrixXd pairs;
  std::optional<Eigen::MatrixXd> covariance;  // of the packed features, on request

  /// S = log Z + E[energy]
  double entropy(const PairwiseParams& params) const;
};

/// Packed feature layout used by the optimizers: the K occupations first,
/// then 2 s_i s_j for i > j in row-major lower-triangle order
/// (1,0) (2,0) (2,1) (3,0) ... . The matching coefficient of a pair feature is
/// V_ij, so energy = theta . phi.
int feature_count(int n_modes);
Eigen::VectorXd pack_parameters(const PairwiseParams& params);
PairwiseParams unpack_parameters(const Eigen::VectorXd& theta, int n_modes);
Eigen::VectorXd pack_moments(const Eigen::VectorXd& means, const Eigen::MatrixXd& pairs);

/// Reference evaluator: visits every config of the support directly.
/// Optionally accumulates the covariance of the packed features (the Hessian
/// of log Z), which costs O(configs * features^2).
FamilyStats enumerate_stats(const PairwiseParams& params, const Support& support,
                            bool with_covariance = false, int threads = 0);

/// Split evaluator: modes are cut into halves A and B so that the energy of
/// (a, b) is e_A(a) + e_B(b) + a^T (2 V_AB) b. Blocks of configs become dense
/// matrix products, which keeps a C(30,15) sector pass at a few seconds. The
/// feature covariance comes from the same products against indicators of all
/// subsets of up to three modes of each half.
FamilyStats split_stats(const PairwiseParams& params, const Support& support, int threads = 0,
                        bool with_covariance = false);

/// Picks the split evaluator for large supports and the direct one otherwise.
FamilyStats family_stats(const PairwiseParams& params, const Support& support, int threads = 0,
                         bool with_covariance = false);

/// log of the sector partition function of an independent-mode family,
/// log e_M(exp(-lambda)), by a stable elementary-symmetric recursion.
double independent_sector_log_z(const Eigen::VectorXd& lambdas, int particles);
/// Same recursion, returning the sector moments E[s_j] and E[s_i s_j].
FamilyStats independent_sector_stats(const Eigen::VectorXd& lambdas, int particles);

}  // namespace qens
