#pragma once

#include <Eigen/Dense>

namespace qens {

enum class Boundary { periodic, open };

/// Parameters of a sudden quench of the superlattice strength in a
/// tight-binding ring. Energies are in the same units as the hopping.
struct QuenchParams {
  int n_sites = 10;
  double hopping = 1.0;
  double potential_strength = 0.0;
  int period = 5;
  int n_particles = 5;
  Boundary boundary = Boundary::periodic;

  void validate() const;
};

struct SingleParticleHamiltonian {
  Eigen::MatrixXd matrix;
  QuenchParams params;
};

/// Single-particle eigenbasis: column j of `vectors` belongs to energies(j).
/// Energies ascend; degenerate clusters carry a canonical real basis.
struct ModeBasis {
  Eigen::VectorXd energies;
  Eigen::MatrixXd vectors;
  QuenchParams params;

  int size() const { return static_cast<int>(energies.size()); }
};

/// Occupied orbitals of a Slater determinant in the site basis (N x M).
struct SlaterState {
  Eigen::MatrixXd orbitals;
};

/// U(j, k) = overlap of post-quench mode j with occupied orbital k (N x M).
struct OverlapMatrix {
  Eigen::MatrixXd u;

  int n_modes() const { return static_cast<int>(u.rows()); }
  int n_particles() const { return static_cast<int>(u.cols()); }
};

/// g(i, j) = <a_i^dag a_j> in the post-quench mode basis.
struct CorrelationMatrix {
  Eigen::MatrixXd g;
};

enum class FermiRule { none, parity };

inline constexpr double default_degeneracy_tol = 1e-9;

SingleParticleHamiltonian build_hamiltonian(const QuenchParams& params);

ModeBasis diagonalize(const SingleParticleHamiltonian& h,
                      double degeneracy_tol = default_degeneracy_tol);

/// Fills the m lowest modes. A degenerate Fermi level raises FermiDegeneracy
/// unless `rule` resolves it.
SlaterState ground_state(const ModeBasis& basis, int m,
                         FermiRule rule = FermiRule::none,
                         double degeneracy_tol = default_degeneracy_tol);

OverlapMatrix quench_overlap(const SlaterState& state, const ModeBasis& post);

CorrelationMatrix one_body_dm(const OverlapMatrix& u);

/// Site permutation matrix of the reflection that maps the lattice (and the
/// superlattice potential for periodic boundaries) onto itself.
Eigen::MatrixXd reflection_operator(int n_sites, Boundary boundary);

/// Pre-quench ground state (potential switched off) expressed in the
/// post-quench eigenbasis; the common entry point for every experiment.
struct QuenchSetup {
  QuenchParams params;
  ModeBasis pre;
  ModeBasis post;
  SlaterState initial;
  OverlapMatrix overlap;
  CorrelationMatrix correlations;
};

QuenchSetup prepare_quench(const QuenchParams& params, FermiRule rule = FermiRule::none);

}  // namespace qens
