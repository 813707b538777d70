#include "qens/lattice.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "qens/error.hpp"

namespace qens {

void QuenchParams::validate() const {
  if (n_sites < 2) throw InvalidArgument("n_sites must be at least 2");
  if (n_sites > 64) throw InvalidArgument("n_sites must not exceed 64");
  if (period < 1) throw InvalidArgument("period must be positive");
  if (n_particles < 1 || n_particles > n_sites)
    throw InvalidArgument("n_particles must lie in [1, n_sites]");
  if (boundary == Boundary::periodic && n_sites % period != 0)
    throw InvalidArgument("periodic boundary requires n_sites to be a multiple of period");
  if (!std::isfinite(hopping) || !std::isfinite(potential_strength))
    throw InvalidArgument("hopping and potential strength must be finite");
}

SingleParticleHamiltonian build_hamiltonian(const QuenchParams& params) {
  params.validate();
  const int n = params.n_sites;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (int x = 0; x < n; ++x) {
    // Site x carries the 1-based label j = x + 1.
    h(x, x) = params.potential_strength *
              std::cos(2.0 * std::numbers::pi * (x + 1) / params.period);
  }
  for (int x = 0; x + 1 < n; ++x) {
    h(x, x + 1) -= params.hopping;
    h(x + 1, x) -= params.hopping;
  }
  if (params.boundary == Boundary::periodic) {
    h(n - 1, 0) -= params.hopping;
    h(0, n - 1) -= params.hopping;
  }
  return {h, params};
}

namespace {

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > 1e-10) {
      if (v(i) < 0) v = -v;
      return;
    }
  }
}

// Replaces the solver's arbitrary basis of a degenerate cluster by the
// Gram-Schmidt orthonormalization of the projected site vectors, taken in
// site order. Depends only on the cluster's projector.
void canonicalize_cluster(Eigen::MatrixXd& vectors, int first, int count) {
  const Eigen::MatrixXd block = vectors.middleCols(first, count);
  const Eigen::MatrixXd projector = block * block.transpose();
  const int n = static_cast<int>(vectors.rows());
  Eigen::MatrixXd basis(n, count);
  int found = 0;
  for (int x = 0; x < n && found < count; ++x) {
    Eigen::VectorXd v = projector.col(x);
    for (int k = 0; k < found; ++k) v -= basis.col(k).dot(v) * basis.col(k);
    for (int k = 0; k < found; ++k) v -= basis.col(k).dot(v) * basis.col(k);
    const double norm = v.norm();
    if (norm < 1e-6) continue;
    basis.col(found++) = v / norm;
  }
  if (found != count) return;  // numerically impossible for a true projector
  vectors.middleCols(first, count) = basis;
}

}  // namespace

ModeBasis diagonalize(const SingleParticleHamiltonian& h, double degeneracy_tol) {
  const Eigen::MatrixXd& m = h.matrix;
  if (m.rows() != m.cols()) throw InvalidArgument("Hamiltonian must be square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-14 * (1.0 + m.cwiseAbs().maxCoeff()))
    throw InvalidArgument("Hamiltonian must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::no_solution, "eigensolver failed");

  ModeBasis basis{solver.eigenvalues(), solver.eigenvectors(), h.params};
  const int n = basis.size();
  int first = 0;
  while (first < n) {
    int last = first + 1;
    while (last < n &&
           basis.energies(last) - basis.energies(last - 1) <=
               degeneracy_tol * std::max(1.0, std::abs(basis.energies(last)))) {
      ++last;
    }
    if (last - first > 1) canonicalize_cluster(basis.vectors, first, last - first);
    first = last;
  }
  for (int j = 0; j < n; ++j) fix_sign(basis.vectors.col(j));
  return basis;
}

Eigen::MatrixXd reflection_operator(int n_sites, Boundary boundary) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n_sites, n_sites);
  for (int x = 0; x < n_sites; ++x) {
    // periodic: label j <-> -j (mod N), which fixes j = N; open: mirror the chain.
    const int image = boundary == Boundary::periodic ? ((n_sites - 2 - x) % n_sites + n_sites) % n_sites
                                                     : n_sites - 1 - x;
    r(image, x) = 1.0;
  }
  return r;
}

SlaterState ground_state(const ModeBasis& basis, int m, FermiRule rule, double degeneracy_tol) {
  const int n = basis.size();
  if (m < 1 || m > n) throw InvalidArgument("particle number must lie in [1, N]");
  if (m == n) return {basis.vectors};

  const auto& e = basis.energies;
  const double fermi = e(m - 1);
  const auto degenerate = [&](int j) {
    return std::abs(e(j) - fermi) <= degeneracy_tol * std::max(1.0, std::abs(fermi));
  };
  if (!degenerate(m)) return {basis.vectors.leftCols(m)};

  int lo = m - 1;
  while (lo > 0 && degenerate(lo - 1)) --lo;
  int hi = m;
  while (hi + 1 < n && degenerate(hi + 1)) ++hi;

  if (rule == FermiRule::none) {
    std::ostringstream msg;
    msg << "Fermi level degenerate: levels " << lo << ".." << hi << " share energy " << fermi
        << " but only " << (m - lo) << " of them are filled";
    throw FermiDegeneracy(msg.str(), lo, hi);
  }

  // Parity rule: fill the reflection-even combinations of the Fermi cluster.
  const int cluster = hi - lo + 1;
  const int needed = m - lo;
  const Eigen::MatrixXd w = basis.vectors.middleCols(lo, cluster);
  const Eigen::MatrixXd r =
      w.transpose() * reflection_operator(n, basis.params.boundary) * w;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (r + r.transpose()));
  const Eigen::VectorXd parity = solver.eigenvalues();
  int even = 0;
  for (int k = 0; k < cluster; ++k) {
    if (std::abs(parity(k) - 1.0) < 1e-8) ++even;
    else if (std::abs(parity(k) + 1.0) > 1e-8)
      throw FermiDegeneracy("parity rule: reflection does not act within the Fermi cluster", lo, hi);
  }
  if (even != needed) {
    std::ostringstream msg;
    msg << "parity rule cannot resolve Fermi level: " << even << " even states for " << needed
        << " particles (levels " << lo << ".." << hi << ")";
    throw FermiDegeneracy(msg.str(), lo, hi);
  }
  Eigen::MatrixXd orbitals(n, m);
  orbitals.leftCols(lo) = basis.vectors.leftCols(lo);
  // Eigenvalues ascend, so the even block sits at the end.
  Eigen::MatrixXd even_block = w * solver.eigenvectors().rightCols(needed);
  for (int k = 0; k < needed; ++k) fix_sign(even_block.col(k));
  orbitals.rightCols(needed) = even_block;
  return {orbitals};
}

OverlapMatrix quench_overlap(const SlaterState& state, const ModeBasis& post) {
  if (state.orbitals.rows() != post.vectors.rows())
    throw InvalidArgument("state and basis dimensions differ");
  return {post.vectors.transpose() * state.orbitals};
}

CorrelationMatrix one_body_dm(const OverlapMatrix& u) {
  return {u.u * u.u.transpose()};
}

QuenchSetup prepare_quench(const QuenchParams& params, FermiRule rule) {
  params.validate();
  QuenchParams pre_params = params;
  pre_params.potential_strength = 0.0;
  QuenchSetup setup;
  setup.params = params;
  setup.pre = diagonalize(build_hamiltonian(pre_params));
  setup.post = diagonalize(build_hamiltonian(params));
  setup.initial = ground_state(setup.pre, params.n_particles, rule);
  setup.overlap = quench_overlap(setup.initial, setup.post);
  setup.correlations = one_body_dm(setup.overlap);
  return setup;
}

}  // namespace qens
