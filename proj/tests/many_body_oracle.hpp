// Dense second-quantized reference for small lattices. Works on state vectors
// over the 2^N site Fock space with Jordan-Wigner signs and never touches a
// determinant, so it checks the Slater-overlap route independently.
#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace oracle {

using Mask = std::uint64_t;

inline Eigen::MatrixXd site_hamiltonian(int n, double t, double j, int period, bool periodic) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (int x = 0; x < n; ++x) h(x, x) = j * std::cos(2.0 * M_PI * (x + 1) / period);
  for (int x = 0; x + 1 < n; ++x) h(x, x + 1) = h(x + 1, x) = -t;
  if (periodic && n > 2) h(0, n - 1) = h(n - 1, 0) = -t;
  return h;
}

inline double jw_sign(Mask s, int x) {
  return std::popcount(s & ((Mask{1} << x) - 1)) % 2 ? -1.0 : 1.0;
}

// sum_x w_x c_x^dag applied to psi.
inline Eigen::VectorXd create(const Eigen::VectorXd& psi, const Eigen::VectorXd& w) {
  const int n = static_cast<int>(w.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(psi.size());
  for (Mask s = 0; s < static_cast<Mask>(psi.size()); ++s) {
    if (psi(s) == 0.0) continue;
    for (int x = 0; x < n; ++x) {
      if ((s >> x) & 1 || w(x) == 0.0) continue;
      out(s | (Mask{1} << x)) += w(x) * jw_sign(s, x) * psi(s);
    }
  }
  return out;
}

inline std::vector<Mask> sector_states(int n, int m) {
  std::vector<Mask> states;
  for (Mask s = 0; s < (Mask{1} << n); ++s)
    if (std::popcount(s) == m) states.push_back(s);
  return states;
}

// Ground state of sum_xy h(x,y) c_x^dag c_y in the m-particle sector.
inline Eigen::VectorXd ground_state(const Eigen::MatrixXd& h, int m) {
  const int n = static_cast<int>(h.rows());
  const std::vector<Mask> states = sector_states(n, m);
  std::vector<long> index(std::size_t{1} << n, -1);
  for (std::size_t i = 0; i < states.size(); ++i) index[states[i]] = static_cast<long>(i);
  Eigen::MatrixXd hm = Eigen::MatrixXd::Zero(states.size(), states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Mask s = states[i];
    for (int y = 0; y < n; ++y) {
      if (!((s >> y) & 1)) continue;
      const Mask s1 = s & ~(Mask{1} << y);
      const double sy = jw_sign(s1, y);
      for (int x = 0; x < n; ++x) {
        if (h(x, y) == 0.0 || (s1 >> x) & 1) continue;
        hm(index[s1 | (Mask{1} << x)], i) += h(x, y) * sy * jw_sign(s1, x);
      }
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hm);
  if (es.eigenvalues()(1) - es.eigenvalues()(0) < 1e-8) throw std::runtime_error("degenerate ground state");
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(Eigen::Index{1} << n);
  for (std::size_t i = 0; i < states.size(); ++i) psi(states[i]) = es.eigenvectors()(i, 0);
  return psi;
}

// |<s|psi>|^2 where |s> fills the post-quench modes (columns of w) listed in s.
inline double fock_probability(const Eigen::VectorXd& psi, const Eigen::MatrixXd& w, Mask s) {
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(psi.size());
  phi(0) = 1.0;
  for (int k = 0; k < w.cols(); ++k)
    if ((s >> k) & 1) phi = create(phi, w.col(k));
  const double a = phi.dot(psi);
  return a * a;
}

}  // namespace oracle
