#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cmath>
#include <complex>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "qens/combinatorics.hpp"
#include "qens/lattice.hpp"

namespace qens {

inline constexpr std::uint64_t default_config_budget = 200'000'000;

/// Set of Fock configurations a distribution lives on: either the full
/// 2^N space (indexed by the mask itself) or the fixed particle-number sector
/// (indexed by lexicographic rank).
struct Support {
  int n_modes = 0;
  int particles = -1;  // -1 selects the full Fock space

  static Support full_space(int n) { return {n, -1}; }
  static Support sector(int n, int m) { return {n, m}; }

  bool is_full() const { return particles < 0; }
  std::uint64_t size() const;
  bool contains(Mask s) const;
  Mask config(std::uint64_t index) const;
  std::uint64_t index(Mask s) const;

  friend bool operator==(const Support&, const Support&) = default;
};

std::string describe(const Support& support);

/// Calls f(s) for every config of the (n, m) sector in lexicographic order.
template <class F>
void for_each_config(int n, int m, F&& f) {
  Mask s = low_bits(m);
  do {
    f(s);
  } while (lex_next(n, s));
}

/// Materialized (n, m) sector in lexicographic order. Throws BudgetExceeded
/// when C(n, m) is larger than `budget`; stream with for_each_config instead.
std::vector<Mask> enumerate_configs(int n, int m, std::uint64_t budget = default_config_budget);

/// Classical distribution over the configurations of a support. Sector
/// supports keep the config list next to the probabilities.
struct DiagonalDistribution {
  Support support;
  std::vector<double> probabilities;
  std::vector<Mask> configs;  // empty for the full space (index == mask)

  std::size_t size() const { return probabilities.size(); }
  Mask config(std::size_t i) const { return configs.empty() ? Mask{i} : configs[i]; }
  double total() const;
};

/// Point mass on one config of the support.
DiagonalDistribution point_mass(const Support& support, Mask s);

/// Lifts a sector distribution into the full Fock space (N <= 26).
DiagonalDistribution embed_in_full_space(const DiagonalDistribution& dist);

/// First moments h_j = <n_j> and pair moments C_ij = <n_i n_j> (C_ii = h_i).
struct MomentTargets {
  Eigen::VectorXd means;
  Eigen::MatrixXd pairs;

  int n_modes() const { return static_cast<int>(means.size()); }
};

/// Violations of the realizability conditions a diagonal-ensemble moment set
/// must satisfy; empty when none.
std::vector<std::string> realizability_issues(const MomentTargets& targets, int particles,
                                              double tol = 1e-8);

struct EnergyHistogram {
  double bin_width = 1.0;
  double origin = 0.0;
  long first_bin = 0;          // index of masses[0] relative to origin
  std::vector<double> masses;  // contiguous bins

  double lower_edge(std::size_t i) const {
    if (!std::isfinite(bin_width)) return origin;
    return origin + static_cast<double>(first_bin + static_cast<long>(i)) * bin_width;
  }
  std::vector<std::pair<double, double>> bins() const;
  double total() const;
};

/// Bin of energy e on the grid [origin + k w, origin + (k + 1) w). Energies
/// within 1e-9 of an upper edge count towards the next bin, so sums evaluated
/// in different orders land in the same bin.
long energy_bin(double e, double origin, double bin_width);

/// Sparse-to-dense histogram accumulator on a fixed grid.
class HistogramBuilder {
 public:
  HistogramBuilder(double origin, double bin_width);
  void add(double energy, double mass);
  void merge(const HistogramBuilder& other);
  EnergyHistogram finish() const;
  double origin() const { return origin_; }
  double bin_width() const { return bin_width_; }

 private:
  void add_to_bin(long k, double mass);

  double origin_;
  double bin_width_;
  long first_ = 0;
  std::vector<double> sum_;
  std::vector<double> carry_;
};

/// E(s) = sum of the mode energies occupied in s, summed in mode order.
double config_energy(const Eigen::VectorXd& energies, Mask s);

/// Lowest many-body energy on a support.
double support_ground_energy(const Eigen::VectorXd& energies, const Support& support);

/// |det U_S|^2, the diagonal-ensemble weight of config s.
double de_probability(const OverlapMatrix& u, Mask s);

/// Materialized diagonal ensemble on the particle sector of `u`.
DiagonalDistribution de_distribution(const OverlapMatrix& u,
                                     std::uint64_t budget = default_config_budget,
                                     int threads = 0);

/// -sum p ln p with 0 ln 0 = 0, compensated.
double de_entropy(const DiagonalDistribution& dist);
double shannon_entropy(const std::vector<double>& probabilities);

/// Diagonal-ensemble moments from the one-body density matrix via Wick's
/// theorem: C_ij = g_ii g_jj - g_ij^2 for i != j.
MomentTargets wick_moments(const CorrelationMatrix& g);

/// Moments of an explicit distribution by enumeration.
MomentTargets enumerated_moments(const DiagonalDistribution& dist);

EnergyHistogram energy_histogram(const DiagonalDistribution& dist, const Eigen::VectorXd& energies,
                                 double bin_width);
EnergyHistogram energy_histogram(const DiagonalDistribution& dist, const Eigen::VectorXd& energies,
                                 double bin_width, double origin);

/// Exact evolution of the initial Slater determinant in the sector basis,
/// c_s(t) = c_s(0) exp(-i E(s) t). Brute force by design.
struct TimeSample {
  double time = 0.0;
  Eigen::VectorXd occupations;  // <n_i>(t)
  Eigen::MatrixXd pairs;        // <n_i n_j>(t)
  Eigen::MatrixXcd g;           // <a_i^dag a_j>(t)
};

inline constexpr std::uint64_t oracle_config_limit = 10'000;

std::vector<TimeSample> time_evolution_oracle(const OverlapMatrix& u, const ModeBasis& basis,
                                              const std::vector<double>& times);

/// Running time average of the oracle without storing every sample.
struct TimeAverage {
  Eigen::VectorXd occupations;
  Eigen::MatrixXd pairs;
  Eigen::MatrixXcd g;
  double max_abs_g_drift = 0.0;   // max over samples of | |g_ij(t)| - |g_ij(0)| |
  double max_pair_drift = 0.0;    // max over samples of |<n_i n_j>(t) - <n_i n_j>(0)|
  int samples = 0;
};

TimeAverage time_averaged_oracle(const OverlapMatrix& u, const ModeBasis& basis,
                                 double horizon, int samples);

/// Little-endian binary export: "QENSDIST" magic, u32 version (1), u32 n_modes,
/// i32 particles (-1 = full space), u32 reserved, u64 count, then count
/// records of (u64 config mask, f64 probability).
void write_distribution_binary(std::ostream& out, const DiagonalDistribution& dist);
DiagonalDistribution read_distribution_binary(std::istream& in);
/// CSV export: header "config,probability", config as an unsigned integer.
void write_distribution_csv(std::ostream& out, const DiagonalDistribution& dist);

}  // namespace qens
