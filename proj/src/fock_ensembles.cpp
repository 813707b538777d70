#include "qens/fock_ensembles.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "qens/determinant.hpp"
#include "qens/error.hpp"
#include "qens/parallel.hpp"

namespace qens {

std::uint64_t Support::size() const {
  if (is_full()) {
    if (n_modes >= 64) throw BudgetExceeded("full Fock space of 64 modes is not indexable");
    return std::uint64_t{1} << n_modes;
  }
  return binomial(n_modes, particles);
}

bool Support::contains(Mask s) const {
  if ((s & ~low_bits(n_modes)) != 0) return false;
  return is_full() || popcount(s) == particles;
}

Mask Support::config(std::uint64_t index) const {
  return is_full() ? Mask{index} : lex_unrank(n_modes, particles, index);
}

std::uint64_t Support::index(Mask s) const {
  if (!contains(s)) throw SupportMismatch("config outside support");
  return is_full() ? std::uint64_t{s} : lex_rank(n_modes, s);
}

std::string describe(const Support& support) {
  std::ostringstream out;
  if (support.is_full()) out << "full(N=" << support.n_modes << ")";
  else out << "sector(N=" << support.n_modes << ",M=" << support.particles << ")";
  return out.str();
}

std::vector<Mask> enumerate_configs(int n, int m, std::uint64_t budget) {
  if (n < 0 || n > max_modes || m < 0 || m > n)
    throw InvalidArgument("enumerate_configs requires 0 <= m <= n <= 64");
  const std::uint64_t count = binomial(n, m);
  if (count > budget) {
    std::ostringstream msg;
    msg << "C(" << n << "," << m << ") = " << count << " configs exceed the budget of " << budget
        << "; use streaming mode";
    throw BudgetExceeded(msg.str());
  }
  std::vector<Mask> configs;
  configs.reserve(count);
  for_each_config(n, m, [&](Mask s) { configs.push_back(s); });
  return configs;
}

double DiagonalDistribution::total() const {
  CompensatedSum sum;
  for (double p : probabilities) sum.add(p);
  return sum.value();
}

DiagonalDistribution point_mass(const Support& support, Mask s) {
  DiagonalDistribution dist{support, {}, {}};
  if (!support.contains(s)) throw SupportMismatch("point mass outside support");
  if (support.is_full()) {
    dist.probabilities.assign(support.size(), 0.0);
    dist.probabilities[s] = 1.0;
  } else {
    dist.configs = enumerate_configs(support.n_modes, support.particles);
    dist.probabilities.assign(dist.configs.size(), 0.0);
    dist.probabilities[support.index(s)] = 1.0;
  }
  return dist;
}

DiagonalDistribution embed_in_full_space(const DiagonalDistribution& dist) {
  if (dist.support.is_full()) return dist;
  if (dist.support.n_modes > 26) throw BudgetExceeded("full-space embedding limited to 26 modes");
  DiagonalDistribution full{Support::full_space(dist.support.n_modes), {}, {}};
  full.probabilities.assign(full.support.size(), 0.0);
  for (std::size_t i = 0; i < dist.size(); ++i) full.probabilities[dist.config(i)] = dist.probabilities[i];
  return full;
}

std::vector<std::string> realizability_issues(const MomentTargets& t, int particles, double tol) {
  std::vector<std::string> issues;
  const int n = t.n_modes();
  if (t.pairs.rows() != n || t.pairs.cols() != n) {
    issues.push_back("pair matrix shape does not match means");
    return issues;
  }
  for (int i = 0; i < n; ++i) {
    if (t.means(i) < -tol || t.means(i) > 1 + tol)
      issues.push_back("mean of mode " + std::to_string(i) + " outside [0,1]");
    if (std::abs(t.pairs(i, i) - t.means(i)) > tol)
      issues.push_back("pair diagonal of mode " + std::to_string(i) + " differs from its mean");
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double c = t.pairs(i, j);
      if (std::abs(c - t.pairs(j, i)) > tol) issues.push_back("pair matrix not symmetric");
      if (c < -tol || c > std::min(t.means(i), t.means(j)) + tol)
        issues.push_back("pair moment (" + std::to_string(i) + "," + std::to_string(j) +
                         ") outside [0, min(h_i, h_j)]");
      if (c < t.means(i) + t.means(j) - 1 - tol)
        issues.push_back("pair moment (" + std::to_string(i) + "," + std::to_string(j) +
                         ") below h_i + h_j - 1");
    }
  }
  if (particles >= 0) {
    if (std::abs(t.means.sum() - particles) > tol) issues.push_back("means do not sum to M");
    if (std::abs(t.pairs.sum() - double(particles) * particles) > tol * std::max(1, particles * particles))
      issues.push_back("pair moments do not sum to M^2");
  }
  return issues;
}

std::vector<std::pair<double, double>> EnergyHistogram::bins() const {
  std::vector<std::pair<double, double>> out;
  out.reserve(masses.size());
  for (std::size_t i = 0; i < masses.size(); ++i) out.emplace_back(lower_edge(i), masses[i]);
  return out;
}

double EnergyHistogram::total() const {
  CompensatedSum sum;
  for (double m : masses) sum.add(m);
  return sum.value();
}

long energy_bin(double e, double origin, double bin_width) {
  return static_cast<long>(std::floor((e - origin) / bin_width + 1e-9));
}

HistogramBuilder::HistogramBuilder(double origin, double bin_width)
    : origin_(origin), bin_width_(bin_width) {
  if (!(bin_width > 0)) throw InvalidArgument("bin width must be positive");
}

void HistogramBuilder::add(double energy, double mass) {
  if (mass == 0.0) return;
  add_to_bin(std::isfinite(bin_width_) ? energy_bin(energy, origin_, bin_width_) : 0, mass);
}

void HistogramBuilder::add_to_bin(long k, double mass) {
  if (sum_.empty()) {
    first_ = k;
    sum_.assign(1, 0.0);
    carry_.assign(1, 0.0);
  } else if (k < first_) {
    const std::size_t grow = static_cast<std::size_t>(first_ - k);
    sum_.insert(sum_.begin(), grow, 0.0);
    carry_.insert(carry_.begin(), grow, 0.0);
    first_ = k;
  } else if (k >= first_ + static_cast<long>(sum_.size())) {
    sum_.resize(static_cast<std::size_t>(k - first_ + 1), 0.0);
    carry_.resize(sum_.size(), 0.0);
  }
  const std::size_t i = static_cast<std::size_t>(k - first_);
  CompensatedSum acc{sum_[i], carry_[i]};
  acc.add(mass);
  sum_[i] = acc.sum;
  carry_[i] = acc.carry;
}

void HistogramBuilder::merge(const HistogramBuilder& other) {
  if (other.origin_ != origin_ || other.bin_width_ != bin_width_)
    throw InvalidArgument("histogram grids differ");
  for (std::size_t i = 0; i < other.sum_.size(); ++i) {
    add_to_bin(other.first_ + static_cast<long>(i), other.sum_[i]);
    add_to_bin(other.first_ + static_cast<long>(i), other.carry_[i]);
  }
}

EnergyHistogram HistogramBuilder::finish() const {
  EnergyHistogram h;
  h.bin_width = bin_width_;
  h.origin = origin_;
  std::size_t lo = 0, hi = sum_.size();
  while (lo < hi && sum_[lo] + carry_[lo] == 0.0) ++lo;
  while (hi > lo && sum_[hi - 1] + carry_[hi - 1] == 0.0) --hi;
  h.first_bin = lo < hi ? first_ + static_cast<long>(lo) : 0;
  for (std::size_t i = lo; i < hi; ++i) h.masses.push_back(sum_[i] + carry_[i]);
  return h;
}

double config_energy(const Eigen::VectorXd& energies, Mask s) {
  double e = 0.0;
  for_each_bit(s, [&](int j) { e += energies(j); });
  return e;
}

double support_ground_energy(const Eigen::VectorXd& energies, const Support& support) {
  if (support.is_full()) {
    double e = 0.0;
    for (Eigen::Index j = 0; j < energies.size(); ++j) e += std::min(0.0, energies(j));
    return e;
  }
  Eigen::VectorXd sorted = energies;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  return sorted.head(support.particles).sum();
}

double de_probability(const OverlapMatrix& u, Mask s) {
  const double det = row_minor_determinant(u.u, s);
  return det * det;
}

DiagonalDistribution de_distribution(const OverlapMatrix& u, std::uint64_t budget, int threads) {
  const int n = u.n_modes(), m = u.n_particles();
  DiagonalDistribution dist{Support::sector(n, m), {}, enumerate_configs(n, m, budget)};
  const std::uint64_t count = dist.configs.size();
  dist.probabilities.resize(count);
  const std::uint64_t chunk = 4096;
  const std::uint64_t n_chunks = (count + chunk - 1) / chunk;
  run_chunks<int>(n_chunks, threads, [&](std::uint64_t c) {
    const std::uint64_t end = std::min(count, (c + 1) * chunk);
    for (std::uint64_t i = c * chunk; i < end; ++i) dist.probabilities[i] = de_probability(u, dist.configs[i]);
    return 0;
  });
  return dist;
}

double shannon_entropy(const std::vector<double>& probabilities) {
  CompensatedSum s;
  for (double p : probabilities)
    if (p > 0) s.add(-p * std::log(p));
  return s.value();
}

double de_entropy(const DiagonalDistribution& dist) { return shannon_entropy(dist.probabilities); }

MomentTargets wick_moments(const CorrelationMatrix& corr) {
  const Eigen::MatrixXd& g = corr.g;
  const int n = static_cast<int>(g.rows());
  MomentTargets t{g.diagonal(), Eigen::MatrixXd(n, n)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      t.pairs(i, j) = i == j ? g(i, i) : g(i, i) * g(j, j) - g(i, j) * g(i, j);
  return t;
}

MomentTargets enumerated_moments(const DiagonalDistribution& dist) {
  const int n = dist.support.n_modes;
  std::vector<CompensatedSum> acc(static_cast<std::size_t>(n) * n);
  for (std::size_t k = 0; k < dist.size(); ++k) {
    const double p = dist.probabilities[k];
    if (p == 0.0) continue;
    const Mask s = dist.config(k);
    for_each_bit(s, [&](int i) {
      for_each_bit(s, [&](int j) { acc[static_cast<std::size_t>(i) * n + j].add(p); });
    });
  }
  MomentTargets t{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t.pairs(i, j) = acc[static_cast<std::size_t>(i) * n + j].value();
  t.means = t.pairs.diagonal();
  return t;
}

EnergyHistogram energy_histogram(const DiagonalDistribution& dist, const Eigen::VectorXd& energies,
                                 double bin_width, double origin) {
  HistogramBuilder builder(origin, bin_width);
  for (std::size_t k = 0; k < dist.size(); ++k) {
    if (dist.probabilities[k] == 0.0) continue;
    builder.add(config_energy(energies, dist.config(k)), dist.probabilities[k]);
  }
  return builder.finish();
}

EnergyHistogram energy_histogram(const DiagonalDistribution& dist, const Eigen::VectorXd& energies,
                                 double bin_width) {
  return energy_histogram(dist, energies, bin_width, support_ground_energy(energies, dist.support));
}

namespace {

struct SectorState {
  std::vector<Mask> configs;
  Eigen::VectorXd amplitudes;
  Eigen::VectorXd energies;
};

SectorState initial_sector_state(const OverlapMatrix& u, const ModeBasis& basis) {
  const int n = u.n_modes(), m = u.n_particles();
  if (basis.size() != n) throw InvalidArgument("basis and overlap sizes differ");
  if (binomial(n, m) > oracle_config_limit)
    throw BudgetExceeded("time-evolution oracle is limited to C(N,M) <= 10^4 configs");
  SectorState st;
  st.configs = enumerate_configs(n, m);
  st.amplitudes.resize(st.configs.size());
  st.energies.resize(st.configs.size());
  for (std::size_t k = 0; k < st.configs.size(); ++k) {
    st.amplitudes(k) = row_minor_determinant(u.u, st.configs[k]);
    st.energies(k) = config_energy(basis.energies, st.configs[k]);
  }
  return st;
}

int count_below(Mask s, int j) { return popcount(s & low_bits(j)); }

TimeSample observe(const SectorState& st, int n, double t) {
  const std::size_t count = st.configs.size();
  Eigen::VectorXcd c(count);
  for (std::size_t k = 0; k < count; ++k)
    c(k) = st.amplitudes(k) * std::exp(std::complex<double>(0.0, -st.energies(k) * t));
  TimeSample out{t, Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXcd::Zero(n, n)};
  for (std::size_t k = 0; k < count; ++k) {
    const Mask s = st.configs[k];
    const double w = std::norm(c(k));
    for_each_bit(s, [&](int i) {
      out.occupations(i) += w;
      for_each_bit(s, [&](int j) { out.pairs(i, j) += w; });
    });
    // a_i^dag a_j |s> for j occupied, i empty, with fermionic ordering signs.
    for_each_bit(s, [&](int j) {
      const Mask removed = s & ~(Mask{1} << j);
      const int sign_j = count_below(s, j) & 1;
      for_each_bit(~s & low_bits(n), [&](int i) {
        const Mask target = removed | (Mask{1} << i);
        const int sign = sign_j ^ (count_below(removed, i) & 1);
        const std::size_t kt = lex_rank(n, target);
        const std::complex<double> term = std::conj(c(kt)) * c(k);
        out.g(i, j) += sign ? -term : term;
      });
    });
  }
  for (int i = 0; i < n; ++i) out.g(i, i) = out.occupations(i);
  return out;
}

}  // namespace

std::vector<TimeSample> time_evolution_oracle(const OverlapMatrix& u, const ModeBasis& basis,
                                              const std::vector<double>& times) {
  const SectorState st = initial_sector_state(u, basis);
  std::vector<TimeSample> samples;
  samples.reserve(times.size());
  for (double t : times) samples.push_back(observe(st, u.n_modes(), t));
  return samples;
}

TimeAverage time_averaged_oracle(const OverlapMatrix& u, const ModeBasis& basis, double horizon,
                                 int samples) {
  if (samples < 1) throw InvalidArgument("need at least one time sample");
  const int n = u.n_modes();
  const SectorState st = initial_sector_state(u, basis);
  const TimeSample first = observe(st, n, 0.0);
  TimeAverage avg{Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXcd::Zero(n, n), 0.0, 0.0, samples};
  const Eigen::MatrixXd g0_abs = first.g.cwiseAbs();
  for (int k = 0; k < samples; ++k) {
    const double t = horizon * k / samples;
    const TimeSample s = k == 0 ? first : observe(st, n, t);
    avg.occupations += s.occupations;
    avg.pairs += s.pairs;
    avg.g += s.g;
    avg.max_abs_g_drift = std::max(avg.max_abs_g_drift, (s.g.cwiseAbs() - g0_abs).cwiseAbs().maxCoeff());
    avg.max_pair_drift = std::max(avg.max_pair_drift, (s.pairs - first.pairs).cwiseAbs().maxCoeff());
  }
  avg.occupations /= samples;
  avg.pairs /= samples;
  avg.g /= static_cast<double>(samples);
  return avg;
}

namespace {

template <class T>
void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::uint64_t bits = 0;
  std::memcpy(&bits, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T)))
    throw Error(ErrorKind::io, "truncated distribution file");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= std::uint64_t{bytes[i]} << (8 * i);
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

constexpr char distribution_magic[8] = {'Q', 'E', 'N', 'S', 'D', 'I', 'S', 'T'};

}  // namespace

void write_distribution_binary(std::ostream& out, const DiagonalDistribution& dist) {
  out.write(distribution_magic, sizeof distribution_magic);
  put_le<std::uint32_t>(out, 1);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(dist.support.n_modes));
  put_le<std::int32_t>(out, dist.support.particles);
  put_le<std::uint32_t>(out, 0);
  put_le<std::uint64_t>(out, dist.size());
  for (std::size_t k = 0; k < dist.size(); ++k) {
    put_le<std::uint64_t>(out, dist.config(k));
    put_le<double>(out, dist.probabilities[k]);
  }
  if (!out) throw Error(ErrorKind::io, "failed to write distribution");
}

DiagonalDistribution read_distribution_binary(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, distribution_magic, 8) != 0)
    throw Error(ErrorKind::io, "not a distribution file");
  if (get_le<std::uint32_t>(in) != 1) throw Error(ErrorKind::io, "unsupported distribution version");
  DiagonalDistribution dist;
  dist.support.n_modes = static_cast<int>(get_le<std::uint32_t>(in));
  dist.support.particles = get_le<std::int32_t>(in);
  get_le<std::uint32_t>(in);
  const std::uint64_t count = get_le<std::uint64_t>(in);
  dist.probabilities.resize(count);
  if (!dist.support.is_full()) dist.configs.resize(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    const Mask s = get_le<std::uint64_t>(in);
    if (!dist.support.is_full()) dist.configs[k] = s;
    else if (s != k) throw Error(ErrorKind::io, "full-space records must be in mask order");
    dist.probabilities[k] = get_le<double>(in);
  }
  return dist;
}

void write_distribution_csv(std::ostream& out, const DiagonalDistribution& dist) {
  out << "config,probability\n";
  char buf[64];
  for (std::size_t k = 0; k < dist.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", dist.probabilities[k]);
    out << dist.config(k) << ',' << buf << '\n';
  }
}

}  // namespace qens
