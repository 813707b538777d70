#include "qens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nlohmann/json.hpp"
#include "qens/error.hpp"
#include "qens/parallel.hpp"

namespace qens {

namespace {

// Probability q assigns to config s (0 outside its support).
double lookup(const DiagonalDistribution& q, Mask s) {
  if (!q.support.contains(s)) return 0.0;
  if (q.support.is_full()) return q.probabilities[s];
  return q.probabilities[lex_rank(q.support.n_modes, s)];
}

void check_compatible(const DiagonalDistribution& p, const DiagonalDistribution& q) {
  if (p.support.n_modes != q.support.n_modes)
    throw SupportMismatch("distributions over different mode counts: " + describe(p.support) + " vs " +
                          describe(q.support));
  if (p.probabilities.size() != p.support.size() || q.probabilities.size() != q.support.size())
    throw SupportMismatch("distribution does not cover its support");
}

}  // namespace

Divergence kl_divergence(const DiagonalDistribution& p, const DiagonalDistribution& q) {
  check_compatible(p, q);
  CompensatedSum sum;
  Divergence d;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p.probabilities[i];
    if (pi <= 0.0) continue;
    const double qi = lookup(q, p.config(i));
    if (qi <= 0.0) {
      if (pi <= negligible_probability) continue;
      d.infinite = true;
      continue;
    }
    sum.add(pi * (std::log(pi) - std::log(qi)));
  }
  d.value = d.infinite ? 0.0 : std::max(0.0, sum.value());
  return d;
}

double trace_distance(const DiagonalDistribution& p, const DiagonalDistribution& q) {
  check_compatible(p, q);
  // Iterate over the larger support; the smaller one is contained in it.
  const bool p_outer = p.support.is_full() || !q.support.is_full();
  const DiagonalDistribution& outer = p_outer ? p : q;
  const DiagonalDistribution& inner = p_outer ? q : p;
  if (!outer.support.is_full() && outer.support != inner.support) {
    // Two different sectors: disjoint supports.
    return 0.5 * (outer.total() + inner.total());
  }
  CompensatedSum sum;
  for (std::size_t i = 0; i < outer.size(); ++i)
    sum.add(std::abs(outer.probabilities[i] - lookup(inner, outer.config(i))));
  return std::min(1.0, 0.5 * sum.value());
}

double histogram_distance(const EnergyHistogram& a, const EnergyHistogram& b) {
  if (a.bin_width != b.bin_width || a.origin != b.origin) throw SupportMismatch("histogram grids differ");
  const long lo = std::min(a.first_bin, b.first_bin);
  const long hi = std::max(a.first_bin + static_cast<long>(a.masses.size()),
                           b.first_bin + static_cast<long>(b.masses.size()));
  const auto mass = [](const EnergyHistogram& h, long k) {
    const long i = k - h.first_bin;
    return i >= 0 && i < static_cast<long>(h.masses.size()) ? h.masses[static_cast<std::size_t>(i)] : 0.0;
  };
  CompensatedSum sum;
  for (long k = lo; k < hi; ++k) sum.add(std::abs(mass(a, k) - mass(b, k)));
  return std::min(1.0, 0.5 * sum.value());
}

double coarse_grained_tv(const DiagonalDistribution& p, const DiagonalDistribution& q,
                         const Eigen::VectorXd& energies, double bin_width) {
  check_compatible(p, q);
  const double origin = std::min(support_ground_energy(energies, p.support),
                                 support_ground_energy(energies, q.support));
  return histogram_distance(energy_histogram(p, energies, bin_width, origin),
                            energy_histogram(q, energies, bin_width, origin));
}

PinskerCheck pinsker_check(double kl, double tv) {
  const double margin = kl - 2.0 * tv * tv;
  return {kl + 1e-12 >= 2.0 * tv * tv, margin};
}

PinskerCheck pinsker_check(const Divergence& kl, double tv) {
  if (kl.infinite) return {true, std::numeric_limits<double>::infinity()};
  return pinsker_check(kl.value, tv);
}

double success_probability(double tv) {
  if (!(tv >= 0.0 && tv <= 1.0 + 1e-12)) throw InvalidArgument("distance outside [0, 1]");
  return 0.5 + 0.5 * std::min(tv, 1.0);
}

EnsembleComparison compare(const DiagonalDistribution& de, const DiagonalDistribution& model,
                           const Eigen::VectorXd& energies, double bin_width) {
  EnsembleComparison c;
  c.kl_de_to_model = kl_divergence(de, model);
  c.trace_distance = trace_distance(de, model);
  c.tv_coarse = coarse_grained_tv(de, model, energies, bin_width);
  c.entropy_de = shannon_entropy(de.probabilities);
  c.entropy_model = shannon_entropy(model.probabilities);
  c.success_probability = success_probability(c.trace_distance);
  return c;
}

nlohmann::json to_json(const Divergence& d) {
  if (d.infinite) return "inf";
  return d.value;
}

nlohmann::json to_json(const EnsembleComparison& c) {
  return {{"kl_de_to_model", to_json(c.kl_de_to_model)},
          {"trace_distance", c.trace_distance},
          {"tv_coarse", c.tv_coarse},
          {"entropy_de", c.entropy_de},
          {"entropy_model", c.entropy_model},
          {"success_probability", c.success_probability}};
}

}  // namespace qens
