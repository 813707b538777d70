#pragma once

#include <Eigen/Dense>

#include "nlohmann/json_fwd.hpp"
#include "qens/fock_ensembles.hpp"

namespace qens {

/// Squared determinants below this are rounding noise of exact zeros; they do
/// not count as support when checking p > 0 against q = 0.
inline constexpr double negligible_probability = 1e-24;

/// Relative entropy in nats. `infinite` marks p > 0 where q = 0; `value` is
/// then meaningless.
struct Divergence {
  double value = 0.0;
  bool infinite = false;
};

/// Sum p ln(p / q). q may live on a larger support than p (a sector inside the
/// full Fock space); mass of p outside the support of q makes it infinite.
Divergence kl_divergence(const DiagonalDistribution& p, const DiagonalDistribution& q);

/// (1/2) sum |p - q| over the union of both supports.
double trace_distance(const DiagonalDistribution& p, const DiagonalDistribution& q);

/// Total variation between two histograms on the same grid.
double histogram_distance(const EnergyHistogram& a, const EnergyHistogram& b);

/// Total variation between the energy histograms of p and q, binned from the
/// lowest energy either support can reach.
double coarse_grained_tv(const DiagonalDistribution& p, const DiagonalDistribution& q,
                         const Eigen::VectorXd& energies, double bin_width);

struct PinskerCheck {
  bool pass = false;
  double margin = 0.0;  // kl - 2 tv^2
};

PinskerCheck pinsker_check(double kl, double tv);
PinskerCheck pinsker_check(const Divergence& kl, double tv);

/// Best single-shot probability of telling the two ensembles apart.
double success_probability(double tv);

struct EnsembleComparison {
  Divergence kl_de_to_model;
  double trace_distance = 0.0;
  double tv_coarse = 0.0;
  double entropy_de = 0.0;
  double entropy_model = 0.0;
  double success_probability = 0.5;
};

EnsembleComparison compare(const DiagonalDistribution& de, const DiagonalDistribution& model,
                           const Eigen::VectorXd& energies, double bin_width);

/// Flat object with exactly the fields above; an infinite divergence is
/// written as the string "inf".
nlohmann::json to_json(const EnsembleComparison& c);
nlohmann::json to_json(const Divergence& d);

}  // namespace qens
