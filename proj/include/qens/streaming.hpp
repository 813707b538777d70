#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "qens/ensemble_fit.hpp"
#include "qens/fock_ensembles.hpp"
#include "qens/metrics.hpp"

namespace qens {

struct ScanOptions {
  double bin_width = 1.0;
  /// Lower edge of bin 0; NaN selects the sector ground energy.
  double origin = std::numeric_limits<double>::quiet_NaN();
  /// Configs per work unit (revolving-door rank range).
  std::uint64_t chunk = std::uint64_t{1} << 20;
  /// Rank-one determinant updates along the walk; plain LU per config if off.
  bool fast_path = true;
  int threads = 0;
  /// Configs with energy in [window_lo, window_hi] are listed individually.
  double window_lo = std::numeric_limits<double>::quiet_NaN();
  double window_hi = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t max_window_states = 1'000'000;
};

struct WindowState {
  Mask config = 0;
  double energy = 0.0;
  double p = 0.0;
  std::vector<double> q;  // one entry per model
};

/// Sector-side sums for one model compared against the diagonal ensemble.
struct ModelScan {
  std::string name;
  Divergence kl;           // sum over the sector of p ln(p / q)
  double abs_diff = 0.0;   // sum over the sector of |p - q|
  double mass_in = 0.0;    // sum over the sector of q
  double entropy_in = 0.0; // -sum over the sector of q ln q
  EnergyHistogram histogram;  // q restricted to the sector

  /// Total variation including the model mass outside the sector.
  double trace_distance() const { return std::min(1.0, 0.5 * (abs_diff + std::max(0.0, 1.0 - mass_in))); }
};

/// One pass over the particle sector of `u`: the diagonal ensemble is never
/// stored; its normalization, entropy and histogram, plus the divergences to
/// every model, are accumulated chunk by chunk and merged in a fixed order.
struct SectorScan {
  std::uint64_t configs = 0;
  double total = 0.0;
  double entropy = 0.0;
  EnergyHistogram histogram;
  std::vector<ModelScan> models;
  std::vector<WindowState> window;  // ascending energy, then config
  std::uint64_t rebuilds = 0;
};

SectorScan scan_sector(const OverlapMatrix& u, const Eigen::VectorXd& energies,
                       const std::vector<const EnsembleModel*>& models, const ScanOptions& options);

/// Energy histogram of an independent-mode model over the whole Fock space,
/// by splitting the modes into two halves and binary searching sorted
/// half-space energies; N <= 48.
EnergyHistogram product_model_histogram(const EnsembleModel& model, const Eigen::VectorXd& energies,
                                        double bin_width, double origin);

}  // namespace qens
