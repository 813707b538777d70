#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nlohmann/json_fwd.hpp"
#include "qens/ensemble_fit.hpp"
#include "qens/lattice.hpp"
#include "qens/metrics.hpp"
#include "qens/streaming.hpp"

namespace qens {

inline constexpr int report_schema_version = 1;

enum class SectorChoice { automatic, full, fixed };

/// Everything one experiment needs. `automatic` fits the correlated ensemble
/// over the full Fock space up to 20 modes and in the particle sector above.
struct ExperimentConfig {
  QuenchParams quench{10, 1.0, 4.0, 5, 5, Boundary::periodic};
  double bin_width = 1.0;
  Backend backend = Backend::exact;
  SectorChoice sector = SectorChoice::automatic;
  std::uint64_t budget = default_config_budget;
  std::uint64_t seed = 0x5eed;
  int threads = 0;
  FermiRule fermi_rule = FermiRule::none;
  double tolerance = 0.0;  // 0 = backend default
  double window_lo = std::numeric_limits<double>::quiet_NaN();
  double window_hi = std::numeric_limits<double>::quiet_NaN();
  double horizon = 1e4;
  int samples = 10'000;
  std::vector<int> sizes;
  std::string model_in;
  std::string model_out;

  void validate() const;
  bool full_space_fit() const;
  CGGEOptions fit_options() const;
};

/// Unknown keys are rejected. Threads are not part of the echoed config, so
/// reports do not depend on them.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
nlohmann::json to_json(const ExperimentConfig& c);

/// Non-finite values as the strings "inf", "-inf", "nan".
nlohmann::json json_number(double x);

struct ComparisonRow {
  std::string name;
  Support support;
  EnsembleComparison comparison;
  EnergyHistogram histogram;  // on the grid of the diagonal-ensemble histogram
};

struct QuenchAnalysis {
  ExperimentConfig config;
  QuenchSetup setup;
  MomentTargets targets;
  double energy = 0.0;  // <H> after the quench
  GGEModel gge;
  GCEModel gce;
  CGGEModel cgge;
  SectorScan scan;
  double s_de = 0.0, s_gge = 0.0, s_gce = 0.0, s_cgge = 0.0;
  double s_gge_sector = 0.0, s_gce_sector = 0.0;
  std::vector<ComparisonRow> comparisons;  // GGE, GCE, CGGE, GGE_sector, GCE_sector

  const ComparisonRow& comparison(const std::string& name) const;
};

/// The whole pipeline for one quench: diagonal ensemble by a streamed sector
/// pass, the three fitted ensembles, and every comparison against the
/// diagonal ensemble. With `compare` off only the entropies are computed.
QuenchAnalysis analyze_quench(const ExperimentConfig& config, bool compare = true);

/// Only the correlated-ensemble fit (or the model file named in the config),
/// skipping the diagonal-ensemble pass.
struct FittedQuench {
  QuenchSetup setup;
  MomentTargets targets;
  CGGEModel cgge;
};
FittedQuench fit_quench(const ExperimentConfig& config);

nlohmann::json quench_report(const QuenchAnalysis& a);

/// CSV: bin lower edge, then the mass of each ensemble in the bin.
std::string energy_distribution_csv(const QuenchAnalysis& a);
/// CSV of the individual configs inside the configured energy window.
std::string window_states_csv(const QuenchAnalysis& a);

struct SweepRow {
  int n_sites = 0;
  int n_particles = 0;
  std::string status = "ok";  // error kind otherwise
  std::string message;
  double s_de = 0.0, s_gge = 0.0, s_gce = 0.0, s_cgge = 0.0;
};

/// One row per size, with M = N/2 (rounded up to an odd count for odd N). A
/// failing size is recorded and the sweep goes on.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config);
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct VijSummary {
  Eigen::MatrixXd v;
  std::vector<int> band_boundaries;  // first mode index of every band after the first
  Eigen::MatrixXd block_rms;         // root mean square of V over each band pair
  Eigen::VectorXd band_occupation;   // mean occupation per band
};

VijSummary summarize_vij(const CGGEModel& model, const MomentTargets& targets, int n_bands);
std::string vij_csv(const VijSummary& s);
nlohmann::json to_json(const VijSummary& s);

nlohmann::json oracle_validation(const ExperimentConfig& config);

}  // namespace qens
