#include "qens/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "nlohmann/json.hpp"
#include "qens/error.hpp"
#include "qens/parallel.hpp"

namespace qens {

namespace {

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const char* name_of(Boundary b) { return b == Boundary::periodic ? "periodic" : "open"; }
const char* name_of(Backend b) { return b == Backend::exact ? "exact" : "sampled"; }
const char* name_of(FermiRule r) { return r == FermiRule::none ? "none" : "parity"; }

}  // namespace

nlohmann::json json_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  quench.validate();
  if (!(bin_width > 0)) throw InvalidArgument("bin width must be positive");
  if (budget < 1) throw InvalidArgument("budget must be positive");
  if (tolerance < 0) throw InvalidArgument("tolerance must not be negative");
  if (!(horizon > 0)) throw InvalidArgument("oracle horizon must be positive");
  if (samples < 1) throw InvalidArgument("oracle needs at least one sample");
  if (std::isnan(window_lo) != std::isnan(window_hi) || window_lo > window_hi)
    throw InvalidArgument("energy window needs lo <= hi");
  for (int n : sizes)
    if (n < 2 || n > max_modes) throw InvalidArgument("sweep size out of range: " + std::to_string(n));
}

bool ExperimentConfig::full_space_fit() const {
  if (sector == SectorChoice::full) return true;
  if (sector == SectorChoice::fixed) return false;
  return quench.n_sites <= 20;
}

CGGEOptions ExperimentConfig::fit_options() const {
  CGGEOptions o;
  o.backend = backend;
  o.particles = full_space_fit() ? -1 : quench.n_particles;
  o.tolerance = tolerance > 0 ? tolerance : (backend == Backend::exact ? 1e-8 : 1e-3);
  o.budget = budget;
  o.seed = seed;
  o.threads = threads;
  return o;
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c) {
  static const std::set<std::string> known = {"n", "m", "t", "j", "period", "bc", "bin", "backend",
                                              "sector", "budget", "seed", "threads", "tolerance",
                                              "window", "horizon", "samples", "sizes", "model_in",
                                              "model_out", "fermi_rule", "out"};
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw InvalidArgument("unknown config key '" + key + "'");
  try {
    if (j.contains("n")) {
      c.quench.n_sites = j["n"].get<int>();
      if (!j.contains("m")) c.quench.n_particles = c.quench.n_sites / 2;
    }
    if (j.contains("m")) c.quench.n_particles = j["m"].get<int>();
    if (j.contains("t")) c.quench.hopping = j["t"].get<double>();
    if (j.contains("j")) c.quench.potential_strength = j["j"].get<double>();
    if (j.contains("period")) c.quench.period = j["period"].get<int>();
    if (j.contains("bc")) {
      const std::string bc = j["bc"].get<std::string>();
      if (bc == "periodic") c.quench.boundary = Boundary::periodic;
      else if (bc == "open") c.quench.boundary = Boundary::open;
      else throw InvalidArgument("bc must be periodic or open");
    }
    if (j.contains("bin")) c.bin_width = j["bin"].get<double>();
    if (j.contains("backend")) {
      const std::string b = j["backend"].get<std::string>();
      if (b == "exact") c.backend = Backend::exact;
      else if (b == "sampled") c.backend = Backend::sampled;
      else throw InvalidArgument("backend must be exact or sampled");
    }
    if (j.contains("sector")) {
      const std::string s = j["sector"].get<std::string>();
      if (s == "full") c.sector = SectorChoice::full;
      else if (s == "fixed") c.sector = SectorChoice::fixed;
      else if (s == "auto") c.sector = SectorChoice::automatic;
      else throw InvalidArgument("sector must be full, fixed or auto");
    }
    if (j.contains("fermi_rule")) {
      const std::string r = j["fermi_rule"].get<std::string>();
      if (r == "none") c.fermi_rule = FermiRule::none;
      else if (r == "parity") c.fermi_rule = FermiRule::parity;
      else throw InvalidArgument("fermi_rule must be none or parity");
    }
    if (j.contains("budget")) c.budget = j["budget"].get<std::uint64_t>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
    if (j.contains("tolerance")) c.tolerance = j["tolerance"].get<double>();
    if (j.contains("window")) {
      const auto w = j["window"].get<std::vector<double>>();
      if (w.size() != 2) throw InvalidArgument("window must be [lo, hi]");
      c.window_lo = w[0];
      c.window_hi = w[1];
    }
    if (j.contains("horizon")) c.horizon = j["horizon"].get<double>();
    if (j.contains("samples")) c.samples = j["samples"].get<int>();
    if (j.contains("sizes")) c.sizes = j["sizes"].get<std::vector<int>>();
    if (j.contains("model_in")) c.model_in = j["model_in"].get<std::string>();
    if (j.contains("model_out")) c.model_out = j["model_out"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad config value: ") + e.what());
  }
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["n"] = c.quench.n_sites;
  j["m"] = c.quench.n_particles;
  j["t"] = c.quench.hopping;
  j["j"] = c.quench.potential_strength;
  j["period"] = c.quench.period;
  j["bc"] = name_of(c.quench.boundary);
  j["bin"] = json_number(c.bin_width);
  j["backend"] = name_of(c.backend);
  j["sector"] = c.full_space_fit() ? "full" : "fixed";
  j["budget"] = c.budget;
  j["seed"] = c.seed;
  j["tolerance"] = c.fit_options().tolerance;
  j["fermi_rule"] = name_of(c.fermi_rule);
  if (!std::isnan(c.window_lo)) j["window"] = {c.window_lo, c.window_hi};
  return j;
}

// ---------------------------------------------------------------- quench

const ComparisonRow& QuenchAnalysis::comparison(const std::string& name) const {
  for (const auto& row : comparisons)
    if (row.name == name) return row;
  throw InvalidArgument("no comparison named " + name);
}

namespace {

CGGEModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read model file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::io, "model file " + path + " is not valid JSON: " + e.what());
  }
  return cgge_from_json(j);
}

void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorKind::io, "write failed for " + path);
}

}  // namespace

namespace {

CGGEModel fit_or_load(const ExperimentConfig& config, const MomentTargets& targets) {
  CGGEModel model;
  if (!config.model_in.empty()) {
    model = load_model(config.model_in);
    if (model.lambdas.size() != targets.means.size())
      throw SupportMismatch("model file has a different mode count");
  } else {
    model = fit_cgge(targets, config.fit_options());
  }
  if (!config.model_out.empty()) save_text(config.model_out, to_json(model).dump(2) + "\n");
  return model;
}

}  // namespace

FittedQuench fit_quench(const ExperimentConfig& config) {
  config.validate();
  FittedQuench f;
  f.setup = prepare_quench(config.quench, config.fermi_rule);
  f.targets = wick_moments(f.setup.correlations);
  f.cgge = fit_or_load(config, f.targets);
  return f;
}

QuenchAnalysis analyze_quench(const ExperimentConfig& config, bool compare) {
  config.validate();
  QuenchAnalysis a;
  a.config = config;
  a.setup = prepare_quench(config.quench, config.fermi_rule);
  const int n = config.quench.n_sites, m = config.quench.n_particles;
  const Eigen::VectorXd& eps = a.setup.post.energies;
  a.targets = wick_moments(a.setup.correlations);
  CompensatedSum e;
  for (int j = 0; j < n; ++j) e.add(eps(j) * a.targets.means(j));
  a.energy = e.value();

  a.gge = fit_gge(a.targets);
  a.gce = fit_gce(eps, a.energy, m);
  a.cgge = fit_or_load(config, a.targets);

  const Support full = Support::full_space(n), sector = Support::sector(n, m);
  const EnsembleModel gge_full = make_model(a.gge, full);
  const EnsembleModel gce_full = make_model(a.gce, eps, full);
  const EnsembleModel cgge = make_model(a.cgge);
  EnsembleModel gge_sector = make_model(a.gge, sector);
  EnsembleModel gce_sector = make_model(a.gce, eps, sector);
  gge_sector.name = "GGE_sector";
  gce_sector.name = "GCE_sector";

  a.s_gge = a.gge.entropy();
  a.s_gce = a.gce.entropy(eps);
  a.s_cgge = model_entropy(cgge, config.threads);
  a.s_gge_sector = model_entropy(gge_sector, config.threads);
  a.s_gce_sector = model_entropy(gce_sector, config.threads);

  ScanOptions so;
  so.bin_width = config.bin_width;
  so.threads = config.threads;
  so.window_lo = config.window_lo;
  so.window_hi = config.window_hi;
  std::vector<const EnsembleModel*> models;
  if (compare) models = {&gge_full, &gce_full, &cgge, &gge_sector, &gce_sector};
  a.scan = scan_sector(a.setup.overlap, eps, models, so);
  a.s_de = a.scan.entropy;
  if (!compare) return a;

  const std::vector<double> entropies = {a.s_gge, a.s_gce, a.s_cgge, a.s_gge_sector, a.s_gce_sector};
  const double origin = a.scan.histogram.origin;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const EnsembleModel& model = *models[i];
    const ModelScan& ms = a.scan.models[i];
    ComparisonRow row;
    row.name = model.name;
    row.support = model.support;
    if (!model.support.is_full()) {
      row.histogram = ms.histogram;
    } else if (model.params.v.isZero(0.0)) {
      row.histogram = product_model_histogram(model, eps, config.bin_width, origin);
    } else {
      const DiagonalDistribution dist = model_distribution(model, config.budget, config.threads);
      row.histogram = energy_histogram(dist, eps, config.bin_width, origin);
    }
    EnsembleComparison& c = row.comparison;
    c.kl_de_to_model = ms.kl;
    c.trace_distance = ms.trace_distance();
    c.tv_coarse = histogram_distance(a.scan.histogram, row.histogram);
    c.entropy_de = a.s_de;
    c.entropy_model = entropies[i];
    c.success_probability = success_probability(c.trace_distance);
    a.comparisons.push_back(std::move(row));
  }
  return a;
}

nlohmann::json quench_report(const QuenchAnalysis& a) {
  const int n = a.config.quench.n_sites;
  const Eigen::MatrixXd& g = a.setup.correlations.g;
  nlohmann::json r;
  r["schema_version"] = report_schema_version;
  r["command"] = "quench";
  r["config"] = to_json(a.config);
  std::vector<double> energies(a.setup.post.energies.data(), a.setup.post.energies.data() + n);
  std::vector<double> occupations(a.targets.means.data(), a.targets.means.data() + n);
  r["modes"] = {{"energies", energies}, {"occupations", occupations}};
  Eigen::MatrixXd off = g;
  off.diagonal().setZero();
  r["correlations"] = {{"trace", g.trace()},
                       {"idempotency_error", (g * g - g).cwiseAbs().maxCoeff()},
                       {"max_abs_offdiagonal", off.cwiseAbs().maxCoeff()},
                       {"offdiagonal_frobenius", off.norm()}};
  r["energy"] = a.energy;
  r["entropies"] = {{"S_DE", a.s_de},
                    {"S_GGE", a.s_gge},
                    {"S_GCE", a.s_gce},
                    {"S_CGGE", a.s_cgge},
                    {"S_GGE_sector", a.s_gge_sector},
                    {"S_GCE_sector", a.s_gce_sector}};
  r["gce"] = {{"beta", json_number(a.gce.beta)},
              {"mu", json_number(a.gce.mu)},
              {"zero_temperature", a.gce.zero_temperature},
              {"particle_residual", a.gce.particle_residual},
              {"energy_residual", a.gce.energy_residual}};
  r["gge"] = {{"saturated_modes", mask_to_modes(a.gge.saturated())}};
  r["cgge_fit"] = {{"support", describe(a.cgge.support)},
                   {"backend", a.cgge.backend},
                   {"optimizer", a.cgge.optimizer},
                   {"iterations", a.cgge.iterations},
                   {"residual", json_number(a.cgge.residual)},
                   {"tolerance", a.cgge.tolerance},
                   {"converged", a.cgge.converged},
                   {"log_z", json_number(a.cgge.log_z)},
                   {"frozen_modes", popcount(a.cgge.frozen_empty | a.cgge.frozen_full)},
                   {"warnings", a.cgge.warnings}};
  r["diagonal_ensemble"] = {{"configs", a.scan.configs},
                            {"normalization", a.scan.total},
                            {"determinant_rebuilds", a.scan.rebuilds}};
  nlohmann::json comparisons = nlohmann::json::object(), supports = nlohmann::json::object(),
                 pinsker = nlohmann::json::object();
  for (const auto& row : a.comparisons) {
    comparisons[row.name] = to_json(row.comparison);
    supports[row.name] = describe(row.support);
    const PinskerCheck pc = pinsker_check(row.comparison.kl_de_to_model, row.comparison.trace_distance);
    pinsker[row.name] = {{"pass", pc.pass}, {"margin", json_number(pc.margin)}};
  }
  r["comparisons"] = std::move(comparisons);
  r["comparison_supports"] = std::move(supports);
  r["pinsker"] = std::move(pinsker);
  return r;
}

std::string energy_distribution_csv(const QuenchAnalysis& a) {
  std::vector<const EnergyHistogram*> hists = {&a.scan.histogram};
  std::ostringstream out;
  out << "energy_low,DE";
  for (const auto& row : a.comparisons) {
    out << ',' << row.name;
    hists.push_back(&row.histogram);
  }
  out << '\n';
  long lo = a.scan.histogram.first_bin, hi = lo;
  for (const auto* h : hists) {
    if (h->masses.empty()) continue;
    lo = std::min(lo, h->first_bin);
    hi = std::max(hi, h->first_bin + static_cast<long>(h->masses.size()));
  }
  const EnergyHistogram& grid = a.scan.histogram;
  for (long k = lo; k < hi; ++k) {
    out << fmt(std::isfinite(grid.bin_width) ? grid.origin + static_cast<double>(k) * grid.bin_width
                                             : grid.origin);
    for (const auto* h : hists) {
      const long i = k - h->first_bin;
      const double mass =
          i >= 0 && i < static_cast<long>(h->masses.size()) ? h->masses[static_cast<std::size_t>(i)] : 0.0;
      out << ',' << fmt(mass);
    }
    out << '\n';
  }
  return out.str();
}

std::string window_states_csv(const QuenchAnalysis& a) {
  std::ostringstream out;
  out << "config,energy,DE";
  for (const auto& row : a.comparisons) out << ',' << row.name;
  out << '\n';
  for (const auto& w : a.scan.window) {
    out << w.config << ',' << fmt(w.energy) << ',' << fmt(w.p);
    for (double q : w.q) out << ',' << fmt(q);
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------- sweep

std::vector<SweepRow> run_sweep(const ExperimentConfig& config) {
  std::vector<SweepRow> rows;
  for (int n : config.sizes) {
    SweepRow row;
    row.n_sites = n;
    row.n_particles = n / 2;
    try {
      ExperimentConfig c = config;
      c.quench.n_sites = n;
      c.quench.n_particles = n / 2;
      c.window_lo = c.window_hi = std::numeric_limits<double>::quiet_NaN();
      c.model_in.clear();
      c.model_out.clear();
      const QuenchAnalysis a = analyze_quench(c, false);
      row.s_de = a.s_de;
      row.s_gge = a.s_gge;
      row.s_gce = a.s_gce;
      row.s_cgge = a.s_cgge;
    } catch (const Error& e) {
      row.status = to_string(e.kind());
      row.message = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "n_sites,n_particles,S_DE,S_GGE,S_GCE,S_CGGE,status,message\n";
  for (const auto& r : rows) {
    out << r.n_sites << ',' << r.n_particles << ',';
    if (r.status == "ok") out << fmt(r.s_de) << ',' << fmt(r.s_gge) << ',' << fmt(r.s_gce) << ',' << fmt(r.s_cgge);
    else out << ",,,";
    std::string msg = r.message;
    for (char& ch : msg)
      if (ch == '"') ch = '\'';
    out << ',' << r.status << ",\"" << msg << "\"\n";
  }
  return out.str();
}

// ---------------------------------------------------------------- V_ij

VijSummary summarize_vij(const CGGEModel& model, const MomentTargets& targets, int n_bands) {
  const int n = static_cast<int>(model.v.rows());
  if (n_bands < 1 || n % n_bands != 0) throw InvalidArgument("mode count is not a multiple of the band count");
  const int width = n / n_bands;
  VijSummary s;
  s.v = model.v;
  for (int b = 1; b < n_bands; ++b) s.band_boundaries.push_back(b * width);
  s.block_rms = Eigen::MatrixXd::Zero(n_bands, n_bands);
  s.band_occupation = Eigen::VectorXd::Zero(n_bands);
  for (int a = 0; a < n_bands; ++a) {
    s.band_occupation(a) = targets.means.segment(a * width, width).mean();
    for (int b = 0; b < n_bands; ++b) {
      double sum = 0.0;
      int count = 0;
      for (int i = a * width; i < (a + 1) * width; ++i)
        for (int j = b * width; j < (b + 1) * width; ++j) {
          if (i == j) continue;
          sum += model.v(i, j) * model.v(i, j);
          ++count;
        }
      s.block_rms(a, b) = count ? std::sqrt(sum / count) : 0.0;
    }
  }
  return s;
}

std::string vij_csv(const VijSummary& s) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < s.v.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.v.cols(); ++j) out << (j ? "," : "") << fmt(s.v(i, j));
    out << '\n';
  }
  return out.str();
}

nlohmann::json to_json(const VijSummary& s) {
  nlohmann::json blocks = nlohmann::json::array();
  for (Eigen::Index a = 0; a < s.block_rms.rows(); ++a) {
    std::vector<double> row(s.block_rms.cols());
    for (Eigen::Index b = 0; b < s.block_rms.cols(); ++b) row[b] = s.block_rms(a, b);
    blocks.push_back(row);
  }
  std::vector<double> occ(s.band_occupation.data(), s.band_occupation.data() + s.band_occupation.size());
  return {{"band_boundaries", s.band_boundaries},
          {"block_rms", blocks},
          {"band_occupation", occ},
          {"max_abs_v", s.v.size() ? s.v.cwiseAbs().maxCoeff() : 0.0},
          {"max_abs_diagonal", s.v.size() ? s.v.diagonal().cwiseAbs().maxCoeff() : 0.0}};
}

// ---------------------------------------------------------------- oracle

nlohmann::json oracle_validation(const ExperimentConfig& config) {
  config.validate();
  const QuenchSetup setup = prepare_quench(config.quench, config.fermi_rule);
  const MomentTargets targets = wick_moments(setup.correlations);
  const TimeAverage avg = time_averaged_oracle(setup.overlap, setup.post, config.horizon, config.samples);
  const double occ_dev = (avg.occupations - targets.means).cwiseAbs().maxCoeff();
  const double pair_dev = (avg.pairs - targets.pairs).cwiseAbs().maxCoeff();
  constexpr double pair_limit = 2e-3, drift_limit = 1e-9;
  nlohmann::json r;
  r["schema_version"] = report_schema_version;
  r["command"] = "oracle-validate";
  r["config"] = to_json(config);
  r["horizon"] = config.horizon;
  r["samples"] = config.samples;
  r["max_occupation_deviation"] = occ_dev;
  r["max_pair_deviation"] = pair_dev;
  r["max_abs_g_drift"] = avg.max_abs_g_drift;
  r["pair_limit"] = pair_limit;
  r["drift_limit"] = drift_limit;
  r["pass"] = pair_dev < pair_limit && avg.max_abs_g_drift < drift_limit;
  return r;
}

}  // namespace qens
