// Command-line runner for quench experiments.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "nlohmann/json.hpp"
#include "qens/error.hpp"
#include "qens/experiments.hpp"

namespace {

using qens::ExperimentConfig;

struct Flags {
  int n = 0, m = 0, period = 0, samples = 0;
  double t = 0, j = 0, bin = 0, tolerance = 0, horizon = 0;
  std::string bc, backend, sector, config_path, out, model_in, model_out, window_out, summary;
  std::uint64_t budget = 0, seed = 0;
  int threads = 0;
  std::vector<int> sizes;
  std::vector<double> window;
  int bands = 0;
};

// Options shared by every subcommand; each writes into the same Flags.
void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config_path, "JSON config file (flags override it)");
  app->add_option("--n", f.n, "lattice sites");
  app->add_option("--m", f.m, "particles (default N/2)");
  app->add_option("--t", f.t, "hopping");
  app->add_option("--j", f.j, "potential strength after the quench");
  app->add_option("--period", f.period, "superlattice period");
  app->add_option("--bc", f.bc, "boundary")->check(CLI::IsMember({"periodic", "open"}));
  app->add_option("--bin", f.bin, "energy bin width");
  app->add_option("--backend", f.backend, "fit backend")->check(CLI::IsMember({"exact", "sampled"}));
  app->add_option("--sector", f.sector, "fit support")->check(CLI::IsMember({"full", "fixed", "auto"}));
  app->add_option("--budget", f.budget, "maximum configurations held in memory");
  app->add_option("--seed", f.seed, "sampler seed");
  app->add_option("--threads", f.threads, "worker threads (0 = all cores)");
  app->add_option("--tolerance", f.tolerance, "fit tolerance");
  app->add_option("--model-in", f.model_in, "load the correlated-ensemble fit");
  app->add_option("--model-out", f.model_out, "save the correlated-ensemble fit");
  app->add_option("--out", f.out, "output file (default stdout)");
}

ExperimentConfig build_config(const Flags& f, const std::map<std::string, CLI::Option*>& opts) {
  ExperimentConfig c;
  const auto given = [&](const char* key) {
    const auto it = opts.find(key);
    return it != opts.end() && it->second->count() > 0;
  };
  if (given("config")) {
    std::ifstream in(f.config_path);
    if (!in) throw qens::Error(qens::ErrorKind::io, "cannot read config " + f.config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw qens::InvalidArgument(std::string("config is not valid JSON: ") + e.what());
    }
    c = qens::config_from_json(j, c);
  }
  nlohmann::json j = nlohmann::json::object();
  if (given("n")) j["n"] = f.n;
  if (given("m")) j["m"] = f.m;
  if (given("t")) j["t"] = f.t;
  if (given("j")) j["j"] = f.j;
  if (given("period")) j["period"] = f.period;
  if (given("bc")) j["bc"] = f.bc;
  if (given("bin")) j["bin"] = f.bin;
  if (given("backend")) j["backend"] = f.backend;
  if (given("sector")) j["sector"] = f.sector;
  if (given("budget")) j["budget"] = f.budget;
  if (given("seed")) j["seed"] = f.seed;
  if (given("threads")) j["threads"] = f.threads;
  if (given("tolerance")) j["tolerance"] = f.tolerance;
  if (given("model_in")) j["model_in"] = f.model_in;
  if (given("model_out")) j["model_out"] = f.model_out;
  if (given("sizes")) j["sizes"] = f.sizes;
  if (given("window")) j["window"] = f.window;
  if (given("horizon")) j["horizon"] = f.horizon;
  if (given("samples")) j["samples"] = f.samples;
  c = qens::config_from_json(j, c);
  c.validate();
  return c;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw qens::Error(qens::ErrorKind::io, "cannot write " + path);
  out << text;
  if (!out) throw qens::Error(qens::ErrorKind::io, "write failed for " + path);
}

int exit_code(qens::ErrorKind kind) {
  switch (kind) {
    case qens::ErrorKind::non_convergence:
    case qens::ErrorKind::no_solution:
      return 2;
    case qens::ErrorKind::budget_exceeded:
      return 3;
    default:
      return 1;
  }
}

void print_error(const char* kind, const std::string& message) {
  const nlohmann::json e = {{"error", {{"kind", kind}, {"message", message}}}};
  std::cerr << e.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diagonal, generalized Gibbs, grand canonical and correlated ensembles for lattice quenches"};
  app.require_subcommand(1);
  Flags f;

  CLI::App* quench = app.add_subcommand("quench", "full comparison report (JSON)");
  CLI::App* sweep = app.add_subcommand("sweep", "entropies against system size (CSV)");
  CLI::App* energy = app.add_subcommand("energy-dist", "coarse-grained energy distributions (CSV)");
  CLI::App* vij = app.add_subcommand("vij", "fitted pair couplings (CSV) and band summary (JSON)");
  CLI::App* oracle = app.add_subcommand("oracle-validate", "time-evolution check of the moment targets (JSON)");
  for (CLI::App* sub : {quench, sweep, energy, vij, oracle}) add_common(sub, f);
  std::map<CLI::App*, std::map<std::string, CLI::Option*>> per_sub;
  for (CLI::App* sub : {quench, sweep, energy, vij, oracle}) {
    std::map<std::string, CLI::Option*> o;
    for (const char* key : {"config", "n", "m", "t", "j", "period", "bc", "bin", "backend", "sector", "budget",
                            "seed", "threads", "tolerance", "model_in", "model_out"}) {
      std::string flag = std::string("--") + key;
      for (char& ch : flag)
        if (ch == '_') ch = '-';
      o[key] = sub->get_option(flag);
    }
    per_sub[sub] = o;
  }
  per_sub[sweep]["sizes"] = sweep->add_option("--sizes", f.sizes, "lattice sizes")->delimiter(',');
  per_sub[quench]["window"] = quench->add_option("--window", f.window, "energy window lo,hi")->delimiter(',')->expected(2);
  per_sub[energy]["window"] =
      energy->add_option("--window", f.window, "energy window lo,hi listed per config")->delimiter(',')->expected(2);
  energy->add_option("--window-out", f.window_out, "CSV of the configs inside the window");
  vij->add_option("--bands", f.bands, "band count (default: the period)");
  vij->add_option("--summary", f.summary, "band summary JSON (default: <out>.bands.json or stderr)");
  per_sub[oracle]["horizon"] = oracle->add_option("--horizon", f.horizon, "averaging horizon");
  per_sub[oracle]["samples"] = oracle->add_option("--samples", f.samples, "time samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 1;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const ExperimentConfig config = build_config(f, per_sub[sub]);
    if (sub == quench) {
      const qens::QuenchAnalysis a = qens::analyze_quench(config);
      emit(f.out, qens::quench_report(a).dump(2) + "\n");
    } else if (sub == sweep) {
      if (config.sizes.empty()) throw qens::InvalidArgument("sweep needs --sizes");
      emit(f.out, qens::sweep_csv(qens::run_sweep(config)));
    } else if (sub == energy) {
      const qens::QuenchAnalysis a = qens::analyze_quench(config);
      emit(f.out, qens::energy_distribution_csv(a));
      if (!f.window_out.empty()) emit(f.window_out, qens::window_states_csv(a));
      else if (!std::isnan(config.window_lo)) std::cerr << qens::window_states_csv(a);
    } else if (sub == vij) {
      const qens::FittedQuench fit = qens::fit_quench(config);
      const int bands = f.bands > 0 ? f.bands : config.quench.period;
      const qens::VijSummary s = qens::summarize_vij(fit.cgge, fit.targets, bands);
      emit(f.out, qens::vij_csv(s));
      const std::string summary = qens::to_json(s).dump(2) + "\n";
      if (!f.summary.empty()) emit(f.summary, summary);
      else if (!f.out.empty()) emit(f.out + ".bands.json", summary);
      else std::cerr << summary;
    } else if (sub == oracle) {
      const nlohmann::json r = qens::oracle_validation(config);
      emit(f.out, r.dump(2) + "\n");
      if (!r["pass"].get<bool>()) return 2;
    }
  } catch (const qens::Error& e) {
    print_error(qens::to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::bad_alloc&) {
    print_error("budget_exceeded", "out of memory");
    return 3;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
