#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlohmann/json.hpp"
#include "qens/error.hpp"
#include "qens/experiments.hpp"

using namespace qens;

namespace {

ExperimentConfig config(int n, double j, int threads = 0) {
  ExperimentConfig c;
  c.quench = {n, 1.0, j, 5, n / 2, Boundary::periodic};
  c.threads = threads;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("qens_test_" + name)).string();
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("config files") {
  const ExperimentConfig c = config_from_json(nlohmann::json::parse(R"({"n": 30, "j": 12, "bin": 0.5})"));
  CHECK(c.quench.n_sites == 30);
  CHECK(c.quench.n_particles == 15);
  CHECK(c.quench.potential_strength == 12.0);
  CHECK(c.bin_width == 0.5);
  CHECK_FALSE(c.full_space_fit());
  CHECK(config(10, 4).full_space_fit());
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"nn": 3})")), InvalidArgument);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"n": "ten"})")), InvalidArgument);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"backend": "magic"})")), InvalidArgument);
  ExperimentConfig bad = config(10, 4);
  bad.bin_width = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  const nlohmann::json echoed = to_json(config(10, 4, 3));
  CHECK_FALSE(echoed.contains("threads"));
  CHECK(config_from_json(echoed).quench.n_sites == 10);
}

TEST_CASE("quench report") {
  const QuenchAnalysis a = analyze_quench(config(10, 4));
  CHECK(a.s_de <= a.s_cgge + 1e-8);
  CHECK(a.s_cgge <= a.s_gge + 1e-8);
  const nlohmann::json r = quench_report(a);
  CHECK(r["schema_version"] == report_schema_version);
  for (const char* name : {"GGE", "GCE", "CGGE", "GGE_sector", "GCE_sector"}) {
    REQUIRE(r["comparisons"].contains(name));
    CHECK(r["pinsker"][name]["pass"] == true);
  }
  CHECK(r["modes"]["occupations"].size() == 10);
  CHECK(std::abs(r["correlations"]["trace"].get<double>() - 5.0) < 1e-10);
  CHECK(a.comparison("CGGE").comparison.trace_distance < 1e-6);
  CHECK_THROWS_AS(a.comparison("nope"), InvalidArgument);
}

TEST_CASE("null quench report") {
  const QuenchAnalysis a = analyze_quench(config(10, 0));
  for (double s : {a.s_de, a.s_gge, a.s_gce, a.s_cgge, a.s_gge_sector, a.s_gce_sector}) CHECK(std::abs(s) < 1e-10);
  for (const auto& row : a.comparisons) {
    CHECK(row.comparison.trace_distance < 1e-12);
    CHECK(row.comparison.tv_coarse < 1e-12);
    CHECK_FALSE(row.comparison.kl_de_to_model.infinite);
    CHECK(row.comparison.kl_de_to_model.value < 1e-12);
  }
  std::istringstream csv(energy_distribution_csv(a));
  std::string line;
  int rows = 0;
  std::getline(csv, line);
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 1);
}

TEST_CASE("energy distribution bins sum to one") {
  const QuenchAnalysis a = analyze_quench(config(10, 12));
  CHECK(std::abs(a.scan.histogram.total() - 1.0) < 1e-8);
  for (const auto& row : a.comparisons) CHECK(std::abs(row.histogram.total() - 1.0) < 1e-8);
  std::istringstream csv(energy_distribution_csv(a));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "energy_low,DE,GGE,GCE,CGGE,GGE_sector,GCE_sector");
  std::vector<double> sums(7, 0.0);
  while (std::getline(csv, line)) {
    std::istringstream cells(line);
    std::string cell;
    for (int k = 0; std::getline(cells, cell, ','); ++k)
      if (k > 0) sums[k] += std::stod(cell);
  }
  for (int k = 1; k < 7; ++k) CHECK(std::abs(sums[k] - 1.0) < 1e-8);
}

TEST_CASE("sweep keeps going after a failing size") {
  ExperimentConfig c = config(10, 4);
  c.sizes = {10, 20};
  const std::vector<SweepRow> rows = run_sweep(c);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].status == "ok");
  CHECK(rows[0].s_de > 0);
  CHECK(rows[1].status == "FermiDegeneracy");
  const std::string csv = sweep_csv(rows);
  CHECK(csv.rfind("n_sites,n_particles,S_DE,S_GGE,S_GCE,S_CGGE,status,message\n", 0) == 0);
  c.sizes = {10};
  CHECK(run_sweep(c).size() == 1);
}

TEST_CASE("coupling matrix summary") {
  const FittedQuench f = fit_quench(config(10, 12));
  const VijSummary s = summarize_vij(f.cgge, f.targets, 5);
  CHECK(s.band_boundaries == std::vector<int>{2, 4, 6, 8});
  CHECK((s.v - s.v.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.v.diagonal().cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(summarize_vij(f.cgge, f.targets, 3), InvalidArgument);

  MomentTargets independent = f.targets;
  independent.pairs = independent.means * independent.means.transpose();
  independent.pairs.diagonal() = independent.means;
  const CGGEModel zero = fit_cgge(independent, {});
  CHECK(summarize_vij(zero, independent, 5).v.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("model file reproduces the fit") {
  const std::string path = temp_path("model.json");
  ExperimentConfig c = config(10, 12);
  c.model_out = path;
  const FittedQuench first = fit_quench(c);
  c.model_out.clear();
  c.model_in = path;
  const FittedQuench second = fit_quench(c);
  CHECK(second.cgge.v == first.cgge.v);
  CHECK(second.cgge.lambdas == first.cgge.lambdas);
  CHECK(vij_csv(summarize_vij(first.cgge, first.targets, 5)) == vij_csv(summarize_vij(second.cgge, second.targets, 5)));
  std::remove(path.c_str());
  c.model_in = temp_path("missing.json");
  CHECK_THROWS_AS(fit_quench(c), Error);
}

TEST_CASE("oracle validation") {
  ExperimentConfig c = config(6, 4);
  c.quench.period = 3;
  nlohmann::json r = oracle_validation(c);
  CHECK(r["pass"] == true);
  CHECK(r["max_pair_deviation"].get<double>() < 2e-3);
  c.quench.potential_strength = 0.0;
  r = oracle_validation(c);
  CHECK(r["max_pair_deviation"].get<double>() < 1e-12);
  c.quench.potential_strength = 12.0;
  CHECK(oracle_validation(c)["max_abs_g_drift"].get<double>() < 1e-9);
  ExperimentConfig big = config(20, 4);
  big.quench.n_particles = 9;
  CHECK_THROWS_AS(oracle_validation(big), Error);
}

TEST_CASE("reports do not depend on threads") {
  const std::string a = quench_report(analyze_quench(config(15, 12, 1))).dump(2);
  const std::string b = quench_report(analyze_quench(config(15, 12, 4))).dump(2);
  CHECK(a == b);
}

}
