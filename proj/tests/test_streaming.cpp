#include <doctest.h>

#include "qens/ensemble_fit.hpp"
#include "qens/error.hpp"
#include "qens/metrics.hpp"
#include "qens/streaming.hpp"

using namespace qens;

namespace {

struct Fixture {
  QuenchSetup q;
  MomentTargets t;
  GGEModel gge;
  CGGEModel cgge;
  std::vector<EnsembleModel> models;

  explicit Fixture(int n, double j) : q(prepare_quench({n, 1.0, j, 5, n / 2, Boundary::periodic})) {
    t = wick_moments(q.correlations);
    gge = fit_gge(t);
    CGGEOptions o;
    o.particles = n / 2;
    cgge = fit_cgge(t, o);
    models = {make_model(gge, Support::full_space(n)), make_model(gge, Support::sector(n, n / 2)), make_model(cgge)};
  }
  std::vector<const EnsembleModel*> pointers() const {
    std::vector<const EnsembleModel*> out;
    for (const auto& m : models) out.push_back(&m);
    return out;
  }
};

}  // namespace

TEST_SUITE("streaming") {

TEST_CASE("streamed pass matches materialized distributions") {
  const Fixture f(10, 12.0);
  ScanOptions o;
  o.chunk = 17;
  const SectorScan scan = scan_sector(f.q.overlap, f.q.post.energies, f.pointers(), o);
  const DiagonalDistribution de = de_distribution(f.q.overlap);
  CHECK(scan.configs == 252);
  CHECK(std::abs(scan.total - de.total()) < 1e-14);
  CHECK(std::abs(scan.entropy - de_entropy(de)) < 1e-12);
  const EnergyHistogram h = energy_histogram(de, f.q.post.energies, 1.0, scan.histogram.origin);
  CHECK(histogram_distance(h, scan.histogram) < 1e-14);
  for (std::size_t i = 0; i < f.models.size(); ++i) {
    const DiagonalDistribution qd = model_distribution(f.models[i]);
    const Divergence kl = kl_divergence(de, qd);
    CHECK(scan.models[i].kl.infinite == kl.infinite);
    CHECK(std::abs(scan.models[i].kl.value - kl.value) < 1e-12);
    CHECK(std::abs(scan.models[i].trace_distance() - trace_distance(de, qd)) < 1e-12);
  }
}

TEST_CASE("rank-one path agrees with plain LU") {
  const Fixture f(15, 4.0);
  ScanOptions fast, slow;
  slow.fast_path = false;
  fast.chunk = slow.chunk = 1000;
  const SectorScan a = scan_sector(f.q.overlap, f.q.post.energies, f.pointers(), fast);
  const SectorScan b = scan_sector(f.q.overlap, f.q.post.energies, f.pointers(), slow);
  CHECK(std::abs(a.total - 1.0) < 1e-10);
  CHECK(std::abs(a.total - b.total) < 1e-12);
  CHECK(std::abs(a.entropy - b.entropy) < 1e-10);
  for (std::size_t i = 0; i < a.models.size(); ++i)
    CHECK(std::abs(a.models[i].kl.value - b.models[i].kl.value) < 1e-10);
}

TEST_CASE("results do not depend on the thread count") {
  const Fixture f(15, 12.0);
  ScanOptions one, four;
  one.threads = 1;
  four.threads = 4;
  one.chunk = four.chunk = 500;
  const SectorScan a = scan_sector(f.q.overlap, f.q.post.energies, f.pointers(), one);
  const SectorScan b = scan_sector(f.q.overlap, f.q.post.energies, f.pointers(), four);
  CHECK(a.total == b.total);
  CHECK(a.entropy == b.entropy);
  CHECK(a.histogram.masses == b.histogram.masses);
  for (std::size_t i = 0; i < a.models.size(); ++i) {
    CHECK(a.models[i].kl.value == b.models[i].kl.value);
    CHECK(a.models[i].abs_diff == b.models[i].abs_diff);
  }
}

TEST_CASE("energy window") {
  const Fixture f(10, 12.0);
  ScanOptions o;
  o.window_lo = -6.0;
  o.window_hi = 0.0;
  const SectorScan s = scan_sector(f.q.overlap, f.q.post.energies, f.pointers(), o);
  REQUIRE_FALSE(s.window.empty());
  for (std::size_t i = 0; i < s.window.size(); ++i) {
    CHECK(s.window[i].energy >= -6.0);
    CHECK(s.window[i].energy <= 0.0);
    CHECK(s.window[i].q.size() == 3);
    if (i) CHECK(s.window[i - 1].energy <= s.window[i].energy);
    CHECK(s.window[i].p == doctest::Approx(de_probability(f.q.overlap, s.window[i].config)));
  }
  o.max_window_states = 2;
  CHECK_THROWS_AS(scan_sector(f.q.overlap, f.q.post.energies, f.pointers(), o), BudgetExceeded);
}

TEST_CASE("product-model histogram over the full space") {
  const Fixture f(10, 4.0);
  const EnsembleModel& gge = f.models[0];
  const double origin = -7.3;
  const EnergyHistogram fast = product_model_histogram(gge, f.q.post.energies, 1.0, origin);
  const EnergyHistogram slow = energy_histogram(model_distribution(gge), f.q.post.energies, 1.0, origin);
  CHECK(histogram_distance(fast, slow) < 1e-13);
  CHECK(std::abs(fast.total() - 1.0) < 1e-12);
  CHECK_THROWS_AS(product_model_histogram(f.models[1], f.q.post.energies, 1.0, origin), InvalidArgument);
}

}
