#include "qens/streaming.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "qens/determinant.hpp"
#include "qens/error.hpp"
#include "qens/parallel.hpp"

namespace qens {

namespace {

struct ModelPart {
  CompensatedSum kl, diff, mass, entropy;
  bool infinite = false;
  std::optional<HistogramBuilder> hist;
};

struct ScanPart {
  CompensatedSum total, entropy;
  std::optional<HistogramBuilder> hist;
  std::vector<ModelPart> models;
  std::vector<WindowState> window;
  std::uint64_t configs = 0;
  std::uint64_t rebuilds = 0;
};

}  // namespace

SectorScan scan_sector(const OverlapMatrix& u, const Eigen::VectorXd& energies,
                       const std::vector<const EnsembleModel*>& models, const ScanOptions& o) {
  const int n = u.n_modes(), m = u.n_particles();
  if (energies.size() != n) throw InvalidArgument("energies and overlap sizes differ");
  for (const EnsembleModel* model : models)
    if (model->n_modes() != n) throw SupportMismatch("model " + model->name + " has a different mode count");
  if (o.chunk == 0) throw InvalidArgument("chunk size must be positive");
  const std::uint64_t count = binomial(n, m);
  const double origin =
      std::isnan(o.origin) ? support_ground_energy(energies, Support::sector(n, m)) : o.origin;
  const std::uint64_t n_chunks = (count + o.chunk - 1) / o.chunk;
  const bool windowed = !std::isnan(o.window_lo) && !std::isnan(o.window_hi);

  auto parts = run_chunks<ScanPart>(n_chunks, o.threads, [&](std::uint64_t c) {
    ScanPart part;
    part.hist.emplace(origin, o.bin_width);
    part.models.resize(models.size());
    for (auto& mp : part.models) mp.hist.emplace(origin, o.bin_width);
    std::optional<RowReplacementDeterminant> det;
    if (o.fast_path) det.emplace(u.u);
    bool first = true;
    for_each_revolving(n, m, c * o.chunk, std::min(count, (c + 1) * o.chunk), [&](Mask s) {
      double d;
      if (det) d = first ? det->reset(s) : det->move_to(s);
      else d = row_minor_determinant(u.u, s);
      first = false;
      // Rounding noise of exact zeros is dropped.
      const double p = d * d > negligible_probability ? d * d : 0.0;
      const double log_p = p > 0 ? std::log(p) : 0.0;
      const double e = config_energy(energies, s);
      ++part.configs;
      part.total.add(p);
      if (p > 0) part.entropy.add(-p * log_p);
      part.hist->add(e, p);
      WindowState* ws = nullptr;
      if (windowed && e >= o.window_lo && e <= o.window_hi) {
        if (part.window.size() >= o.max_window_states)
          throw BudgetExceeded("energy window holds more than " + std::to_string(o.max_window_states) +
                               " configurations");
        part.window.push_back({s, e, p, std::vector<double>(models.size())});
        ws = &part.window.back();
      }
      for (std::size_t i = 0; i < models.size(); ++i) {
        ModelPart& mp = part.models[i];
        const double lq = models[i]->log_probability(s);
        const double q = std::exp(lq);
        if (p > 0) {
          if (q > 0) mp.kl.add(p * (log_p - lq));
          else mp.infinite = true;
        }
        mp.diff.add(std::abs(p - q));
        mp.mass.add(q);
        if (q > 0) mp.entropy.add(-q * lq);
        mp.hist->add(e, q);
        if (ws) ws->q[i] = q;
      }
    });
    if (det) part.rebuilds = det->rebuilds();
    return part;
  });

  CompensatedSum total, entropy;
  HistogramBuilder hist(origin, o.bin_width);
  std::vector<ModelPart> sums(models.size());
  for (auto& mp : sums) mp.hist.emplace(origin, o.bin_width);
  SectorScan scan;
  for (const ScanPart& part : parts) {
    total.merge(part.total);
    entropy.merge(part.entropy);
    hist.merge(*part.hist);
    scan.configs += part.configs;
    scan.rebuilds += part.rebuilds;
    if (scan.window.size() + part.window.size() > o.max_window_states)
      throw BudgetExceeded("energy window holds more than " + std::to_string(o.max_window_states) +
                           " configurations");
    scan.window.insert(scan.window.end(), part.window.begin(), part.window.end());
    for (std::size_t i = 0; i < models.size(); ++i) {
      const ModelPart& src = part.models[i];
      ModelPart& dst = sums[i];
      dst.kl.merge(src.kl);
      dst.diff.merge(src.diff);
      dst.mass.merge(src.mass);
      dst.entropy.merge(src.entropy);
      dst.infinite = dst.infinite || src.infinite;
      dst.hist->merge(*src.hist);
    }
  }
  std::sort(scan.window.begin(), scan.window.end(), [](const WindowState& a, const WindowState& b) {
    return a.energy != b.energy ? a.energy < b.energy : a.config < b.config;
  });
  scan.total = total.value();
  scan.entropy = entropy.value();
  scan.histogram = hist.finish();
  for (std::size_t i = 0; i < models.size(); ++i) {
    ModelScan ms;
    ms.name = models[i]->name;
    ms.kl.infinite = sums[i].infinite;
    ms.kl.value = sums[i].infinite ? 0.0 : std::max(0.0, sums[i].kl.value());
    ms.abs_diff = sums[i].diff.value();
    ms.mass_in = sums[i].mass.value();
    ms.entropy_in = sums[i].entropy.value();
    ms.histogram = sums[i].hist->finish();
    scan.models.push_back(std::move(ms));
  }
  return scan;
}

EnergyHistogram product_model_histogram(const EnsembleModel& model, const Eigen::VectorXd& energies,
                                        double bin_width, double origin) {
  const int n = model.n_modes();
  if (!model.support.is_full()) throw InvalidArgument("product histogram needs a full-space model");
  if (!model.params.v.isZero(0.0)) throw InvalidArgument("product histogram needs an independent-mode model");
  if (n > 48) throw BudgetExceeded("product histogram limited to 48 modes");
  if (energies.size() != n) throw InvalidArgument("energies and model sizes differ");

  // Occupation probability of each mode.
  Eigen::VectorXd occ(n);
  for (int j = 0; j < n; ++j) {
    if ((model.frozen_full >> j) & 1) occ(j) = 1.0;
    else if ((model.frozen_empty >> j) & 1) occ(j) = 0.0;
    else {
      const double x = model.params.lambdas(j);
      occ(j) = x > 0 ? std::exp(-x) / (1.0 + std::exp(-x)) : 1.0 / (1.0 + std::exp(x));
    }
  }
  const int na = n / 2, nb = n - na;
  const auto half = [&](int offset, int width, std::vector<double>& e, std::vector<double>& w) {
    const std::size_t size = std::size_t{1} << width;
    e.assign(size, 0.0);
    w.assign(size, 1.0);
    for (std::size_t s = 0; s < size; ++s) {
      for (int j = 0; j < width; ++j) {
        const bool on = (s >> j) & 1;
        if (on) e[s] += energies(offset + j);
        w[s] *= on ? occ(offset + j) : 1.0 - occ(offset + j);
      }
    }
  };
  std::vector<double> ea, wa, eb, wb;
  half(0, na, ea, wa);
  half(na, nb, eb, wb);

  HistogramBuilder builder(origin, bin_width);
  if (!std::isfinite(bin_width)) {
    builder.add(origin, 1.0);
    return builder.finish();
  }
  std::vector<std::size_t> order(eb.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return eb[x] < eb[y]; });
  std::vector<double> sorted(order.size()), prefix(order.size() + 1, 0.0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted[i] = eb[order[i]];
    prefix[i + 1] = prefix[i] + wb[order[i]];
  }
  const auto below = [&](double t) {
    return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
  };
  for (std::size_t a = 0; a < ea.size(); ++a) {
    if (wa[a] == 0.0) continue;
    const long k0 = energy_bin(ea[a] + sorted.front(), origin, bin_width);
    const long k1 = energy_bin(ea[a] + sorted.back(), origin, bin_width);
    std::size_t lo = below(origin + (static_cast<double>(k0) - 1e-9) * bin_width - ea[a]);
    for (long k = k0; k <= k1; ++k) {
      const std::size_t hi = below(origin + (static_cast<double>(k + 1) - 1e-9) * bin_width - ea[a]);
      const double mass = wa[a] * (prefix[hi] - prefix[lo]);
      if (mass != 0.0) builder.add(origin + (static_cast<double>(k) + 0.5) * bin_width, mass);
      lo = hi;
    }
  }
  return builder.finish();
}

}  // namespace qens
