#include "qens/pairwise_family.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "qens/error.hpp"
#include "qens/parallel.hpp"

namespace qens {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == neg_inf) return b;
  if (b == neg_inf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

void check_support(const PairwiseParams& params, const Support& support) {
  const int n = params.n_modes();
  if (support.n_modes != n) throw SupportMismatch("support and parameters disagree on mode count");
  if (params.v.rows() != n || params.v.cols() != n) throw InvalidArgument("V must be N x N");
  if (!support.is_full() && (support.particles < 0 || support.particles > n))
    throw InvalidArgument("sector particle number out of range");
}

// Partial sums of a chunk, all scaled by exp(reference - energy).
struct Partial {
  double reference = std::numeric_limits<double>::infinity();
  double z = 0.0;
  Eigen::VectorXd first;
  Eigen::MatrixXd pairs;
  Eigen::MatrixXd cov;
  bool empty = true;
};

FamilyStats reduce_partials(std::vector<Partial>& parts, int n, bool with_cov, int n_features) {
  double reference = std::numeric_limits<double>::infinity();
  for (const auto& p : parts)
    if (!p.empty) reference = std::min(reference, p.reference);
  if (!std::isfinite(reference)) throw InvalidArgument("empty support");
  double z = 0.0;
  Eigen::VectorXd first = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd pairs = Eigen::MatrixXd::Zero(n, n);
  Eigen::MatrixXd cov;
  if (with_cov) cov = Eigen::MatrixXd::Zero(n_features, n_features);
  for (const auto& p : parts) {
    if (p.empty) continue;
    const double scale = std::exp(reference - p.reference);
    z += scale * p.z;
    first += scale * p.first;
    pairs += scale * p.pairs;
    if (with_cov) cov += scale * p.cov;
  }
  FamilyStats stats;
  stats.log_z = std::log(z) - reference;
  stats.means = first / z;
  stats.pairs = pairs / z;
  stats.pairs.diagonal() = stats.means;
  if (with_cov) {
    const Eigen::VectorXd m = pack_moments(stats.means, stats.pairs);
    Eigen::MatrixXd c = cov / z;
    c = c.selfadjointView<Eigen::Lower>();
    c.noalias() -= m * m.transpose();
    stats.covariance = std::move(c);
  }
  return stats;
}

void pack_features(Mask s, int n, Eigen::Ref<Eigen::VectorXd> phi) {
  phi.setZero();
  for_each_bit(s, [&](int i) { phi(i) = 1.0; });
  int k = n;
  for (int i = 1; i < n; ++i) {
    const bool si = (s >> i) & 1;
    for (int j = 0; j < i; ++j, ++k)
      if (si && ((s >> j) & 1)) phi(k) = 2.0;
  }
}

}  // namespace

PairwiseParams PairwiseParams::independent(const Eigen::VectorXd& lambdas) {
  return {lambdas, Eigen::MatrixXd::Zero(lambdas.size(), lambdas.size())};
}

double config_energy(const PairwiseParams& params, Mask s) {
  double e = 0.0;
  for_each_bit(s, [&](int j) {
    e += params.lambdas(j);
    for_each_bit(s & low_bits(j), [&](int i) { e += 2.0 * params.v(i, j); });
  });
  return e;
}

double FamilyStats::entropy(const PairwiseParams& params) const {
  double mean_energy = params.lambdas.dot(means);
  const int n = params.n_modes();
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < i; ++j) mean_energy += 2.0 * params.v(i, j) * pairs(i, j);
  return log_z + mean_energy;
}

int feature_count(int n_modes) { return n_modes + n_modes * (n_modes - 1) / 2; }

Eigen::VectorXd pack_parameters(const PairwiseParams& params) {
  const int n = params.n_modes();
  Eigen::VectorXd theta(feature_count(n));
  theta.head(n) = params.lambdas;
  int k = n;
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < i; ++j) theta(k++) = params.v(i, j);
  return theta;
}

PairwiseParams unpack_parameters(const Eigen::VectorXd& theta, int n) {
  if (theta.size() != feature_count(n)) throw InvalidArgument("parameter vector has wrong length");
  PairwiseParams p{theta.head(n), Eigen::MatrixXd::Zero(n, n)};
  int k = n;
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < i; ++j) {
      p.v(i, j) = theta(k);
      p.v(j, i) = theta(k);
      ++k;
    }
  return p;
}

Eigen::VectorXd pack_moments(const Eigen::VectorXd& means, const Eigen::MatrixXd& pairs) {
  const int n = static_cast<int>(means.size());
  Eigen::VectorXd phi(feature_count(n));
  phi.head(n) = means;
  int k = n;
  for (int i = 1; i < n; ++i)
    for (int j = 0; j < i; ++j) phi(k++) = 2.0 * pairs(i, j);
  return phi;
}

FamilyStats enumerate_stats(const PairwiseParams& params, const Support& support,
                            bool with_covariance, int threads) {
  check_support(params, support);
  const int n = params.n_modes();
  const int nf = feature_count(n);
  const std::uint64_t count = support.size();
  const std::uint64_t chunk = with_covariance ? 2048 : 1 << 16;
  const std::uint64_t n_chunks = (count + chunk - 1) / chunk;

  auto parts = run_chunks<Partial>(n_chunks, threads, [&](std::uint64_t c) {
    const std::uint64_t begin = c * chunk;
    const std::uint64_t end = std::min(count, begin + chunk);
    const std::size_t len = end - begin;
    std::vector<Mask> configs(len);
    Mask s = support.config(begin);
    for (std::size_t k = 0; k < len; ++k) {
      configs[k] = s;
      if (support.is_full()) ++s;
      else lex_next(n, s);
    }
    std::vector<double> energy(len);
    Partial p;
    p.empty = false;
    for (std::size_t k = 0; k < len; ++k) {
      energy[k] = config_energy(params, configs[k]);
      p.reference = std::min(p.reference, energy[k]);
    }
    p.first = Eigen::VectorXd::Zero(n);
    p.pairs = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd features;
    if (with_covariance) features.resize(nf, static_cast<Eigen::Index>(len));
    for (std::size_t k = 0; k < len; ++k) {
      const double w = std::exp(p.reference - energy[k]);
      p.z += w;
      for_each_bit(configs[k], [&](int i) {
        p.first(i) += w;
        for_each_bit(configs[k], [&](int j) { p.pairs(i, j) += w; });
      });
      if (with_covariance) {
        pack_features(configs[k], n, features.col(static_cast<Eigen::Index>(k)));
        features.col(static_cast<Eigen::Index>(k)) *= std::sqrt(w);
      }
    }
    if (with_covariance) {
      p.cov = Eigen::MatrixXd::Zero(nf, nf);
      p.cov.selfadjointView<Eigen::Lower>().rankUpdate(features);
    }
    return p;
  });
  return reduce_partials(parts, n, with_covariance, nf);
}

namespace {

// Index of every subset of a `width`-bit half with at most `max_degree`
// elements: subsets are grouped by size, lexicographic within a size.
class MonomialIndex {
 public:
  MonomialIndex(int width, int max_degree) : width_(width), offset_(max_degree + 2, 0) {
    for (int d = 0; d <= max_degree; ++d) offset_[d + 1] = offset_[d] + binomial(width, d);
  }
  std::size_t size(int max_degree) const { return offset_[max_degree + 1]; }
  std::size_t operator()(Mask s) const {
    const int d = popcount(s);
    return offset_[d] + (d == 0 ? 0 : lex_rank(width_, s));
  }

 private:
  int width_;
  std::vector<std::uint64_t> offset_;
};

// Row k of `out` gets a one in the column of every subset of `masks[k]` with
// at most three elements.
Eigen::MatrixXd subset_indicators(const std::vector<Mask>& masks, std::size_t begin, std::size_t end,
                                  const MonomialIndex& index, std::size_t columns) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(end - begin),
                                              static_cast<Eigen::Index>(columns));
  std::vector<int> bits;
  for (std::size_t r = begin; r < end; ++r) {
    const Eigen::Index row = static_cast<Eigen::Index>(r - begin);
    bits = mask_to_modes(masks[r]);
    const int p = static_cast<int>(bits.size());
    out(row, 0) = 1.0;
    for (int i = 0; i < p; ++i) {
      const Mask mi = Mask{1} << bits[i];
      out(row, static_cast<Eigen::Index>(index(mi))) = 1.0;
      for (int j = i + 1; j < p; ++j) {
        const Mask mij = mi | (Mask{1} << bits[j]);
        out(row, static_cast<Eigen::Index>(index(mij))) = 1.0;
        for (int k = j + 1; k < p; ++k)
          out(row, static_cast<Eigen::Index>(index(mij | (Mask{1} << bits[k])))) = 1.0;
      }
    }
  }
  return out;
}

// Adds w to the entry of every subset of s with at most four elements.
void add_subsets4(Mask s, double w, const MonomialIndex& index, Eigen::VectorXd& out) {
  const std::vector<int> bits = mask_to_modes(s);
  const int p = static_cast<int>(bits.size());
  out(0) += w;
  for (int i = 0; i < p; ++i) {
    const Mask mi = Mask{1} << bits[i];
    out(static_cast<Eigen::Index>(index(mi))) += w;
    for (int j = i + 1; j < p; ++j) {
      const Mask mij = mi | (Mask{1} << bits[j]);
      out(static_cast<Eigen::Index>(index(mij))) += w;
      for (int k = j + 1; k < p; ++k) {
        const Mask mijk = mij | (Mask{1} << bits[k]);
        out(static_cast<Eigen::Index>(index(mijk))) += w;
        for (int l = k + 1; l < p; ++l)
          out(static_cast<Eigen::Index>(index(mijk | (Mask{1} << bits[l])))) += w;
      }
    }
  }
}

Mask feature_modes(int f, int n) {
  if (f < n) return Mask{1} << f;
  int k = f - n, i = 1;
  while (k >= i) k -= i++;
  return (Mask{1} << i) | (Mask{1} << k);
}

}  // namespace

FamilyStats split_stats(const PairwiseParams& params, const Support& support, int threads,
                        bool with_covariance) {
  check_support(params, support);
  const int n = params.n_modes();
  const int na = n / 2, nb = n - na;
  if (na > 24 || nb > 24) throw BudgetExceeded("split evaluator limited to 48 modes");
  const std::size_t size_a = std::size_t{1} << na, size_b = std::size_t{1} << nb;

  // Energies of every subset of each half.
  const auto half_energies = [&](int offset, int width) {
    std::vector<double> e(std::size_t{1} << width, 0.0);
    for (std::size_t a = 1; a < e.size(); ++a) {
      const int low = std::countr_zero(a);
      const std::size_t rest = a & (a - 1);
      double de = params.lambdas(offset + low);
      for_each_bit(rest, [&](int i) { de += 2.0 * params.v(offset + low, offset + i); });
      e[a] = e[rest] + de;
    }
    return e;
  };
  const std::vector<double> ea = half_energies(0, na);
  const std::vector<double> eb = half_energies(na, nb);
  const Eigen::MatrixXd cross = 2.0 * params.v.block(0, na, na, nb);

  std::vector<std::vector<Mask>> rows_by_count(na + 1), cols_by_count(nb + 1);
  for (std::size_t a = 0; a < size_a; ++a) rows_by_count[popcount(a)].push_back(a);
  for (std::size_t b = 0; b < size_b; ++b) cols_by_count[popcount(b)].push_back(b);

  struct Block {
    std::vector<Mask> rows;  // all rows of the block
    std::vector<Mask> cols;
  };
  std::vector<Block> blocks;
  if (support.is_full()) {
    Block all;
    for (std::size_t a = 0; a < size_a; ++a) all.rows.push_back(a);
    for (std::size_t b = 0; b < size_b; ++b) all.cols.push_back(b);
    blocks.push_back(std::move(all));
  } else {
    const int m = support.particles;
    for (int k = std::max(0, m - nb); k <= std::min(na, m); ++k)
      blocks.push_back({rows_by_count[k], cols_by_count[m - k]});
  }

  struct Task {
    std::size_t block;
    std::size_t row_begin, row_end;
  };
  const std::size_t target_entries = std::size_t{1} << (with_covariance ? 23 : 21);
  std::vector<Task> tasks;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const std::size_t cols = blocks[bi].cols.size();
    const std::size_t rows = blocks[bi].rows.size();
    if (rows == 0 || cols == 0) continue;
    const std::size_t step = std::max<std::size_t>(1, target_entries / cols);
    for (std::size_t r = 0; r < rows; r += step) tasks.push_back({bi, r, std::min(rows, r + step)});
  }

  std::vector<Eigen::MatrixXd> col_indicators(blocks.size());
  std::vector<Eigen::RowVectorXd> col_energies(blocks.size());
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& cols = blocks[bi].cols;
    Eigen::MatrixXd ib = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cols.size()), nb);
    Eigen::RowVectorXd ebv(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
      for_each_bit(cols[c], [&](int j) { ib(static_cast<Eigen::Index>(c), j) = 1.0; });
      ebv(static_cast<Eigen::Index>(c)) = eb[cols[c]];
    }
    col_indicators[bi] = std::move(ib);
    col_energies[bi] = std::move(ebv);
  }

  // Fourth-order moments: a product of two features is a monomial of degree
  // at most four, which factors into a monomial on each half.
  const MonomialIndex index_a(na, 4), index_b(nb, 4);
  const std::size_t a3 = index_a.size(3), b3 = index_b.size(3);
  struct Quartic {
    Eigen::MatrixXd mixed;  // (A subsets <= 3) x (B subsets <= 3)
    Eigen::VectorXd pure_a, pure_b;  // subsets <= 4 within one half
  };

  std::vector<Quartic> quartics(with_covariance ? tasks.size() : 0);
  auto parts = run_chunks<Partial>(tasks.size(), threads, [&](std::uint64_t t) {
    const Task& task = tasks[t];
    const Block& block = blocks[task.block];
    const Eigen::MatrixXd& ib = col_indicators[task.block];
    const Eigen::Index r = static_cast<Eigen::Index>(task.row_end - task.row_begin);
    Eigen::MatrixXd ia = Eigen::MatrixXd::Zero(r, na);
    Eigen::VectorXd eav(r);
    for (Eigen::Index k = 0; k < r; ++k) {
      const Mask a = block.rows[task.row_begin + static_cast<std::size_t>(k)];
      for_each_bit(a, [&](int i) { ia(k, i) = 1.0; });
      eav(k) = ea[a];
    }
    Eigen::MatrixXd x = (ia * cross) * ib.transpose();
    x.colwise() += eav;
    x.rowwise() += col_energies[task.block];

    Partial p;
    p.empty = false;
    p.reference = x.minCoeff();
    x = (p.reference - x.array()).exp().matrix();
    const Eigen::VectorXd row_sum = x.rowwise().sum();
    const Eigen::VectorXd col_sum = x.colwise().sum().transpose();
    p.z = row_sum.sum();
    p.first.resize(n);
    p.first.head(na) = ia.transpose() * row_sum;
    p.first.tail(nb) = ib.transpose() * col_sum;
    p.pairs.resize(n, n);
    p.pairs.topLeftCorner(na, na) = ia.transpose() * row_sum.asDiagonal() * ia;
    p.pairs.bottomRightCorner(nb, nb) = ib.transpose() * col_sum.asDiagonal() * ib;
    const Eigen::MatrixXd ab = ia.transpose() * (x * ib);
    p.pairs.topRightCorner(na, nb) = ab;
    p.pairs.bottomLeftCorner(nb, na) = ab.transpose();

    if (with_covariance) {
      Quartic& q = quartics[t];
      const Eigen::MatrixXd sa = subset_indicators(block.rows, task.row_begin, task.row_end, index_a, a3);
      const Eigen::MatrixXd sb = subset_indicators(block.cols, 0, block.cols.size(), index_b, b3);
      q.mixed.noalias() = sa.transpose() * (x * sb);
      q.pure_a = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(index_a.size(4)));
      q.pure_b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(index_b.size(4)));
      for (Eigen::Index k = 0; k < r; ++k)
        add_subsets4(block.rows[task.row_begin + static_cast<std::size_t>(k)], row_sum(k), index_a, q.pure_a);
      for (std::size_t c = 0; c < block.cols.size(); ++c)
        add_subsets4(block.cols[c], col_sum(static_cast<Eigen::Index>(c)), index_b, q.pure_b);
    }
    return p;
  });

  std::optional<Eigen::MatrixXd> covariance;
  if (with_covariance) {
    double reference = std::numeric_limits<double>::infinity();
    for (const auto& p : parts) reference = std::min(reference, p.reference);
    double z = 0.0;
    Quartic total{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(a3), static_cast<Eigen::Index>(b3)),
                  Eigen::VectorXd::Zero(static_cast<Eigen::Index>(index_a.size(4))),
                  Eigen::VectorXd::Zero(static_cast<Eigen::Index>(index_b.size(4)))};
    for (std::size_t t = 0; t < parts.size(); ++t) {
      const double scale = std::exp(reference - parts[t].reference);
      z += scale * parts[t].z;
      total.mixed += scale * quartics[t].mixed;
      total.pure_a += scale * quartics[t].pure_a;
      total.pure_b += scale * quartics[t].pure_b;
    }
    const Mask low = low_bits(na);
    const auto moment = [&](Mask u) {
      const Mask ua = u & low, ub = u >> na;
      double v;
      if (ub == 0) v = total.pure_a(static_cast<Eigen::Index>(index_a(ua)));
      else if (ua == 0) v = total.pure_b(static_cast<Eigen::Index>(index_b(ub)));
      else v = total.mixed(static_cast<Eigen::Index>(index_a(ua)), static_cast<Eigen::Index>(index_b(ub)));
      return v / z;
    };
    const int nf = feature_count(n);
    std::vector<Mask> modes(nf);
    Eigen::VectorXd coeff(nf), mean(nf);
    for (int f = 0; f < nf; ++f) {
      modes[f] = feature_modes(f, n);
      coeff(f) = f < n ? 1.0 : 2.0;
      mean(f) = coeff(f) * moment(modes[f]);
    }
    Eigen::MatrixXd c(nf, nf);
    for (int f = 0; f < nf; ++f)
      for (int g = 0; g <= f; ++g) {
        c(f, g) = coeff(f) * coeff(g) * moment(modes[f] | modes[g]) - mean(f) * mean(g);
        c(g, f) = c(f, g);
      }
    covariance = std::move(c);
  }
  FamilyStats stats = reduce_partials(parts, n, false, 0);
  stats.covariance = std::move(covariance);
  return stats;
}

FamilyStats family_stats(const PairwiseParams& params, const Support& support, int threads,
                         bool with_covariance) {
  if (support.n_modes >= 12 && support.size() > 4096)
    return split_stats(params, support, threads, with_covariance);
  return enumerate_stats(params, support, with_covariance, threads);
}

namespace {

// log e_k(exp(-lambda)) for k = 0..m over the modes not in `skip`.
std::vector<double> log_elementary(const Eigen::VectorXd& lambdas, int m, Mask skip) {
  std::vector<double> l(static_cast<std::size_t>(m) + 1, neg_inf);
  l[0] = 0.0;
  for (Eigen::Index j = 0; j < lambdas.size(); ++j) {
    if ((skip >> j) & 1) continue;
    for (int k = m; k >= 1; --k) l[k] = log_add(l[k], l[k - 1] - lambdas(j));
  }
  return l;
}

}  // namespace

double independent_sector_log_z(const Eigen::VectorXd& lambdas, int particles) {
  if (particles < 0 || particles > lambdas.size()) throw InvalidArgument("sector out of range");
  return log_elementary(lambdas, particles, 0).back();
}

FamilyStats independent_sector_stats(const Eigen::VectorXd& lambdas, int particles) {
  const int n = static_cast<int>(lambdas.size());
  FamilyStats stats;
  stats.log_z = independent_sector_log_z(lambdas, particles);
  stats.means = Eigen::VectorXd::Zero(n);
  stats.pairs = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n && particles >= 1; ++i) {
    const auto li = log_elementary(lambdas, particles - 1, Mask{1} << i);
    stats.means(i) = std::exp(-lambdas(i) + li[particles - 1] - stats.log_z);
    for (int j = 0; j < i && particles >= 2; ++j) {
      const auto lij = log_elementary(lambdas, particles - 2, (Mask{1} << i) | (Mask{1} << j));
      const double c = std::exp(-lambdas(i) - lambdas(j) + lij[particles - 2] - stats.log_z);
      stats.pairs(i, j) = c;
      stats.pairs(j, i) = c;
    }
  }
  stats.pairs.diagonal() = stats.means;
  return stats;
}

}  // namespace qens
