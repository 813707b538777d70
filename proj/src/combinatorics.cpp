#include "qens/combinatorics.hpp"

#include <array>

#include "qens/error.hpp"

namespace qens {

namespace {

using PascalTable = std::array<std::array<std::uint64_t, max_modes + 1>, max_modes + 1>;

PascalTable make_pascal() {
  PascalTable c{};
  for (int n = 0; n <= max_modes; ++n) {
    c[n][0] = 1;
    for (int k = 1; k <= n; ++k) c[n][k] = c[n - 1][k - 1] + (k <= n - 1 ? c[n - 1][k] : 0);
  }
  return c;
}

const PascalTable& pascal() {
  static const PascalTable table = make_pascal();
  return table;
}

}  // namespace

std::vector<int> mask_to_modes(Mask s) {
  std::vector<int> modes;
  modes.reserve(popcount(s));
  for_each_bit(s, [&](int j) { modes.push_back(j); });
  return modes;
}

Mask modes_to_mask(const std::vector<int>& modes) {
  Mask s = 0;
  for (int j : modes) {
    if (j < 0 || j >= max_modes) throw InvalidArgument("mode index out of range");
    s |= Mask{1} << j;
  }
  return s;
}

std::uint64_t binomial(int n, int k) {
  if (n < 0 || n > max_modes) throw InvalidArgument("binomial: n out of range");
  if (k < 0 || k > n) return 0;
  return pascal()[n][k];
}

std::uint64_t lex_rank(int n, Mask s) {
  const int m = popcount(s);
  std::uint64_t acc = 0;
  int i = 1;
  for_each_bit(s, [&](int c) {
    acc += binomial(n - 1 - c, m - i + 1);
    ++i;
  });
  return binomial(n, m) - 1 - acc;
}

Mask lex_unrank(int n, int m, std::uint64_t rank) {
  if (rank >= binomial(n, m)) throw InvalidArgument("lex_unrank: rank out of range");
  Mask s = 0;
  int v = 0;
  for (int i = 1; i <= m; ++i) {
    for (;; ++v) {
      const std::uint64_t count = binomial(n - 1 - v, m - i);
      if (rank < count) break;
      rank -= count;
    }
    s |= Mask{1} << v;
    ++v;
  }
  return s;
}

bool lex_next(int n, Mask& s) {
  const int m = popcount(s);
  // Set bits packed against the top end cannot advance.
  int k = 0;
  while (k < m && ((s >> (n - 1 - k)) & 1)) ++k;
  if (k == m) return false;
  Mask rest = s & ~(low_bits(n) ^ low_bits(n - k));
  const int j = 63 - std::countl_zero(rest);
  rest &= ~(Mask{1} << j);
  rest |= low_bits(k + 1) << (j + 1);
  s = rest;
  return true;
}

std::uint64_t revolving_rank(int n, Mask s) {
  // Walk the recursion from the top mode down; `reversed` tracks which half of
  // each level we are in.
  int t = popcount(s);
  std::uint64_t rank = 0;
  bool reversed = false;
  for (; n > 0 && t > 0 && t < n; --n) {
    const Mask top = Mask{1} << (n - 1);
    const bool has_top = (s & top) != 0;
    if (!reversed) {
      if (has_top) {
        rank += binomial(n - 1, t);
        reversed = true;
        --t;
      }
    } else {
      if (has_top) {
        reversed = false;
        --t;
      } else {
        rank += binomial(n - 1, t - 1);
      }
    }
  }
  return rank;
}

Mask revolving_unrank(int n, int m, std::uint64_t rank) {
  if (rank >= binomial(n, m)) throw InvalidArgument("revolving_unrank: rank out of range");
  Mask result = 0;
  for_each_revolving(n, m, rank, rank + 1, [&](Mask s) { result = s; });
  return result;
}

}  // namespace qens
