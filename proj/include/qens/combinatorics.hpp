#pragma once

#include <bit>
#include <cstdint>
#include <vector>

namespace qens {

/// Occupation bitstring over at most 64 single-particle modes; bit j is the
/// occupation of mode j.
using Mask = std::uint64_t;

inline constexpr int max_modes = 64;

inline int popcount(Mask s) { return std::popcount(s); }

inline Mask low_bits(int n) {
  return n >= 64 ? ~Mask{0} : (Mask{1} << n) - 1;
}

/// Calls f(j) for every set bit j of s in ascending order.
template <class F>
inline void for_each_bit(Mask s, F&& f) {
  while (s) {
    f(std::countr_zero(s));
    s &= s - 1;
  }
}

std::vector<int> mask_to_modes(Mask s);
Mask modes_to_mask(const std::vector<int>& modes);

/// Exact binomial coefficient from a precomputed Pascal table; 0 when k is
/// outside [0, n]. n must not exceed 64.
std::uint64_t binomial(int n, int k);

/// Configs of an (n, m) sector in lexicographic order of their sorted mode
/// lists: for (4, 2) that is {0,1} {0,2} {0,3} {1,2} {1,3} {2,3}.
std::uint64_t lex_rank(int n, Mask s);
Mask lex_unrank(int n, int m, std::uint64_t rank);
/// Next config in lexicographic order; returns false after the last one.
bool lex_next(int n, Mask& s);

/// Revolving-door order R(n, m) = R(n-1, m) followed by reversed R(n-1, m-1)
/// with mode n-1 added. Consecutive configs differ by moving one particle.
std::uint64_t revolving_rank(int n, Mask s);
Mask revolving_unrank(int n, int m, std::uint64_t rank);

namespace detail {

template <class F>
void revolving_visit(int n, int t, bool reversed, Mask suffix, std::uint64_t base,
                     std::uint64_t lo, std::uint64_t hi, F& f) {
  const std::uint64_t size = binomial(n, t);
  if (base >= hi || base + size <= lo) return;
  if (t == 0) {
    f(suffix);
    return;
  }
  if (t == n) {
    f(suffix | low_bits(n));
    return;
  }
  const Mask top = Mask{1} << (n - 1);
  if (!reversed) {
    revolving_visit(n - 1, t, false, suffix, base, lo, hi, f);
    revolving_visit(n - 1, t - 1, true, suffix | top, base + binomial(n - 1, t), lo,
                    hi, f);
  } else {
    revolving_visit(n - 1, t - 1, false, suffix | top, base, lo, hi, f);
    revolving_visit(n - 1, t, true, suffix, base + binomial(n - 1, t - 1), lo, hi,
                    f);
  }
}

}  // namespace detail

/// Visits configs with revolving-door rank in [first, last) in order.
template <class F>
void for_each_revolving(int n, int m, std::uint64_t first, std::uint64_t last, F&& f) {
  detail::revolving_visit(n, m, false, Mask{0}, 0, first, last, f);
}

}  // namespace qens
