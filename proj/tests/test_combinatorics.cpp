#include <doctest.h>

#include <set>
#include <vector>

#include "qens/combinatorics.hpp"
#include "qens/error.hpp"
#include "qens/fock_ensembles.hpp"

using namespace qens;

TEST_SUITE("combinatorics") {

TEST_CASE("binomial table") {
  CHECK(binomial(4, 2) == 6);
  CHECK(binomial(30, 15) == 155'117'520ULL);
  CHECK(binomial(64, 32) == 1'832'624'140'942'590'534ULL);
  CHECK(binomial(5, 7) == 0);
  CHECK(binomial(5, -1) == 0);
}

TEST_CASE("lexicographic sector order") {
  CHECK(enumerate_configs(3, 1) == std::vector<Mask>{0b001, 0b010, 0b100});
  const auto c42 = enumerate_configs(4, 2);
  CHECK(c42 == std::vector<Mask>{0b0011, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100});
  for (std::size_t i = 0; i < c42.size(); ++i) {
    CHECK(lex_rank(4, c42[i]) == i);
    CHECK(lex_unrank(4, 2, i) == c42[i]);
  }
  CHECK_THROWS_AS(enumerate_configs(30, 15, 1000), BudgetExceeded);
}

TEST_CASE("rank and unrank round trip") {
  for (int n : {1, 7, 12}) {
    for (int m = 0; m <= n; ++m) {
      const std::uint64_t count = binomial(n, m);
      for (std::uint64_t r = 0; r < count; ++r) {
        const Mask s = lex_unrank(n, m, r);
        REQUIRE(popcount(s) == m);
        REQUIRE(lex_rank(n, s) == r);
        REQUIRE(revolving_rank(n, revolving_unrank(n, m, r)) == r);
      }
    }
  }
}

TEST_CASE("revolving door moves one particle per step") {
  for (auto [n, m] : {std::pair{10, 5}, std::pair{9, 2}, std::pair{12, 11}}) {
    std::set<Mask> seen;
    Mask prev = 0;
    std::uint64_t r = 0;
    for_each_revolving(n, m, 0, binomial(n, m), [&](Mask s) {
      CHECK(popcount(s) == m);
      CHECK(revolving_unrank(n, m, r) == s);
      if (r > 0) CHECK(popcount(s ^ prev) == 2);
      seen.insert(s);
      prev = s;
      ++r;
    });
    CHECK(seen.size() == binomial(n, m));
  }
}

TEST_CASE("chunked walks concatenate") {
  std::vector<Mask> whole, pieces;
  for_each_revolving(11, 4, 0, binomial(11, 4), [&](Mask s) { whole.push_back(s); });
  for (std::uint64_t lo = 0; lo < binomial(11, 4); lo += 37)
    for_each_revolving(11, 4, lo, std::min(lo + 37, binomial(11, 4)), [&](Mask s) { pieces.push_back(s); });
  CHECK(whole == pieces);
}

TEST_CASE("mask helpers") {
  CHECK(mask_to_modes(0b101001) == std::vector<int>{0, 3, 5});
  CHECK(modes_to_mask({0, 3, 5}) == 0b101001);
  CHECK(low_bits(64) == ~Mask{0});
}

}
