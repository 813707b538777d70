#include <doctest.h>

#include <random>

#include "qens/combinatorics.hpp"
#include "qens/determinant.hpp"
#include "qens/lattice.hpp"

using namespace qens;

TEST_SUITE("determinant") {

TEST_CASE("LU determinant") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss;
  for (int n : {1, 2, 5, 9}) {
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = gauss(rng);
    CHECK(std::abs(lu_determinant(a) - a.determinant()) < 1e-12 * std::max(1.0, std::abs(a.determinant())));
  }
  Eigen::MatrixXd singular = Eigen::MatrixXd::Ones(3, 3);
  CHECK(lu_determinant(singular) == 0.0);
}

TEST_CASE("row minors follow mode order") {
  Eigen::MatrixXd u(4, 2);
  u << 1, 2, 3, 4, 5, 6, 7, 8;
  CHECK(row_minor_determinant(u, 0b0011) == doctest::Approx(1 * 4 - 2 * 3));
  CHECK(row_minor_determinant(u, 0b1001) == doctest::Approx(1 * 8 - 2 * 7));
}

TEST_CASE("rank-one updates along a revolving-door walk") {
  const QuenchSetup q = prepare_quench({20, 1.0, 12.0, 5, 9, Boundary::periodic});
  RowReplacementDeterminant det(q.overlap.u);
  bool first = true;
  double worst = 0.0;
  for_each_revolving(20, 9, 0, 40'000, [&](Mask s) {
    const double fast = first ? det.reset(s) : det.move_to(s);
    first = false;
    const double slow = std::abs(row_minor_determinant(q.overlap.u, s));
    worst = std::max(worst, std::abs(fast - slow));
  });
  CHECK(worst < 1e-12);
  CHECK(det.rebuilds() > 0);
}

TEST_CASE("walk through exactly singular minors") {
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(6, 3);
  u(0, 0) = u(2, 1) = u(4, 2) = 1.0;
  RowReplacementDeterminant det(u);
  bool first = true;
  for_each_revolving(6, 3, 0, binomial(6, 3), [&](Mask s) {
    const double fast = first ? det.reset(s) : det.move_to(s);
    first = false;
    CHECK(fast == doctest::Approx(s == 0b010101 ? 1.0 : 0.0));
  });
}

}
