#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>

#include "qens/combinatorics.hpp"

namespace qens {

/// Determinant by LU with partial pivoting. Exactly singular input gives 0.
double lu_determinant(Eigen::MatrixXd a);

/// Determinant of the square submatrix of `u` made of the rows listed in `rows`
/// (ascending mode order, so the sign matches the Fock-state convention).
double row_minor_determinant(const Eigen::MatrixXd& u, Mask rows);

/// Tracks det(U_S) while S changes one row at a time, as in a revolving-door
/// walk. Each move costs O(M^2) via a Sherman-Morrison update of the inverse;
/// the inverse is rebuilt from an LU factorization every `refresh_interval`
/// moves and whenever the update ratio is far from one, so round-off cannot
/// accumulate over long walks. Row order follows slot assignment, so only
/// |det| is meaningful.
class RowReplacementDeterminant {
 public:
  explicit RowReplacementDeterminant(const Eigen::MatrixXd& u, int refresh_interval = 64,
                                     double ratio_floor = 1e-3);

  /// Starts a walk at config s; returns |det U_S|.
  double reset(Mask s);
  /// Moves from the current config to `next`, which must differ by exactly one
  /// particle move; returns |det U_next|.
  double move_to(Mask next);

  Mask current() const { return current_; }
  double abs_determinant() const { return std::abs(det_); }
  std::uint64_t rebuilds() const { return rebuilds_; }

 private:
  void rebuild();

  const Eigen::MatrixXd& u_;
  int m_;
  int refresh_interval_;
  double ratio_floor_;
  Eigen::MatrixXd a_;
  Eigen::MatrixXd inv_;
  Eigen::RowVectorXd scratch_;
  Eigen::VectorXd column_;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  std::array<int, max_modes> slot_of_mode_{};
  Mask current_ = 0;
  double det_ = 0.0;
  bool inverse_valid_ = false;
  int since_rebuild_ = 0;
  std::uint64_t rebuilds_ = 0;
};

}  // namespace qens
