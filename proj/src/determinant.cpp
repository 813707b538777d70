#include "qens/determinant.hpp"

#include <cmath>

#include "qens/error.hpp"

namespace qens {

double lu_determinant(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  double det = 1.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index pivot = k;
    double best = std::abs(a(k, k));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      if (std::abs(a(i, k)) > best) {
        best = std::abs(a(i, k));
        pivot = i;
      }
    }
    if (best == 0.0) return 0.0;
    if (pivot != k) {
      a.row(k).swap(a.row(pivot));
      det = -det;
    }
    const double diag = a(k, k);
    det *= diag;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double f = a(i, k) / diag;
      if (f != 0.0) a.row(i).tail(n - k - 1) -= f * a.row(k).tail(n - k - 1);
    }
  }
  return det;
}

double row_minor_determinant(const Eigen::MatrixXd& u, Mask rows) {
  const int m = static_cast<int>(u.cols());
  if (popcount(rows) != m) throw InvalidArgument("row subset size must equal the particle number");
  Eigen::MatrixXd sub(m, m);
  int r = 0;
  for_each_bit(rows, [&](int j) { sub.row(r++) = u.row(j); });
  return lu_determinant(std::move(sub));
}

RowReplacementDeterminant::RowReplacementDeterminant(const Eigen::MatrixXd& u,
                                                     int refresh_interval, double ratio_floor)
    : u_(u),
      m_(static_cast<int>(u.cols())),
      refresh_interval_(refresh_interval),
      ratio_floor_(ratio_floor),
      a_(m_, m_),
      inv_(m_, m_),
      scratch_(m_),
      column_(m_),
      lu_(m_) {}

void RowReplacementDeterminant::rebuild() {
  ++rebuilds_;
  since_rebuild_ = 0;
  lu_.compute(a_);
  det_ = lu_.determinant();
  // A rank-deficient (or nearly so) matrix has no usable inverse; stay on the
  // LU path until the walk leaves it.
  const double tiny = 1e-6;
  const auto& lu = lu_.matrixLU();
  double min_pivot = std::abs(lu(0, 0)), max_pivot = min_pivot;
  for (int k = 1; k < m_; ++k) {
    min_pivot = std::min(min_pivot, std::abs(lu(k, k)));
    max_pivot = std::max(max_pivot, std::abs(lu(k, k)));
  }
  inverse_valid_ = max_pivot > 0.0 && min_pivot > tiny * max_pivot;
  if (inverse_valid_) inv_ = lu_.inverse();
}

double RowReplacementDeterminant::reset(Mask s) {
  if (popcount(s) != m_) throw InvalidArgument("config has wrong particle number");
  int r = 0;
  for_each_bit(s, [&](int j) {
    slot_of_mode_[j] = r;
    a_.row(r++) = u_.row(j);
  });
  current_ = s;
  rebuild();
  return std::abs(det_);
}

double RowReplacementDeterminant::move_to(Mask next) {
  const Mask diff = current_ ^ next;
  const Mask out = diff & current_;
  const Mask in = diff & next;
  if (popcount(out) != 1 || popcount(in) != 1)
    throw InvalidArgument("move_to requires a single particle move");
  const int mode_out = std::countr_zero(out);
  const int mode_in = std::countr_zero(in);
  const int slot = slot_of_mode_[mode_out];
  slot_of_mode_[mode_in] = slot;
  current_ = next;

  if (!inverse_valid_ || since_rebuild_ + 1 >= refresh_interval_) {
    a_.row(slot) = u_.row(mode_in);
    rebuild();
    return std::abs(det_);
  }

  // det(A') / det(A) = u_in . inv(:, slot)
  const double ratio = u_.row(mode_in).dot(inv_.col(slot));
  if (std::abs(ratio) < ratio_floor_ || std::abs(ratio) * ratio_floor_ > 1.0) {
    a_.row(slot) = u_.row(mode_in);
    rebuild();
    return std::abs(det_);
  }
  // inv' = inv - inv(:, slot) * (u_in^T inv - e_slot^T) / ratio
  scratch_.noalias() = u_.row(mode_in) * inv_;
  scratch_(slot) -= 1.0;
  column_ = inv_.col(slot) / ratio;
  inv_.noalias() -= column_ * scratch_;
  a_.row(slot) = u_.row(mode_in);
  det_ *= ratio;
  ++since_rebuild_;
  return std::abs(det_);
}

}  // namespace qens
