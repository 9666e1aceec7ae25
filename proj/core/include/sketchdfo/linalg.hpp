#pragma once

// Dense kernels shared by the geometry and model-building code: a QR
// factorization that can grow one column or one row at a time with Givens
// rotations, orthonormal null-space bases, and small singular value /
// eigenvalue queries.

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>

namespace sketchdfo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

namespace linalg {

class RankDeficientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Columns of an m x r matrix with orthonormal columns.
struct OrthonormalBasis {
  Matrix columns;

  Index dim() const { return columns.rows(); }
  Index rank() const { return columns.cols(); }
  bool empty() const { return columns.cols() == 0; }
};

/// Full QR factorization A = Q R with Q square (m x m) and R upper
/// trapezoidal (m x k). Diagonal of R is kept nonnegative so the
/// factorization of a full-rank matrix is unique.
class UpdatableQR {
 public:
  UpdatableQR() = default;
  /// Empty factorization of an m x 0 matrix (Q = I).
  explicit UpdatableQR(Index m);

  Index rows() const { return q_.rows(); }
  Index cols() const { return r_.cols(); }

  const Matrix& q() const { return q_; }
  const Matrix& r() const { return r_; }

  /// Append a column; O(m^2) via rotations of the trailing rows.
  void insert_column(const Eigen::Ref<const Vector>& col);

  /// Append a row to the factored matrix; k rotations, Q grows to (m+1).
  void append_row(const Eigen::Ref<const Vector>& row);

  /// Largest column norm inserted so far; the scale for rank decisions.
  double scale() const { return scale_; }

  /// True when |R(j,j)| is at or below 1e-12 * scale().
  bool column_dependent(Index j) const;
  bool full_column_rank() const;

  /// Q * R, the matrix currently represented.
  Matrix reconstruct() const { return q_ * r_; }

 private:
  friend UpdatableQR qr_factorize(const Eigen::Ref<const Matrix>& a);

  void fix_sign(Index j);

  Matrix q_;
  Matrix r_;
  double scale_ = 0.0;
};

/// Batch factorization (Householder) normalised to the same sign
/// convention as the incremental path.
UpdatableQR qr_factorize(const Eigen::Ref<const Matrix>& a);

/// Functional form of UpdatableQR::insert_column.
UpdatableQR qr_insert_column(UpdatableQR state, const Eigen::Ref<const Vector>& col);

/// Trailing m - k columns of Q, an orthonormal basis of the left null space.
/// Throws RankDeficientError if any R diagonal is negligible.
OrthonormalBasis nullspace_basis(const UpdatableQR& state);

/// Smallest singular value of a nonempty matrix.
double min_singular_value(const Eigen::Ref<const Matrix>& a);

/// Smallest eigenvalue of a symmetric matrix (lower triangle is read).
double min_eigenvalue(const Eigen::Ref<const Matrix>& sym);

/// Norm of basis^T v; zero for an empty basis.
double project_coefficient(const OrthonormalBasis& basis, const Eigen::Ref<const Vector>& v);

/// Max |Q^T Q - I| entry.
double orthogonality_error(const Eigen::Ref<const Matrix>& q);

/// Returns (a + a^T) / 2.
Matrix symmetrized(const Eigen::Ref<const Matrix>& a);

}  // namespace linalg
}  // namespace sketchdfo
