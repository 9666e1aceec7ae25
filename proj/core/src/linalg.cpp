#include "sketchdfo/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace sketchdfo::linalg {
namespace {

constexpr double kRankTol = 1e-12;

struct Givens {
  double c = 1.0;
  double s = 0.0;
  double r = 0.0;
};

// [c s; -s c] [a; b] = [r; 0] with r >= 0.
Givens make_givens(double a, double b) {
  Givens g;
  g.r = std::hypot(a, b);
  if (g.r == 0.0) return g;
  g.c = a / g.r;
  g.s = b / g.r;
  return g;
}

// Rotate columns i, j of Q so that Q G^T stays consistent with G applied
// to rows i, j of the triangular factor.
void rotate_columns(Matrix& q, Index i, Index j, const Givens& g) {
  for (Index row = 0; row < q.rows(); ++row) {
    const double a = q(row, i);
    const double b = q(row, j);
    q(row, i) = g.c * a + g.s * b;
    q(row, j) = -g.s * a + g.c * b;
  }
}

void rotate_rows(Matrix& r, Index i, Index j, const Givens& g, Index from_col) {
  for (Index col = from_col; col < r.cols(); ++col) {
    const double a = r(i, col);
    const double b = r(j, col);
    r(i, col) = g.c * a + g.s * b;
    r(j, col) = -g.s * a + g.c * b;
  }
}

}  // namespace

UpdatableQR::UpdatableQR(Index m) : q_(Matrix::Identity(m, m)), r_(m, 0) {}

void UpdatableQR::fix_sign(Index j) {
  if (r_(j, j) < 0.0) {
    r_.row(j) *= -1.0;
    q_.col(j) *= -1.0;
  }
}

void UpdatableQR::insert_column(const Eigen::Ref<const Vector>& col) {
  const Index m = rows();
  const Index k = cols();
  if (col.size() != m) throw std::invalid_argument("qr_insert_column: column length mismatch");
  if (k >= m) throw std::logic_error("qr_insert_column: factorization already has m columns");

  Vector w = q_.transpose() * col;
  for (Index j = m - 1; j > k; --j) {
    const Givens g = make_givens(w(j - 1), w(j));
    w(j - 1) = g.r;
    w(j) = 0.0;
    rotate_columns(q_, j - 1, j, g);
  }
  r_.conservativeResize(m, k + 1);
  r_.col(k) = w;
  r_.col(k).tail(m - k - 1).setZero();
  fix_sign(k);
  scale_ = std::max(scale_, col.norm());
}

void UpdatableQR::append_row(const Eigen::Ref<const Vector>& row) {
  const Index m = rows();
  const Index k = cols();
  if (row.size() != k) throw std::invalid_argument("qr_append_row: row length mismatch");

  Matrix q_new = Matrix::Zero(m + 1, m + 1);
  q_new.topLeftCorner(m, m) = q_;
  q_new(m, m) = 1.0;
  Matrix r_new(m + 1, k);
  r_new.topRows(m) = r_;
  r_new.row(m) = row.transpose();

  for (Index j = 0; j < std::min(k, m); ++j) {
    const Givens g = make_givens(r_new(j, j), r_new(m, j));
    rotate_rows(r_new, j, m, g, j);
    r_new(m, j) = 0.0;
    rotate_columns(q_new, j, m, g);
  }
  q_ = std::move(q_new);
  r_ = std::move(r_new);
  for (Index j = 0; j < std::min(k, m + 1); ++j) fix_sign(j);
  for (Index j = 0; j < k; ++j) scale_ = std::max(scale_, r_.col(j).norm());
}

bool UpdatableQR::column_dependent(Index j) const {
  return std::abs(r_(j, j)) <= kRankTol * scale_;
}

bool UpdatableQR::full_column_rank() const {
  if (cols() > rows()) return false;
  for (Index j = 0; j < cols(); ++j) {
    if (column_dependent(j)) return false;
  }
  return true;
}

UpdatableQR qr_factorize(const Eigen::Ref<const Matrix>& a) {
  const Index m = a.rows();
  const Index k = a.cols();
  if (m < k) throw std::invalid_argument("qr_factorize: requires rows >= cols");
  UpdatableQR out(m);
  if (k == 0) return out;

  Eigen::HouseholderQR<Matrix> hh(a);
  out.q_ = hh.householderQ() * Matrix::Identity(m, m);
  out.r_ = hh.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < k; ++j) out.fix_sign(j);
  for (Index j = 0; j < k; ++j) out.scale_ = std::max(out.scale_, a.col(j).norm());
  return out;
}

UpdatableQR qr_insert_column(UpdatableQR state, const Eigen::Ref<const Vector>& col) {
  state.insert_column(col);
  return state;
}

OrthonormalBasis nullspace_basis(const UpdatableQR& state) {
  if (!state.full_column_rank()) {
    throw RankDeficientError("nullspace_basis: factored matrix is rank deficient");
  }
  return OrthonormalBasis{state.q().rightCols(state.rows() - state.cols())};
}

double min_singular_value(const Eigen::Ref<const Matrix>& a) {
  if (a.size() == 0) throw std::invalid_argument("min_singular_value: empty matrix");
  Eigen::BDCSVD<Matrix> svd(a);
  return svd.singularValues().minCoeff();
}

double min_eigenvalue(const Eigen::Ref<const Matrix>& sym) {
  if (sym.size() == 0) throw std::invalid_argument("min_eigenvalue: empty matrix");
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double project_coefficient(const OrthonormalBasis& basis, const Eigen::Ref<const Vector>& v) {
  if (basis.empty()) return 0.0;
  return (basis.columns.transpose() * v).norm();
}

double orthogonality_error(const Eigen::Ref<const Matrix>& q) {
  if (q.cols() == 0) return 0.0;
  return (q.transpose() * q - Matrix::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
}

Matrix symmetrized(const Eigen::Ref<const Matrix>& a) {
  return 0.5 * (a + a.transpose());
}

}  // namespace sketchdfo::linalg
