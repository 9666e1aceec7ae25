#include "sketchdfo/geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <ostream>

namespace sketchdfo {
namespace {

double quad_kernel(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
  const double d = u.dot(v);
  return 0.25 * d * d;
}

}  // namespace

double sum_of_squares(const Eigen::Ref<const Vector>& residuals) {
  if (!residuals.allFinite()) return std::numeric_limits<double>::infinity();
  return residuals.squaredNorm();
}

Index PointBank::append(Vector point, Vector residuals) {
  if (dim_ == 0) dim_ = point.size();
  if (point.size() != dim_) throw std::invalid_argument("PointBank::append: dimension mismatch");
  BankEntry e;
  e.total = sum_of_squares(residuals);
  e.point = std::move(point);
  e.residuals = std::move(residuals);
  entries_.push_back(std::move(e));
  return size() - 1;
}

void PointBank::write_csv(std::ostream& os) const {
  const Index m = entries_.empty() ? 0 : entries_.front().residuals.size();
  os << "index";
  for (Index j = 0; j < dim_; ++j) os << ",x" << j + 1;
  for (Index j = 0; j < m; ++j) os << ",r" << j + 1;
  os << ",total\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ',' << buf;
  };
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    os << i;
    for (Index j = 0; j < e.point.size(); ++j) put(e.point(j));
    for (Index j = 0; j < e.residuals.size(); ++j) put(e.residuals(j));
    put(e.total);
    os << '\n';
  }
}

GeometryConfig GeometryConfig::defaults(Index n) {
  GeometryConfig cfg;
  cfg.c = std::sqrt(static_cast<double>(std::max<Index>(n, 1)));
  cfg.theta1 = 1e-5;
  cfg.theta2 = 1e-3;
  cfg.big_lambda = 1.0 / cfg.theta1;
  return cfg;
}

void GeometryConfig::validate() const {
  if (!(c >= 1.0)) throw std::invalid_argument("GeometryConfig: c must be >= 1");
  if (!(theta1 > 0.0 && theta1 <= 1.0 / c)) {
    throw std::invalid_argument("GeometryConfig: theta1 must lie in (0, 1/c]");
  }
  if (!(theta2 > 0.0)) throw std::invalid_argument("GeometryConfig: theta2 must be positive");
  if (!(big_lambda > 0.0)) throw std::invalid_argument("GeometryConfig: Lambda must be positive");
}

SubspaceSelection identify_initial_subspace(const PointBank& bank, const Eigen::Ref<const Vector>& x,
                                            double delta, const GeometryConfig& cfg) {
  const Index n = x.size();
  const double radius = cfg.c * delta;
  linalg::UpdatableQR qr(n);
  SubspaceSelection sel;

  for (Index i = 0; i < bank.size() && qr.cols() < n; ++i) {
    const BankEntry& e = bank[i];
    if (!e.finite()) continue;
    const Vector d = e.point - x;
    const double dist = d.norm();
    if (dist > radius || dist == 0.0) continue;
    const Vector u = d / radius;
    const Index k = qr.cols();
    const double proj = (qr.q().rightCols(n - k).transpose() * u).norm();
    if (proj < cfg.theta1) continue;
    qr.insert_column(u);
    sel.contributing_points.push_back(i);
  }

  const Index p = qr.cols();
  sel.Q = qr.q();
  sel.S = sel.Q.leftCols(p).transpose();
  sel.S_perp = sel.Q.rightCols(n - p).transpose();
  return sel;
}

Matrix InterpolationSet::displacements(const PointBank& bank, const Eigen::Ref<const Vector>& x,
                                       double delta) const {
  Matrix u(static_cast<Index>(points.size()), x.size());
  for (std::size_t r = 0; r < points.size(); ++r) {
    u.row(static_cast<Index>(r)) = ((bank[points[r]].point - x) / delta).transpose();
  }
  return u;
}

InterpolationSet determine_interpolation_set(const Eigen::Ref<const Matrix>& s,
                                             const Eigen::Ref<const Matrix>& s_perp,
                                             const std::vector<Index>& z, const PointBank& bank,
                                             const Eigen::Ref<const Vector>& x, double delta,
                                             const GeometryConfig& cfg, Index max_points) {
  const Index n = x.size();
  const Index rank = s.rows();
  InterpolationSet out;
  out.points = z;
  out.z_initial = z;
  out.sigma_min_record = std::numeric_limits<double>::infinity();

  const Index z_size = static_cast<Index>(z.size());
  Matrix u(z_size, n);
  for (Index r = 0; r < z_size; ++r) u.row(r) = ((bank[z[r]].point - x) / delta).transpose();

  Matrix m_s(z_size, rank + 1);
  m_s.col(0).setOnes();
  m_s.rightCols(rank) = u * s.transpose();
  if (z_size < rank + 1) return out;
  linalg::UpdatableQR qr = linalg::qr_factorize(m_s);
  if (!qr.full_column_rank()) return out;

  // Kernel rows for the complement block: K(a, b) = (S_perp a).(S_perp b) + (a.b)^2 / 4.
  std::vector<Vector> perp_rows;
  perp_rows.reserve(static_cast<std::size_t>(max_points));
  for (Index r = 0; r < z_size; ++r) perp_rows.push_back(s_perp * u.row(r).transpose());
  Matrix points_u = u;

  // Cholesky factor of N^T K N - theta2^2 I over the accepted null directions.
  const double shift = cfg.theta2 * cfg.theta2;
  Matrix chol(0, 0);
  Matrix null_cols;  // current N, rows = |Y|
  null_cols = qr.q().rightCols(qr.rows() - qr.cols());

  const double radius = cfg.c * delta;
  std::vector<char> in_set(static_cast<std::size_t>(bank.size()), 0);
  for (Index idx : z) in_set[static_cast<std::size_t>(idx)] = 1;

  Matrix gram = Matrix::Zero(z_size, z_size);
  for (Index a = 0; a < z_size; ++a) {
    for (Index b = 0; b <= a; ++b) {
      gram(a, b) = gram(b, a) = perp_rows[a].dot(perp_rows[b]) +
                                quad_kernel(points_u.row(a).transpose(), points_u.row(b).transpose());
    }
  }

  for (Index i = 0; i < bank.size(); ++i) {
    if (static_cast<Index>(out.points.size()) >= max_points) break;
    if (in_set[static_cast<std::size_t>(i)]) continue;
    const BankEntry& e = bank[i];
    if (!e.finite()) continue;
    const Vector d = e.point - x;
    if (d.norm() > radius) continue;
    const Vector ui = d / delta;

    linalg::UpdatableQR trial = qr;
    Vector row(rank + 1);
    row(0) = 1.0;
    row.tail(rank) = s * ui;
    trial.append_row(row);
    const Index size_new = trial.rows();
    const Vector q_new = trial.q().col(size_new - 1);

    const Vector perp_i = s_perp * ui;
    Vector k_col(size_new);
    for (Index a = 0; a < size_new - 1; ++a) {
      k_col(a) = perp_rows[static_cast<std::size_t>(a)].dot(perp_i) +
                 quad_kernel(points_u.row(a).transpose(), ui);
    }
    k_col(size_new - 1) = perp_i.squaredNorm() + quad_kernel(ui, ui);

    // K+ q_new, using the bordered structure of K+.
    const Vector& qn = q_new;
    Vector kq(size_new);
    kq.head(size_new - 1) = gram * qn.head(size_new - 1) + k_col.head(size_new - 1) * qn(size_new - 1);
    kq(size_new - 1) = k_col.dot(qn);
    const double c_new = qn.dot(kq);
    const Index k_old = null_cols.cols();
    Vector l = k_old > 0 ? Vector(null_cols.transpose() * kq.head(size_new - 1)) : Vector();

    double schur = c_new - shift;
    Vector zvec;
    if (k_old > 0) {
      zvec = chol.triangularView<Eigen::Lower>().solve(l);
      schur -= zvec.squaredNorm();
    }
    if (!(schur > 0.0)) continue;

    qr = std::move(trial);
    Matrix chol_new = Matrix::Zero(k_old + 1, k_old + 1);
    if (k_old > 0) {
      chol_new.topLeftCorner(k_old, k_old) = chol;
      chol_new.row(k_old).head(k_old) = zvec.transpose();
    }
    chol_new(k_old, k_old) = std::sqrt(schur);
    chol = std::move(chol_new);

    Matrix null_new = Matrix::Zero(size_new, k_old + 1);
    null_new.topLeftCorner(size_new - 1, k_old) = null_cols;
    null_new.col(k_old) = q_new;
    null_cols = std::move(null_new);

    Matrix gram_new(size_new, size_new);
    gram_new.topLeftCorner(size_new - 1, size_new - 1) = gram;
    gram_new.col(size_new - 1) = k_col;
    gram_new.row(size_new - 1) = k_col.transpose();
    gram = std::move(gram_new);

    points_u.conservativeResize(size_new, Eigen::NoChange);
    points_u.row(size_new - 1) = ui.transpose();
    perp_rows.push_back(perp_i);
    out.points.push_back(i);
    in_set[static_cast<std::size_t>(i)] = 1;
  }

  if (null_cols.cols() > 0) {
    const Matrix reduced = linalg::symmetrized(null_cols.transpose() * gram * null_cols);
    out.sigma_min_record = std::sqrt(std::max(0.0, linalg::min_eigenvalue(reduced)));
  }
  return out;
}

SolvabilityReport verify_unique_solvability(const Eigen::Ref<const Matrix>& s,
                                            const Eigen::Ref<const Matrix>& s_perp,
                                            const Eigen::Ref<const Matrix>& points) {
  SolvabilityReport rep;
  const Index p = points.rows();
  const Index rank = s.rows();
  if (p < rank + 1) return rep;

  Matrix m_s(p, rank + 1);
  m_s.col(0).setOnes();
  m_s.rightCols(rank) = points * s.transpose();
  const linalg::UpdatableQR qr = linalg::qr_factorize(m_s);
  rep.rank_ok = qr.full_column_rank();
  if (!rep.rank_ok) return rep;

  const Matrix null = qr.q().rightCols(p - rank - 1);
  if (null.cols() == 0) {
    rep.reduced_min_eigenvalue = std::numeric_limits<double>::infinity();
    rep.solvable = true;
    return rep;
  }
  const Matrix w = points * s_perp.transpose();
  const Matrix inner = points * points.transpose();
  const Matrix gram = w * w.transpose() + 0.25 * inner.cwiseProduct(inner);
  const Matrix reduced = linalg::symmetrized(null.transpose() * gram * null);
  rep.reduced_min_eigenvalue = linalg::min_eigenvalue(reduced);
  rep.solvable = rep.reduced_min_eigenvalue > 1e-12 * std::max(1.0, reduced.trace());
  return rep;
}

}  // namespace sketchdfo
