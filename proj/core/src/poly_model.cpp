#include "sketchdfo/poly_model.hpp"

#include <cmath>
#include <limits>

namespace sketchdfo {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kCholTol = 1e-12;

void fill_quadratic(const Eigen::Ref<const Vector>& y, Eigen::Ref<Vector> out) {
  const Index n = y.size();
  for (Index i = 0; i < n; ++i) out(i) = 0.5 * y(i) * y(i);
  Index k = n;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) out(k++) = y(i) * y(j) * kInvSqrt2;
  }
}

Matrix quadratic_block(const Eigen::Ref<const Matrix>& points) {
  const Index n = points.cols();
  Matrix out(points.rows(), quadratic_count(n));
  Vector row(quadratic_count(n));
  for (Index i = 0; i < points.rows(); ++i) {
    fill_quadratic(points.row(i).transpose(), row);
    out.row(i) = row.transpose();
  }
  return out;
}

// LLT with an explicit pivot test; Eigen's LLT alone only catches
// nonpositive pivots.
bool factor_reduced(const Matrix& reduced, Eigen::LLT<Matrix>& chol) {
  if (reduced.rows() == 0) return true;
  chol.compute(reduced);
  if (chol.info() != Eigen::Success) return false;
  const double trace = reduced.trace();
  const Vector diag = chol.matrixLLT().diagonal();
  const double min_pivot = diag.cwiseAbs().minCoeff();
  return trace > 0.0 && min_pivot * min_pivot > kCholTol * trace;
}

}  // namespace

Index basis_size(const BasisSpec& spec, Index n) {
  switch (spec.kind) {
    case BasisKind::Linear: return n + 1;
    case BasisKind::Quadratic: return n + 1 + quadratic_count(n);
    case BasisKind::Sketched: return spec.directions.rows() + 1;
    case BasisKind::Complement: return spec.directions.rows();
    case BasisKind::QuadraticOnly: return quadratic_count(n);
  }
  return 0;
}

Vector eval_basis(const BasisSpec& spec, const Eigen::Ref<const Vector>& y) {
  const Index n = y.size();
  Vector out(basis_size(spec, n));
  switch (spec.kind) {
    case BasisKind::Linear:
      out(0) = 1.0;
      out.tail(n) = y;
      break;
    case BasisKind::Quadratic:
      out(0) = 1.0;
      out.segment(1, n) = y;
      fill_quadratic(y, out.tail(quadratic_count(n)));
      break;
    case BasisKind::Sketched:
      out(0) = 1.0;
      out.tail(spec.directions.rows()) = spec.directions * y;
      break;
    case BasisKind::Complement:
      out = spec.directions * y;
      break;
    case BasisKind::QuadraticOnly:
      fill_quadratic(y, out);
      break;
  }
  return out;
}

Matrix assemble_vandermonde(const BasisSpec& spec, const Eigen::Ref<const Matrix>& points) {
  const Index n = points.cols();
  if (spec.kind == BasisKind::QuadraticOnly) return quadratic_block(points);
  Matrix out(points.rows(), basis_size(spec, n));
  for (Index i = 0; i < points.rows(); ++i) {
    out.row(i) = eval_basis(spec, points.row(i).transpose()).transpose();
  }
  return out;
}

Vector pack_hessian(const Eigen::Ref<const Matrix>& h) {
  const Index n = h.rows();
  Vector beta(quadratic_count(n));
  for (Index i = 0; i < n; ++i) beta(i) = h(i, i);
  Index k = n;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) beta(k++) = 0.5 * (h(i, j) + h(j, i)) / kInvSqrt2;
  }
  return beta;
}

Matrix unpack_hessian(const Eigen::Ref<const Vector>& beta, Index n) {
  if (beta.size() != quadratic_count(n)) throw std::invalid_argument("unpack_hessian: size mismatch");
  Matrix h(n, n);
  for (Index i = 0; i < n; ++i) h(i, i) = beta(i);
  Index k = n;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      h(i, j) = h(j, i) = beta(k++) * kInvSqrt2;
    }
  }
  return h;
}

QuadraticModel QuadraticModel::make(Vector center, double c, Vector g, const Matrix& h) {
  QuadraticModel m;
  m.center = std::move(center);
  m.c = c;
  m.g = std::move(g);
  m.H = linalg::symmetrized(h);
  return m;
}

double QuadraticModel::L_mg() const {
  if (H.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(H, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double model_value(const QuadraticModel& m, const Eigen::Ref<const Vector>& x) {
  const Vector d = x - m.center;
  return m.c + m.g.dot(d) + 0.5 * d.dot(m.H * d);
}

Vector model_gradient(const QuadraticModel& m, const Eigen::Ref<const Vector>& x) {
  return m.g + m.H * (x - m.center);
}

BasisSketchSystem::BasisSketchSystem(const Eigen::Ref<const Matrix>& s,
                                     const Eigen::Ref<const Matrix>& s_perp,
                                     const Eigen::Ref<const Matrix>& points)
    : s_(s), s_perp_(s_perp), points_(points) {
  const Index n = points.cols();
  const Index p = points.rows();
  const Index rank = s.rows();
  if (s.cols() != n || s_perp.cols() != n) {
    throw std::invalid_argument("BasisSketchSystem: direction matrices must have n columns");
  }
  if (p < rank + 1) throw PoisednessError("basis sketch: fewer points than rank(S) + 1");

  Matrix m_s(p, rank + 1);
  m_s.col(0).setOnes();
  m_s.rightCols(rank) = points * s.transpose();
  const linalg::UpdatableQR qr = linalg::qr_factorize(m_s);
  if (!qr.full_column_rank()) throw PoisednessError("basis sketch: M(Phi_S, Y) is rank deficient");
  q1_ = qr.q().leftCols(rank + 1);
  r1_ = qr.r().topRows(rank + 1);
  null_ = qr.q().rightCols(p - rank - 1);

  const Matrix w = points * s_perp.transpose();
  const Matrix inner = points * points.transpose();
  gram_ = w * w.transpose() + 0.25 * inner.cwiseProduct(inner);
  reduced_ = null_.transpose() * gram_ * null_;
  reduced_ = linalg::symmetrized(reduced_);
  if (!factor_reduced(reduced_, chol_)) {
    throw PoisednessError("basis sketch: reduced KKT matrix is not positive definite");
  }
}

BasisSketchSystem::Batch BasisSketchSystem::solve(const Eigen::Ref<const Matrix>& rhs) const {
  const Index p = num_points();
  if (rhs.rows() != p) throw std::invalid_argument("BasisSketchSystem::solve: rhs rows mismatch");
  Batch out;
  if (null_.cols() > 0) {
    const Matrix omega = chol_.solve(null_.transpose() * rhs);
    out.lambda = null_ * omega;
  } else {
    out.lambda = Matrix::Zero(p, rhs.cols());
  }
  const Matrix consistent = rhs - gram_ * out.lambda;
  out.alpha = r1_.triangularView<Eigen::Upper>().solve(q1_.transpose() * consistent);
  out.gamma = (points_ * s_perp_.transpose()).transpose() * out.lambda;
  return out;
}

Matrix BasisSketchSystem::quadratic_coefficients(const Eigen::Ref<const Matrix>& lambda) const {
  return quadratic_block(points_).transpose() * lambda;
}

ConditioningDiagnostics BasisSketchSystem::diagnostics() const {
  ConditioningDiagnostics d;
  d.reduced_min_eigenvalue = reduced_.rows() == 0 ? std::numeric_limits<double>::infinity()
                                                  : linalg::min_eigenvalue(reduced_);
  d.inverse_bound = 1.0 / linalg::min_singular_value(r1_);
  return d;
}

SketchSolveResult solve_basis_sketch(const Eigen::Ref<const Matrix>& s,
                                     const Eigen::Ref<const Matrix>& s_perp,
                                     const Eigen::Ref<const Matrix>& points,
                                     const Eigen::Ref<const Vector>& rhs,
                                     const std::optional<SketchPrior>& prior) {
  const BasisSketchSystem sys(s, s_perp, points);
  Vector residual = rhs;
  if (prior) {
    if (prior->beta.size() > 0) residual -= quadratic_block(points) * prior->beta;
    if (prior->gamma.size() > 0) residual -= points * s_perp.transpose() * prior->gamma;
  }
  const auto batch = sys.solve(residual);

  SketchSolveResult out;
  out.alpha = batch.alpha.col(0);
  out.gamma = batch.gamma.col(0);
  out.lambda = batch.lambda.col(0);
  out.beta = sys.quadratic_coefficients(batch.lambda).col(0);
  if (prior) {
    if (prior->beta.size() > 0) out.beta += prior->beta;
    if (prior->gamma.size() > 0) out.gamma += prior->gamma;
  }
  out.kappa_diag = sys.diagnostics();
  return out;
}

MnhResult solve_mnh(const Eigen::Ref<const Matrix>& points, const Eigen::Ref<const Vector>& rhs,
                    const std::optional<Vector>& prior_beta) {
  const Index n = points.cols();
  const Index p = points.rows();
  if (p < n + 1) throw PoisednessError("mnh: fewer than n + 1 points");

  const Matrix m_l = assemble_vandermonde(BasisSpec::linear(), points);
  const Matrix m_q = assemble_vandermonde(BasisSpec::quadratic_only(), points);
  const linalg::UpdatableQR qr = linalg::qr_factorize(m_l);
  if (!qr.full_column_rank()) throw PoisednessError("mnh: M(Phi_L, Y) is rank deficient");
  const Matrix q1 = qr.q().leftCols(n + 1);
  const Matrix r1 = qr.r().topRows(n + 1);
  const Matrix z = qr.q().rightCols(p - n - 1);

  Vector residual = rhs;
  if (prior_beta) residual -= m_q * *prior_beta;

  Vector lambda = Vector::Zero(p);
  const Matrix f = m_q * m_q.transpose();
  if (z.cols() > 0) {
    const Matrix reduced = linalg::symmetrized(z.transpose() * f * z);
    Eigen::LLT<Matrix> chol;
    if (!factor_reduced(reduced, chol)) throw PoisednessError("mnh: reduced matrix is not positive definite");
    lambda = z * chol.solve(z.transpose() * residual);
  }

  MnhResult out;
  out.beta = m_q.transpose() * lambda;
  out.alpha = r1.triangularView<Eigen::Upper>().solve(q1.transpose() * (residual - f * lambda));
  if (prior_beta) out.beta += *prior_beta;
  return out;
}

double interpolation_residual(const Eigen::Ref<const Matrix>& s, const Eigen::Ref<const Matrix>& s_perp,
                              const Eigen::Ref<const Matrix>& points,
                              const Eigen::Ref<const Vector>& rhs, const SketchSolveResult& sol) {
  const Vector values = Vector::Constant(points.rows(), sol.alpha(0)) +
                        points * s.transpose() * sol.alpha.tail(s.rows()) +
                        points * s_perp.transpose() * sol.gamma + quadratic_block(points) * sol.beta;
  return (values - rhs).cwiseAbs().maxCoeff();
}

FullLinearityDiagnostics check_s_full_linearity(const QuadraticModel& m, const SmoothFunction& f,
                                                const Eigen::Ref<const Matrix>& s, double delta,
                                                double c, double big_lambda, double L_g,
                                                int samples, CounterRng& rng) {
  const Index p = s.rows();
  const double lmg = m.L_mg();
  FullLinearityDiagnostics out;
  const double root_p = std::sqrt(static_cast<double>(p));
  out.kappa_ef = (4.0 + 5.0 * big_lambda * root_p) / 2.0 * (L_g + lmg) * c * c;
  out.kappa_eg = 5.0 * big_lambda * root_p / 2.0 * (L_g + lmg) * c;
  out.samples = samples;
  if (p == 0) return out;

  for (int t = 0; t < samples; ++t) {
    Vector d(p);
    for (Index i = 0; i < p; ++i) d(i) = rng.normal();
    const double norm = d.norm();
    if (norm == 0.0) continue;
    const double radius = delta * std::pow(rng.uniform(), 1.0 / static_cast<double>(p));
    d *= radius / norm;

    const Vector x = m.center + s.transpose() * d;
    const double value_err = std::abs(model_value(m, x) - f.value(x));
    const double grad_err = (s * (model_gradient(m, x) - f.gradient(x))).norm();
    const double value_ratio = value_err / (delta * delta);
    const double grad_ratio = grad_err / delta;
    out.worst_value_ratio = std::max(out.worst_value_ratio, value_ratio);
    out.worst_gradient_ratio = std::max(out.worst_gradient_ratio, grad_ratio);
    if (value_ratio > out.kappa_ef * (1.0 + 1e-12)) ++out.value_violations;
    if (grad_ratio > out.kappa_eg * (1.0 + 1e-12)) ++out.gradient_violations;
  }
  return out;
}

}  // namespace sketchdfo
