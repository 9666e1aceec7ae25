#include "sketchdfo/trust_region.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sketchdfo {
namespace {

double model_change(const Vector& g, const Matrix& h, const Vector& d) {
  return g.dot(d) + 0.5 * d.dot(h * d);
}

// tau >= 0 with |z + tau p| = delta.
double to_boundary(const Vector& z, const Vector& p, double delta) {
  const double a = p.squaredNorm();
  const double b = 2.0 * z.dot(p);
  const double c = z.squaredNorm() - delta * delta;
  const double disc = std::max(0.0, b * b - 4.0 * a * c);
  return (-b + std::sqrt(disc)) / (2.0 * a);
}

struct CgOutcome {
  Vector d;
  bool boundary = false;
  bool negative_curvature = false;
};

CgOutcome steihaug(const Vector& g, const Matrix& h, double delta) {
  const Index k = g.size();
  CgOutcome out;
  out.d = Vector::Zero(k);
  Vector r = g;
  Vector p = -r;
  const double tol = 1e-12 * std::max(1.0, g.norm());
  if (r.norm() <= tol) return out;
  for (Index it = 0; it < 2 * k + 10; ++it) {
    const Vector hp = h * p;
    const double curv = p.dot(hp);
    if (curv <= 0.0) {
      out.d += to_boundary(out.d, p, delta) * p;
      out.boundary = true;
      out.negative_curvature = true;
      return out;
    }
    const double rr = r.squaredNorm();
    const double alpha = rr / curv;
    const Vector next = out.d + alpha * p;
    if (next.norm() >= delta) {
      out.d += to_boundary(out.d, p, delta) * p;
      out.boundary = true;
      return out;
    }
    out.d = next;
    r += alpha * hp;
    if (r.norm() <= tol) return out;
    p = -r + (r.squaredNorm() / rr) * p;
  }
  return out;
}

Vector exact_boundary_step(const Vector& g, const Matrix& h, double delta) {
  const Index k = g.size();
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const Vector lam = es.eigenvalues();
  const Matrix& v = es.eigenvectors();
  const Vector a = v.transpose() * g;
  const double lam_min = lam(0);
  const double scale = std::max({1.0, lam.cwiseAbs().maxCoeff(), g.norm()});

  auto step_norm = [&](double sigma) {
    double acc = 0.0;
    for (Index j = 0; j < k; ++j) {
      const double den = lam(j) + sigma;
      if (den <= 0.0) return std::numeric_limits<double>::infinity();
      acc += (a(j) / den) * (a(j) / den);
    }
    return std::sqrt(acc);
  };
  auto step_at = [&](double sigma) {
    Vector c(k);
    for (Index j = 0; j < k; ++j) c(j) = -a(j) / (lam(j) + sigma);
    return Vector(v * c);
  };

  if (lam_min > 0.0 && step_norm(0.0) <= delta) return step_at(0.0);

  // Hard case: g has no weight on the leftmost eigenspace.
  const double lo = std::max(0.0, -lam_min);
  const double eig_tol = 1e-12 * scale;
  bool hard = lam_min <= 0.0;
  for (Index j = 0; j < k && hard; ++j) {
    if (lam(j) - lam_min <= eig_tol && std::abs(a(j)) > 1e-12 * scale) hard = false;
  }
  if (hard) {
    Vector c = Vector::Zero(k);
    for (Index j = 0; j < k; ++j) {
      if (lam(j) - lam_min > eig_tol) c(j) = -a(j) / (lam(j) - lam_min);
    }
    const double cn = c.norm();
    if (cn <= delta) {
      c(0) += std::sqrt(std::max(0.0, delta * delta - cn * cn));
      return v * c;
    }
  }

  // ||s(sigma)|| = delta on (lo, hi]; Newton on 1/||s|| - 1/delta, bisection fallback.
  double left = lo;
  double right = lo + g.norm() / delta + lam.cwiseAbs().maxCoeff() + 1.0;
  double sigma = right;
  for (int it = 0; it < 200; ++it) {
    const double sn = step_norm(sigma);
    const double phi = 1.0 / sn - 1.0 / delta;
    if (std::abs(sn - delta) <= 1e-13 * delta) break;
    if (phi < 0.0) left = sigma; else right = sigma;
    double dsn = 0.0;
    for (Index j = 0; j < k; ++j) {
      const double den = lam(j) + sigma;
      dsn -= a(j) * a(j) / (den * den * den);
    }
    dsn /= sn;  // d||s||/dsigma
    const double dphi = -dsn / (sn * sn);
    double next = sigma - phi / dphi;
    if (!(next > left && next < right) || !std::isfinite(next)) next = 0.5 * (left + right);
    if (right - left <= 1e-16 * std::max(1.0, right)) break;
    sigma = next;
  }
  Vector s = step_at(sigma);
  const double sn = s.norm();
  if (sn > delta) s *= delta / sn;
  return s;
}

}  // namespace

TrustRegionConfig TrustRegionConfig::defaults(double delta0) {
  TrustRegionConfig cfg;
  cfg.delta0 = delta0;
  cfg.delta_max = 1000.0 * delta0;
  return cfg;
}

void TrustRegionConfig::validate() const {
  if (!(nu1 > 0.0 && nu1 < 1.0 && nu2 > 1.0)) throw std::invalid_argument("TrustRegionConfig: need 0 < nu1 < 1 < nu2");
  if (!(delta0 > 0.0 && delta0 < delta_max)) throw std::invalid_argument("TrustRegionConfig: need 0 < delta0 < delta_max");
  if (!(eta1 > 0.0 && eta2 > 0.0)) throw std::invalid_argument("TrustRegionConfig: eta1, eta2 must be positive");
}

StepResult solve_trsp(const Eigen::Ref<const Vector>& g_in, const Eigen::Ref<const Matrix>& h_in, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("solve_trsp: delta must be positive");
  const Vector g = g_in;
  const Matrix h = linalg::symmetrized(h_in);
  StepResult out;
  if (g.size() == 0) {
    out.d = Vector();
    return out;
  }
  const CgOutcome cg = steihaug(g, h, delta);
  out.d = cg.d;
  double best = model_change(g, h, out.d);

  const bool positive_definite = Eigen::LLT<Matrix>(h).info() == Eigen::Success;
  if (cg.boundary || !positive_definite) {
    const Vector d = exact_boundary_step(g, h, delta);
    const double val = model_change(g, h, d);
    if (val < best) {
      best = val;
      out.d = d;
    }
  }
  out.predicted_reduction = std::max(0.0, -best);
  if (out.predicted_reduction == 0.0) out.d.setZero();
  out.boundary_hit = out.d.norm() >= delta * (1.0 - 1e-10);
  return out;
}

double acceptance_ratio(double f_old, double f_new, double predicted_reduction) {
  if (!(predicted_reduction > 0.0) || !std::isfinite(f_new)) return -std::numeric_limits<double>::infinity();
  return (f_old - f_new) / predicted_reduction;
}

double update_radius(double rho, double delta, double g_norm, const TrustRegionConfig& cfg, double reference) {
  const double ref = reference < 0.0 ? delta : reference;
  if (rho >= cfg.eta1 && g_norm >= cfg.eta2 * ref) return std::min(cfg.nu2 * delta, cfg.delta_max);
  return cfg.nu1 * delta;
}

}  // namespace sketchdfo
