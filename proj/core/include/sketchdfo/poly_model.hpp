#pragma once

// Polynomial bases, Vandermonde assembly, and the two underdetermined
// quadratic interpolation problems:
//
//   minimal-norm Hessian   min 1/2|beta - beta0|^2
//                          s.t. M(Phi_L, Y) alpha + M(Phi_Q \ Phi_L, Y) beta = f(Y)
//
//   basis sketch           min 1/2|beta - beta0|^2 + 1/2|gamma - gamma0|^2
//                          s.t. M(Phi_S, Y) alpha + M(Phi_Sperp, Y) gamma
//                               + M(Phi_Q \ Phi_L, Y) beta = f(Y)
//
// Both are solved through the null-space reduction of the KKT saddle system.
// Quadratic coefficients are ordered y_i^2/2 for i = 1..n, then y_i y_j/sqrt(2)
// for i < j in lexicographic order, so beta . phi_Q(y) = 1/2 y^T H y with
// H_ii = beta_ii and H_ij = beta_ij / sqrt(2), and |beta| = |H|_F.

#include "sketchdfo/linalg.hpp"
#include "sketchdfo/rng.hpp"

#include <functional>
#include <optional>
#include <stdexcept>

namespace sketchdfo {

/// Interpolation set violates the unique-solvability conditions.
class PoisednessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BasisKind {
  Linear,         // {1, y_1, ..., y_n}
  Quadratic,      // Linear followed by QuadraticOnly
  Sketched,       // {1, s_1 y, ..., s_p y}
  Complement,     // {sperp_1 y, ..., sperp_{n-p} y}
  QuadraticOnly,  // {y_i^2/2, y_i y_j/sqrt(2)}
};

struct BasisSpec {
  BasisKind kind = BasisKind::Linear;
  /// Orthonormal rows; used by Sketched and Complement only.
  Matrix directions;

  static BasisSpec linear() { return {BasisKind::Linear, {}}; }
  static BasisSpec quadratic() { return {BasisKind::Quadratic, {}}; }
  static BasisSpec quadratic_only() { return {BasisKind::QuadraticOnly, {}}; }
  static BasisSpec sketched(Matrix s) { return {BasisKind::Sketched, std::move(s)}; }
  static BasisSpec complement(Matrix s_perp) { return {BasisKind::Complement, std::move(s_perp)}; }
};

/// n(n+1)/2.
inline Index quadratic_count(Index n) { return n * (n + 1) / 2; }

Index basis_size(const BasisSpec& spec, Index n);
Vector eval_basis(const BasisSpec& spec, const Eigen::Ref<const Vector>& y);

/// Row i is eval_basis(spec, Y.row(i)). Points are the rows of `points`.
Matrix assemble_vandermonde(const BasisSpec& spec, const Eigen::Ref<const Matrix>& points);

/// Hessian <-> quadratic coefficient vector.
Vector pack_hessian(const Eigen::Ref<const Matrix>& h);
Matrix unpack_hessian(const Eigen::Ref<const Vector>& beta, Index n);

/// c + g^T (x - center) + 1/2 (x - center)^T H (x - center).
struct QuadraticModel {
  Vector center;
  double c = 0.0;
  Vector g;
  Matrix H;

  static QuadraticModel make(Vector center, double c, Vector g, const Matrix& h);
  /// Gradient Lipschitz constant, the spectral norm of H.
  double L_mg() const;
};

double model_value(const QuadraticModel& m, const Eigen::Ref<const Vector>& x);
Vector model_gradient(const QuadraticModel& m, const Eigen::Ref<const Vector>& x);

struct ConditioningDiagnostics {
  /// Smallest eigenvalue of N^T M_perp M_perp^T N (+inf when N is empty).
  double reduced_min_eigenvalue = 0.0;
  /// 1 / sigma_min(M(Phi_S, Y)), a bound on |Ytilde^{-1}|-type growth.
  double inverse_bound = 0.0;
};

struct SketchSolveResult {
  Vector alpha;   // rank(S) + 1
  Vector beta;    // n(n+1)/2
  Vector gamma;   // n - rank(S)
  Vector lambda;  // |Y|
  ConditioningDiagnostics kappa_diag;
};

struct SketchPrior {
  Vector beta;
  Vector gamma;
};

/// Factorization of the reduced KKT system for a fixed (S, S_perp, Y).
/// Quadratic Gram products use phi_Q(u) . phi_Q(v) = (u . v)^2 / 4, so the
/// n(n+1)/2-column Vandermonde block is never formed. One factorization
/// serves any number of right-hand sides.
class BasisSketchSystem {
 public:
  /// s: p x n orthonormal rows (p may be 0); s_perp: (n-p) x n; points: |Y| x n.
  /// Throws PoisednessError when M(Phi_S, Y) is rank deficient or the
  /// reduced matrix fails its Cholesky test (pivot^2 <= 1e-12 trace).
  BasisSketchSystem(const Eigen::Ref<const Matrix>& s, const Eigen::Ref<const Matrix>& s_perp,
                    const Eigen::Ref<const Matrix>& points);

  Index num_points() const { return points_.rows(); }
  Index dim() const { return points_.cols(); }
  Index sketch_rank() const { return s_.rows(); }
  Index null_dim() const { return null_.cols(); }

  struct Batch {
    Matrix alpha;   // (rank+1) x m
    Matrix gamma;   // (n-rank) x m
    Matrix lambda;  // |Y| x m
  };

  /// Zero-prior solve for each column of rhs (|Y| x m).
  Batch solve(const Eigen::Ref<const Matrix>& rhs) const;

  /// beta = M(Phi_Q \ Phi_L, Y)^T lambda, column by column.
  Matrix quadratic_coefficients(const Eigen::Ref<const Matrix>& lambda) const;

  /// M_perp M_perp^T restricted to Y.
  const Matrix& gram() const { return gram_; }
  const Matrix& null_basis() const { return null_; }
  ConditioningDiagnostics diagnostics() const;

 private:
  Matrix s_;
  Matrix s_perp_;
  Matrix points_;
  Matrix q1_;       // |Y| x (rank+1)
  Matrix r1_;       // (rank+1) x (rank+1)
  Matrix null_;     // |Y| x (|Y| - rank - 1)
  Matrix gram_;     // |Y| x |Y|
  Matrix reduced_;  // N^T gram N
  Eigen::LLT<Matrix> chol_;
};

/// Basis-sketch interpolation with an optional minimal-change prior; rhs is
/// residualized against the prior and the prior is added back.
SketchSolveResult solve_basis_sketch(const Eigen::Ref<const Matrix>& s,
                                     const Eigen::Ref<const Matrix>& s_perp,
                                     const Eigen::Ref<const Matrix>& points,
                                     const Eigen::Ref<const Vector>& rhs,
                                     const std::optional<SketchPrior>& prior = std::nullopt);

struct MnhResult {
  Vector alpha;  // n + 1
  Vector beta;   // n(n+1)/2
};

/// Minimal-norm (or minimal-change) Hessian interpolation. Assembles the
/// Vandermonde blocks explicitly; meant for moderate n.
MnhResult solve_mnh(const Eigen::Ref<const Matrix>& points, const Eigen::Ref<const Vector>& rhs,
                    const std::optional<Vector>& prior_beta = std::nullopt);

/// Max_i |m(y^i) - rhs_i| for a quadratic in (alpha, beta, gamma) coordinates.
double interpolation_residual(const Eigen::Ref<const Matrix>& s, const Eigen::Ref<const Matrix>& s_perp,
                              const Eigen::Ref<const Matrix>& points,
                              const Eigen::Ref<const Vector>& rhs, const SketchSolveResult& sol);

struct FullLinearityDiagnostics {
  double kappa_ef = 0.0;
  double kappa_eg = 0.0;
  double worst_value_ratio = 0.0;     // max |m - f| / Delta^2
  double worst_gradient_ratio = 0.0;  // max |S grad m - S grad f| / Delta
  int value_violations = 0;
  int gradient_violations = 0;
  int samples = 0;
};

struct SmoothFunction {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

/// Samples d in R^p with |S^T d| <= delta around m.center and compares the
/// observed model errors against
///   kappa_ef = (4 + 5 Lambda sqrt(p)) / 2 (L_g + L_mg) c^2,
///   kappa_eg = 5 Lambda sqrt(p) / 2 (L_g + L_mg) c.
FullLinearityDiagnostics check_s_full_linearity(const QuadraticModel& m, const SmoothFunction& f,
                                                const Eigen::Ref<const Matrix>& s, double delta,
                                                double c, double big_lambda, double L_g,
                                                int samples, CounterRng& rng);

}  // namespace sketchdfo
