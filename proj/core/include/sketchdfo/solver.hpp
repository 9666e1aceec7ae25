#pragma once

// Basis-sketching trust-region method for nonlinear least squares and the
// deterministic minimal-norm-Hessian baseline that shares its loop.

#include "sketchdfo/geometry.hpp"
#include "sketchdfo/poly_model.hpp"
#include "sketchdfo/problems.hpp"
#include "sketchdfo/sketch.hpp"
#include "sketchdfo/trust_region.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sketchdfo {

enum class SolverMode { Sketching, DeterministicBaseline };

/// Plain: g = sum f_i g_i, H = sum (g_i g_i^T + H_i).
/// GaussNewton: g = 2 sum f_i g_i, H = 2 sum (g_i g_i^T + f_i H_i).
enum class CombineRule { Plain, GaussNewton };

/// Growth requires |g_tilde| >= eta2 * Delta (Radius) or eta2 * |delta_k| (DeltaNorm).
enum class GrowthTest { Radius, DeltaNorm };

enum class GradientInit { SimplexGradient, Zero };

struct SolverConfig {
  TrustRegionConfig tr;
  GeometryConfig geo;
  double C = 0.0;
  Index b0 = 1;
  SolverMode mode = SolverMode::Sketching;
  EstimatorMode estimator = EstimatorMode::Practical;
  CombineRule combine = CombineRule::Plain;
  GrowthTest growth = GrowthTest::Radius;
  GradientInit init = GradientInit::SimplexGradient;
  std::uint64_t seed = 0;
  long max_evals = 0;
  double delta_min = 0.0;
  double g_min = 1e-8;
  /// Cap on |Y|; 0 means min(2n + 1, (n+1)(n+2)/2).
  Index max_interpolation_points = 0;
  /// Stop as soon as an evaluated point reaches this value.
  std::optional<double> f_target;

  /// Defaults for dimension n: C = 0.01 sqrt(n), b0 = 1, eta1 = 0.05,
  /// eta2 = 1e-3, nu1 = 0.5, nu2 = 2, Delta_max = 1000 delta0,
  /// c = sqrt(n), theta1 = 1e-5, theta2 = 1e-3, Delta_min = 1e-7 delta0.
  static SolverConfig defaults(Index n, double delta0, long max_evals);
  /// 0.1 max(1, |x0|_inf).
  static double default_delta0(const Vector& x0);
  void validate(Index n) const;
};

/// Per-component models about a common center. Column i of G is g_i and
/// column i of B holds the packed coefficients of H_i.
struct ComponentModelSet {
  Vector f;
  Matrix G;  // n x m
  Matrix B;  // n(n+1)/2 x m

  Index dim() const { return G.rows(); }
  Index count() const { return G.cols(); }
  Matrix hessian(Index i) const { return unpack_hessian(B.col(i), dim()); }
};

/// Combined least-squares model about `center` with c = sum f_i^2.
QuadraticModel combine_least_squares_model(const ComponentModelSet& models, const Vector& center,
                                           CombineRule rule = CombineRule::Plain);

struct IterationRecord {
  long k = 0;
  Vector x;            // iterate after this iteration
  double f = 0.0;      // f(x)
  double delta = 0.0;  // radius used in this iteration
  double rho = 0.0;
  Index p_k = 0;
  Index J_size = 0;
  long evals = 0;      // cumulative
  bool accepted = false;
  // diagnostics
  Index subspace_rank = 0;
  Index interpolation_size = 0;
  double g_tilde_norm = 0.0;
  bool poisedness_fallback = false;
};

enum class RunStatus { Running, BudgetExhausted, SmallRadius, SmallGradient, TargetReached, InitialPointFailed };

std::string to_string(RunStatus s);

struct RunHistory {
  Index n = 0;
  Index m = 0;
  std::vector<IterationRecord> records;
  /// f at every evaluation in the order made.
  std::vector<double> eval_trace;
  Vector x_final;
  double f_final = 0.0;
  double f0 = 0.0;
  long evals = 0;
  RunStatus status = RunStatus::Running;

  /// Columns k,f,delta,rho,p_k,J_size,evals,accepted.
  void write_csv(std::ostream& os) const;
  std::string to_csv() const;
  /// Columns eval,f.
  void write_eval_trace(std::ostream& os) const;
  std::string to_json() const;
};

struct InitResult {
  ComponentModelSet averages;
  Index center_index = 0;
};

/// Evaluates x0 and x0 + delta0 e_i, appending to the bank, and forms the
/// forward-difference simplex gradient of every component. H_bar = 0.
/// Throws BudgetExhausted when the oracle's budget is below n + 1.
InitResult init_average_gradient(CountingOracle& oracle, PointBank& bank, const Vector& x0, double delta0,
                                 GradientInit init = GradientInit::SimplexGradient);

RunHistory run_basis_sketching(const ProblemSpec& problem, const Vector& x0, const SolverConfig& cfg,
                               PointBank* bank_out = nullptr);

/// Same loop with p_k = n and pi = 1 forced: full-space minimal-change
/// Hessian models and a full-space trust-region step.
RunHistory run_deterministic_baseline(const ProblemSpec& problem, const Vector& x0, const SolverConfig& cfg,
                                      PointBank* bank_out = nullptr);

/// Dispatches on cfg.mode.
RunHistory run_solver(const ProblemSpec& problem, const Vector& x0, const SolverConfig& cfg,
                      PointBank* bank_out = nullptr);

std::string format_double(double v);

}  // namespace sketchdfo
