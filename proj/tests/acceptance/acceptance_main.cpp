#include "sketchdfo/bench.hpp"
#include "sketchdfo/geometry.hpp"
#include "sketchdfo/poly_model.hpp"
#include "sketchdfo/sketch.hpp"
#include "sketchdfo/solver.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace sketchdfo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok && failures_++ < 5) notes_ << (notes_.tellp() > 0 ? "; " : "") << what;
  }
  void note(const std::string& s) { info_ << (info_.tellp() > 0 ? ", " : "") << s; }
  Outcome done() const {
    Outcome o;
    o.pass = failures_ == 0;
    o.detail = info_.str();
    if (failures_ > 0) o.detail += (o.detail.empty() ? "" : " | ") + std::to_string(failures_) + " failures: " + notes_.str();
    return o;
  }

 private:
  int failures_ = 0;
  std::ostringstream notes_;
  std::ostringstream info_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<Index> subset_of(std::uint64_t mask, Index n) {
  std::vector<Index> J;
  for (Index i = 0; i < n; ++i)
    if (mask & (std::uint64_t{1} << i)) J.push_back(i);
  return J;
}

double subset_probability(std::uint64_t mask, const Vector& pi) {
  double p = 1.0;
  for (Index i = 0; i < pi.size(); ++i) p *= (mask & (std::uint64_t{1} << i)) ? pi(i) : 1.0 - pi(i);
  return p;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

Matrix symmetric(Index n, CounterRng& rng) {
  const Matrix a = oracle::random_matrix(n, n, rng);
  return a + a.transpose();
}

double smallest_singular_value(const Matrix& a) {
  return std::sqrt(std::max(0.0, oracle::jacobi_eigenvalues(a.transpose() * a)(0)));
}

// Explicit [M_S, M_Sperp, M_Q] for a point set.
Matrix full_vandermonde(const Matrix& s, const Matrix& s_perp, const Matrix& pts) {
  const Matrix ms = assemble_vandermonde(BasisSpec::sketched(s), pts);
  const Matrix mp = s_perp.rows() > 0 ? assemble_vandermonde(BasisSpec::complement(s_perp), pts) : Matrix(pts.rows(), 0);
  const Matrix mq = assemble_vandermonde(BasisSpec::quadratic_only(), pts);
  Matrix a(pts.rows(), ms.cols() + mp.cols() + mq.cols());
  a << ms, mp, mq;
  return a;
}

// 1. Exact estimator laws by enumeration.
Outcome estimator_laws() {
  Check ck;
  const auto t0 = std::chrono::steady_clock::now();
  CounterRng rng(101);
  double worst_mean = 0.0, worst_var = 0.0;
  for (Index n = 2; n <= 8; ++n) {
    const std::size_t subsets = std::size_t{1} << n;
    for (int t = 0; t < 50; ++t) {
      const Matrix q = oracle::random_orthogonal(n, rng);
      Vector pi(n);
      for (Index i = 0; i < n; ++i) pi(i) = 0.05 + 0.95 * rng.uniform();
      const Vector gb = oracle::random_vector(n, rng);
      std::vector<Vector> per(subsets);
      for (auto& g : per) g = oracle::random_vector(n, rng);
      auto index_of = [](const std::vector<Index>& J) {
        std::uint64_t m = 0;
        for (Index j : J) m |= std::uint64_t{1} << j;
        return m;
      };
      const EstimatorLaw law =
          enumerate_estimator_law(q, pi, gb, [&](const std::vector<Index>& J) { return per[index_of(J)]; });
      Vector direct = Vector::Zero(n);
      for (std::uint64_t mask = 0; mask < subsets; ++mask) {
        Matrix pj = Matrix::Zero(n, n);
        for (Index j : subset_of(mask, n)) pj += q.col(j) * q.col(j).transpose() / pi(j);
        direct += subset_probability(mask, pi) * pj * per[mask];
      }
      const double em = (law.mean - direct).cwiseAbs().maxCoeff();
      worst_mean = std::max(worst_mean, em);
      ck.require(em <= 1e-10, "mean n=" + std::to_string(n) + " err " + fmt(em));

      const Vector gh = oracle::random_vector(n, rng);
      const EstimatorLaw c = enumerate_estimator_law(q, pi, gb, [&](const std::vector<Index>&) { return gh; });
      // Weighted norm sum_i (1/pi_i - 1) (q_i . (g_bar - g_hat))^2, computed here directly.
      const Vector v = q.transpose() * (gb - gh);
      double weighted = 0.0;
      for (Index i = 0; i < n; ++i) weighted += (1.0 / pi(i) - 1.0) * v(i) * v(i);
      const double ev = std::abs(c.variance - weighted);
      worst_var = std::max(worst_var, ev);
      ck.require(ev <= 1e-10, "variance n=" + std::to_string(n) + " err " + fmt(ev));
      ck.require((c.mean - gh).cwiseAbs().maxCoeff() <= 1e-10, "constant-gradient mean is biased");
    }
  }
  const double secs = seconds_since(t0);
  ck.require(secs < 5.0, "runtime " + fmt(secs) + " s");
  ck.note("350 instances");
  ck.note("max mean err " + fmt(worst_mean));
  ck.note("max variance err " + fmt(worst_var));
  ck.note(fmt(secs) + " s");
  return ck.done();
}

// 2. The n = 2 worked instance.
Outcome worked_enumeration() {
  Check ck;
  Vector pi(2);
  pi << 0.5, 0.5;
  const Vector gh = Vector::Ones(2);
  const EstimatorLaw law =
      enumerate_estimator_law(Matrix::Identity(2, 2), pi, Vector::Zero(2), [&](const std::vector<Index>&) { return gh; });
  ck.require(std::abs(law.mean(0) - 1.0) <= 1e-12 && std::abs(law.mean(1) - 1.0) <= 1e-12, "mean");
  ck.require(std::abs(law.variance - 2.0) <= 1e-12, "variance " + fmt(law.variance));
  ck.note("mean (" + fmt(law.mean(0)) + ", " + fmt(law.mean(1)) + ")");
  ck.note("variance " + fmt(law.variance));
  return ck.done();
}

// 3. Optimal probabilities against a bisection water-filling oracle.
Outcome optimal_probabilities_check() {
  Check ck;
  CounterRng rng(103);
  double worst_pi = 0.0, worst_obj = 0.0, worst_sum = 0.0;
  for (int t = 0; t < 200; ++t) {
    const Index n = 2 + t % 9;
    const Index p = 1 + static_cast<Index>(rng.uniform() * static_cast<double>(n));
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = std::exp(2.0 * rng.normal());
    const Matrix q = oracle::random_orthogonal(n, rng);
    const ProbabilityVector pv = optimal_probabilities(q * v, q, p);
    const Vector ref = oracle::waterfill_probabilities(v, p);
    const double epi = (pv.raw - ref).cwiseAbs().maxCoeff();
    const double ref_obj = oracle::variance_objective(v, ref);
    const double eobj = std::abs(oracle::variance_objective(v, pv.raw) - ref_obj) / ref_obj;
    const double esum = std::abs(pv.raw.sum() - static_cast<double>(p));
    worst_pi = std::max(worst_pi, epi);
    worst_obj = std::max(worst_obj, eobj);
    worst_sum = std::max(worst_sum, esum);
    ck.require(epi <= 1e-6, "pi err " + fmt(epi));
    ck.require(eobj <= 1e-6, "objective err " + fmt(eobj));
    ck.require(esum <= 1e-8, "sum err " + fmt(esum));
  }
  Vector v(2);
  v << 1, 3;
  const ProbabilityVector ex = optimal_probabilities(v, Matrix::Identity(2, 2), 1);
  ck.require(ex.pi(0) == 0.25 && ex.pi(1) == 0.75, "(1,3) example gave (" + fmt(ex.pi(0)) + ", " + fmt(ex.pi(1)) + ")");
  ck.note("200 instances");
  ck.note("max pi err " + fmt(worst_pi));
  ck.note("max rel objective err " + fmt(worst_obj));
  ck.note("max sum err " + fmt(worst_sum));
  ck.note("(1,3) -> (" + fmt(ex.pi(0)) + ", " + fmt(ex.pi(1)) + ")");
  return ck.done();
}

// 4. Sketch-and-project closed forms against KKT projection oracles.
Outcome closed_forms() {
  Check ck;
  CounterRng rng(104);
  double worst_g = 0.0, worst_h = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Index n = 3 + t % 5, p = 1 + t % n;
    const Matrix s = oracle::random_orthogonal(n, rng).leftCols(p).transpose();
    const Vector gb = oracle::random_vector(n, rng), gh = oracle::random_vector(n, rng);
    const Vector ref = oracle::constrained_least_change(s, s * gh, gb);
    const double e = (update_average_gradient(gb, s, gh) - ref).cwiseAbs().maxCoeff();
    worst_g = std::max(worst_g, e);
    ck.require(e <= 1e-12, "gradient err " + fmt(e));
  }
  for (int t = 0; t < 100; ++t) {
    const Index n = 2 + t % 4, p = 1 + t % n;
    const Matrix s = oracle::random_orthogonal(n, rng).leftCols(p).transpose();
    const Matrix hb = symmetric(n, rng), sub = symmetric(p, rng);
    const Matrix got = update_average_hessian(hb, s, sub);
    // vec(S H S^T) = (S kron S) vec(H).
    const Vector hvec = Eigen::Map<const Vector>(hb.data(), n * n);
    const Vector svec = Eigen::Map<const Vector>(sub.data(), p * p);
    const Vector ref = oracle::constrained_least_change(kron(s, s), svec, hvec);
    const double e = (got - Eigen::Map<const Matrix>(ref.data(), n, n)).cwiseAbs().maxCoeff();
    worst_h = std::max(worst_h, e);
    ck.require(e <= 1e-12, "hessian err " + fmt(e));
  }
  for (int t = 0; t < 10; ++t) {
    const Index n = 2 + t % 5;
    const Matrix eye = Matrix::Identity(n, n);
    const Vector gb = oracle::random_vector(n, rng), gh = oracle::random_vector(n, rng);
    const Matrix hb = symmetric(n, rng), hh = symmetric(n, rng);
    ck.require(update_average_gradient(gb, eye, gh) == gh, "S = I gradient is not exact");
    ck.require(update_average_hessian(hb, eye, hh) == hh, "S = I hessian is not exact");
  }
  ck.note("max gradient err " + fmt(worst_g));
  ck.note("max hessian err " + fmt(worst_h));
  return ck.done();
}

// 5. Interpolation subproblems and unique solvability of geometry outputs.
Outcome interpolation() {
  Check ck;
  CounterRng rng(105);
  double worst_res = 0.0, worst_mnh = 0.0;
  for (int t = 0; t < 60; ++t) {
    const Index n = 3 + t % 5, p = t % (n + 1);
    const Matrix qf = oracle::random_orthogonal(n, rng);
    const Matrix s = qf.leftCols(p).transpose(), sp = qf.rightCols(n - p).transpose();
    const Matrix pts = oracle::random_matrix(p + 1 + t % (n + 2), n, rng);
    const Vector rhs = oracle::random_vector(pts.rows(), rng);
    std::optional<SketchPrior> prior;
    if (t % 2) prior = SketchPrior{oracle::random_vector(quadratic_count(n), rng), oracle::random_vector(n - p, rng)};
    const SketchSolveResult r = solve_basis_sketch(s, sp, pts, rhs, prior);
    Vector z(r.alpha.size() + r.gamma.size() + r.beta.size());
    z << r.alpha, r.gamma, r.beta;
    const double res = (full_vandermonde(s, sp, pts) * z - rhs).cwiseAbs().maxCoeff() / std::max(1.0, rhs.cwiseAbs().maxCoeff());
    worst_res = std::max(worst_res, res);
    ck.require(res <= 1e-8, "sketch residual " + fmt(res));
    ck.require(interpolation_residual(s, sp, pts, rhs, r) <= 1e-8 * std::max(1.0, rhs.cwiseAbs().maxCoeff()),
               "reported residual");
  }
  for (int t = 0; t < 40; ++t) {
    const Index n = 2 + t % 6;
    const Matrix pts = oracle::random_matrix(n + 1 + t % (n + 2), n, rng);
    const Vector rhs = oracle::random_vector(pts.rows(), rng);
    const SketchSolveResult r = solve_basis_sketch(Matrix::Identity(n, n), Matrix(0, n), pts, rhs);
    const MnhResult m = solve_mnh(pts, rhs);
    const double e = std::max((r.alpha - m.alpha).cwiseAbs().maxCoeff(), (r.beta - m.beta).cwiseAbs().maxCoeff());
    worst_mnh = std::max(worst_mnh, e);
    ck.require(e <= 1e-9, "S = I vs mnh err " + fmt(e));
    Vector z(m.alpha.size() + m.beta.size());
    z << m.alpha, m.beta;
    const Matrix a = full_vandermonde(Matrix::Identity(n, n), Matrix(0, n), pts);
    const double res = (a * z - rhs).cwiseAbs().maxCoeff() / std::max(1.0, rhs.cwiseAbs().maxCoeff());
    worst_res = std::max(worst_res, res);
    ck.require(res <= 1e-8, "mnh residual " + fmt(res));
  }

  int solvable = 0;
  for (int t = 0; t < 50; ++t) {
    const Index n = 2 + t % 5;
    PointBank bank(n);
    const Vector x = oracle::random_vector(n, rng);
    bank.append(x, x);
    const double delta = 0.5;
    const GeometryConfig cfg = GeometryConfig::defaults(n);
    const int extra = 2 + (t % 7) * 3;
    for (int i = 0; i < extra; ++i) {
      const Vector y = x + delta * cfg.c * 1.2 * oracle::random_vector(n, rng) / std::sqrt(static_cast<double>(n));
      bank.append(y, y);
    }
    const SubspaceSelection sel = identify_initial_subspace(bank, x, delta, cfg);
    std::vector<Index> z{0};
    z.insert(z.end(), sel.contributing_points.begin(), sel.contributing_points.end());
    const Index cap = std::min<Index>(2 * n + 1, (n + 1) * (n + 2) / 2);
    const InterpolationSet yset = determine_interpolation_set(sel.S, sel.S_perp, z, bank, x, delta, cfg, cap);
    const Matrix u = yset.displacements(bank, x, delta);
    const SolvabilityReport rep = verify_unique_solvability(sel.S, sel.S_perp, u);
    // Independent test: M_S has full column rank and M_perp^T N has full column rank.
    const Matrix ms = assemble_vandermonde(BasisSpec::sketched(sel.S), u);
    const bool rank_ok = ms.fullPivLu().rank() == ms.cols();
    bool reduced_ok = true;
    if (rank_ok && u.rows() > ms.cols()) {
      Matrix kernel = ms.transpose().fullPivLu().kernel();
      for (Index j = 0; j < kernel.cols(); ++j) {
        for (int pass = 0; pass < 2; ++pass)
          for (Index k = 0; k < j; ++k) kernel.col(j) -= kernel.col(k).dot(kernel.col(j)) * kernel.col(k);
        kernel.col(j).normalize();
      }
      const Matrix mp =
          sel.S_perp.rows() > 0 ? assemble_vandermonde(BasisSpec::complement(sel.S_perp), u) : Matrix(u.rows(), 0);
      const Matrix mq = assemble_vandermonde(BasisSpec::quadratic_only(), u);
      Matrix mperp(u.rows(), mp.cols() + mq.cols());
      mperp << mp, mq;
      reduced_ok = smallest_singular_value(mperp.transpose() * kernel) > 1e-6;
    }
    ck.require(rep.solvable, "library solvability check failed");
    ck.require(rank_ok && reduced_ok, "independent solvability check failed");
    if (rep.solvable && rank_ok && reduced_ok) ++solvable;
  }
  ck.note("max rel residual " + fmt(worst_res));
  ck.note("max S = I vs mnh err " + fmt(worst_mnh));
  ck.note(std::to_string(solvable) + "/50 geometry outputs uniquely solvable");
  return ck.done();
}

// 6. S-full-linearity audit on quadratics with a controlled poisedness constant.
Outcome full_linearity() {
  Check ck;
  CounterRng rng(106);
  const Index n = 6, p = 3;
  const double c = 1.0;
  const Matrix h = symmetric(n, rng);
  const Vector ev = oracle::jacobi_eigenvalues(h);
  const double L_g = std::max(std::abs(ev(0)), std::abs(ev(n - 1)));
  const Vector g = oracle::random_vector(n, rng);
  const Vector x = oracle::random_vector(n, rng);
  const SmoothFunction f{[&](const Vector& y) { return g.dot(y) + 0.5 * y.dot(h * y); },
                         [&](const Vector& y) { return Vector(g + h * y); }};
  const Matrix qf = oracle::random_orthogonal(n, rng);
  const Matrix s = qf.leftCols(p).transpose(), sp = qf.rightCols(n - p).transpose();
  // Subspace displacements a_i with |a_i| <= 1; Lambda = |A^{-1}|.
  Matrix a = oracle::random_matrix(p, p, rng) + 2.0 * Matrix::Identity(p, p);
  a /= a.rowwise().norm().maxCoeff();
  const double big_lambda = 1.0 / smallest_singular_value(a);

  int violations = 0, samples = 0;
  double worst_v = 0.0, worst_g = 0.0;
  for (double delta : {1.0, 0.1, 0.01}) {
    for (int variant = 0; variant < 2; ++variant) {
      // variant 0: p + 1 points (linear on S); variant 1: n extra points in the ball.
      const Index extra = variant == 0 ? 0 : n;
      Matrix pts = Matrix::Zero(p + 1 + extra, n);
      for (Index i = 0; i < p; ++i) pts.row(i + 1) = c * delta * (s.transpose() * a.row(i).transpose()).transpose();
      for (Index i = 0; i < extra; ++i) {
        Vector d = oracle::random_vector(n, rng);
        d *= c * delta * rng.uniform() / d.norm();
        pts.row(p + 1 + i) = d.transpose();
      }
      Vector rhs(pts.rows());
      for (Index i = 0; i < pts.rows(); ++i) rhs(i) = f.value(x + pts.row(i).transpose());
      // Scaled displacements keep the subproblem well conditioned at small radii.
      const SketchSolveResult r = solve_basis_sketch(s, sp, pts / delta, rhs);
      const Vector grad = (s.transpose() * r.alpha.tail(p) + sp.transpose() * r.gamma) / delta;
      const QuadraticModel m =
          QuadraticModel::make(x, r.alpha(0), grad, unpack_hessian(r.beta, n) / (delta * delta));
      CounterRng srng(1000 + static_cast<std::uint64_t>(variant));
      const auto diag = check_s_full_linearity(m, f, s, delta, c, big_lambda, L_g, 1000, srng);
      violations += diag.value_violations + diag.gradient_violations;
      samples += diag.samples;
      worst_v = std::max(worst_v, diag.worst_value_ratio / diag.kappa_ef);
      worst_g = std::max(worst_g, diag.worst_gradient_ratio / diag.kappa_eg);
      ck.require(diag.value_violations + diag.gradient_violations == 0,
                 "delta " + fmt(delta) + " variant " + std::to_string(variant) + " has violations");
      ck.require(diag.samples >= 1000, "too few samples");
    }
  }
  ck.note(std::to_string(samples) + " samples over 3 radii");
  ck.note(std::to_string(violations) + " violations");
  ck.note("Lambda " + fmt(big_lambda));
  ck.note("max value err/kappa_ef " + fmt(worst_v));
  ck.note("max gradient err/kappa_eg " + fmt(worst_g));
  return ck.done();
}

// 7. C = 0 collapses the sketching solver to the deterministic baseline.
Outcome zero_variance() {
  Check ck;
  int identical = 0;
  const std::vector<std::pair<std::string, Index>> problems{
      {"sphere-shifted", 8}, {"extended-rosenbrock", 8}, {"broyden-tridiagonal", 8},
      {"linear-full-rank", 8}, {"extended-powell-singular", 8}};
  for (const auto& [name, n] : problems) {
    const ProblemSpec p = get_problem(name, n);
    SolverConfig cfg = SolverConfig::defaults(n, SolverConfig::default_delta0(p.x0), 50 * (n + 1));
    cfg.seed = 7;
    cfg.C = 0.0;
    const std::string s = run_basis_sketching(p, p.x0, cfg).to_csv();
    const std::string b = run_deterministic_baseline(p, p.x0, cfg).to_csv();
    ck.require(s == b, name + " histories differ");
    if (s == b) ++identical;
  }
  ck.note(std::to_string(identical) + "/5 identical history CSVs");
  return ck.done();
}

bench::CampaignResult campaign(const std::string& text, const fs::path& out) {
  std::istringstream is(text + "output = " + out.string() + "\n");
  const bench::CampaignConfig cfg = bench::CampaignConfig::parse(is);
  fs::remove_all(out);
  return bench::run_campaign(cfg);
}

// 8. Convergence regression on extended-rosenbrock n = 20.
Outcome convergence_regression(const fs::path& root) {
  Check ck;
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = campaign(
      "solvers = sketch, baseline\nproblems = extended-rosenbrock:20\nseeds = 0..29\nbudget = 200\n"
      "taus = 1e-5\nstop_tau = 1e-5\n",
      root / "rosenbrock20");
  const double secs = seconds_since(t0);
  int sketch_ok = 0, sketch_total = 0, base_ok = 0, base_total = 0;
  for (const auto& c : res.cells) {
    ck.require(c.error.empty(), "cell error: " + c.error);
    const bool ok = std::isfinite(c.n_values.at(0)) && c.n_values.at(0) <= 200.0;
    if (c.solver == "sketch") {
      ++sketch_total;
      sketch_ok += ok;
    } else {
      ++base_total;
      base_ok += ok;
    }
  }
  ck.require(sketch_total == 30 && 5 * sketch_ok >= 4 * sketch_total, "sketch solved " + std::to_string(sketch_ok));
  ck.require(base_total == 1 && base_ok == base_total, "baseline did not converge");
  ck.require(secs < 120.0, "runtime " + fmt(secs) + " s");
  ck.note("sketch " + std::to_string(sketch_ok) + "/" + std::to_string(sketch_total));
  ck.note("baseline " + std::to_string(base_ok) + "/" + std::to_string(base_total));
  ck.note(fmt(secs) + " s");
  return ck.done();
}

// 9. Median evaluations to tau = 1e-3 at n = 100.
Outcome large_scale_trend(const fs::path& root) {
  Check ck;
  const std::vector<std::string> problems{"extended-rosenbrock:100", "broyden-tridiagonal:100",
                                          "extended-powell-singular:100", "linear-full-rank:100",
                                          "sphere-shifted:100"};
  std::string list;
  for (const auto& p : problems) list += (list.empty() ? "" : ", ") + p;
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = campaign("solvers = sketch, baseline\nproblems = " + list +
                                "\nseeds = 0..29\nbudget = 200\ntaus = 1e-3\nstop_tau = 1e-3\n",
                            root / "n100");
  const double secs = seconds_since(t0);
  std::vector<std::string> keys;
  for (const auto& p : problems) keys.push_back(p);
  const Matrix table = bench::aggregate_table(res.cells, {"sketch", "baseline"}, keys, 0, bench::Aggregation::Median);
  int wins = 0;
  std::string per;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const double s = table(static_cast<Index>(i), 0), b = table(static_cast<Index>(i), 1);
    if (s <= b) ++wins;
    per += (per.empty() ? "" : "; ") + keys[i].substr(0, keys[i].find(':')) + " " + fmt(s) + " vs " + fmt(b);
  }
  for (const auto& c : res.cells) ck.require(c.error.empty(), "cell error: " + c.error);
  ck.require(2 * wins >= static_cast<int>(keys.size()),
             "sketch <= baseline on " + std::to_string(wins) + "/" + std::to_string(keys.size()));
  ck.note("median N (sketch vs baseline): " + per);
  ck.note(fmt(secs) + " s");
  return ck.done();
}

std::vector<std::vector<double>> read_csv_numbers(const fs::path& p, std::vector<std::string>& header) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  header.clear();
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) header.push_back(cell);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

// 10. Profile machinery.
Outcome profiles(const fs::path& root) {
  Check ck;
  Matrix nv(2, 2);
  nv << 2, 4, 8, 4;
  const bench::ProfileTable pt = bench::performance_profile({"A", "B"}, {"p1", "p2"}, nv, {1.0, 2.0});
  ck.require(pt.values(0, 0) == 0.5 && pt.values(0, 1) == 0.5, "alpha = 1 row");
  ck.require(pt.values(1, 0) == 1.0 && pt.values(1, 1) == 1.0, "alpha = 2 row");
  ck.note("hand table (" + fmt(pt.values(0, 0)) + ", " + fmt(pt.values(0, 1)) + ") at 1, (" + fmt(pt.values(1, 0)) +
          ", " + fmt(pt.values(1, 1)) + ") at 2");

  // A mixed campaign in addition to those of the regression and trend checks.
  campaign(
      "solvers = sketch, sketch-full, baseline\nproblems = extended-rosenbrock:10, broyden-tridiagonal:10, "
      "extended-powell-singular:8, linear-full-rank:10, trigonometric:10, sphere-shifted:10\nseeds = 0..9\n"
      "budget = 100\ntaus = 1e-1, 1e-3, 1e-5\n",
      root / "mixed");

  // Every profile CSV written by the campaigns in this run.
  int files = 0, pairs = 0, worst_above = 0;
  std::string where;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    const fs::path path = entry.path();
    if (path.parent_path().filename() != "profiles" || path.extension() != ".csv") continue;
    const std::string stem = path.stem().string();
    if (stem.size() < 7 || stem.substr(stem.size() - 7) != "_median") continue;
    const fs::path worst = path.parent_path() / (stem.substr(0, stem.size() - 7) + "_worst.csv");
    std::vector<std::string> hm, hw;
    const auto med = read_csv_numbers(path, hm);
    ++files;
    for (std::size_t r = 0; r < med.size(); ++r) {
      for (std::size_t c = 1; c < med[r].size(); ++c) {
        ck.require(med[r][c] >= 0.0 && med[r][c] <= 1.0, "profile value out of range in " + path.string());
        if (r > 0) ck.require(med[r][c] >= med[r - 1][c], "non-monotone profile " + path.string());
      }
    }
    if (!fs::exists(worst)) {
      ck.require(false, "missing " + worst.string());
      continue;
    }
    const auto wst = read_csv_numbers(worst, hw);
    ++files;
    ++pairs;
    ck.require(hm == hw && med.size() == wst.size(), "median/worst layouts differ");
    for (std::size_t r = 0; r < wst.size() && r < med.size(); ++r) {
      for (std::size_t c = 1; c < wst[r].size(); ++c) {
        ck.require(wst[r][c] >= 0.0 && wst[r][c] <= 1.0, "profile value out of range in " + worst.string());
        if (r > 0) ck.require(wst[r][c] >= wst[r - 1][c], "non-monotone profile " + worst.string());
        if (wst[r][c] > med[r][c] + 1e-12) {
          ++worst_above;
          if (where.empty())
            where = path.parent_path().parent_path().filename().string() + " " + hm[c] + " alpha " + fmt(med[r][0]);
        }
      }
    }
  }
  ck.require(pairs > 0, "no campaign profiles found");
  ck.require(worst_above == 0, "worst > median at " + std::to_string(worst_above) + " points (first: " + where + ")");
  ck.note(std::to_string(files) + " profile files checked");
  return ck.done();
}

// 11. Determinism of histories and campaign outputs.
Outcome determinism(const fs::path& root) {
  Check ck;
  int runs = 0;
  for (const auto& name : {"extended-rosenbrock", "trigonometric", "broyden-tridiagonal"}) {
    const ProblemSpec p = get_problem(name, 10);
    for (const auto& preset : bench::solver_presets()) {
      const SolverConfig cfg = bench::solver_preset(preset, p, 60 * (p.n + 1), 5);
      const std::string a = run_solver(p, p.x0, cfg).to_csv();
      const std::string b = run_solver(p, p.x0, cfg).to_csv();
      ck.require(a == b, std::string(name) + "/" + preset + " differs");
      ++runs;
    }
  }
  const std::string text =
      "solvers = sketch, sketch-full, baseline\nproblems = extended-rosenbrock:10, trigonometric:8\nseeds = 0..4\n"
      "budget = 50\ntaus = 1e-3, 1e-5\n";
  campaign(text, root / "repeat_a");
  campaign(text, root / "repeat_b");
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(root / "repeat_a" / "runs")) {
    const fs::path other = root / "repeat_b" / "runs" / entry.path().filename();
    ck.require(fs::exists(other) && read_file(entry.path()) == read_file(other),
               entry.path().filename().string() + " differs");
    ++compared;
  }
  ck.require(read_file(root / "repeat_a" / "summary.json") == read_file(root / "repeat_b" / "summary.json"),
             "summary.json differs");
  ck.note(std::to_string(runs) + " repeated runs");
  ck.note(std::to_string(compared) + " campaign files compared");
  return ck.done();
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::current_path() / "acceptance_results";
  fs::remove_all(root);
  fs::create_directories(root);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"estimator laws", estimator_laws},
      {"worked enumeration", worked_enumeration},
      {"optimal probabilities", optimal_probabilities_check},
      {"sketch-and-project closed forms", closed_forms},
      {"interpolation subproblems", interpolation},
      {"S-full-linearity audit", full_linearity},
      {"zero-variance collapse", zero_variance},
      {"convergence regression", [&] { return convergence_regression(root); }},
      {"large-scale trend", [&] { return large_scale_trend(root); }},
      {"profile machinery", [&] { return profiles(root); }},
      {"determinism", [&] { return determinism(root); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
