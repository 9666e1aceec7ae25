#include "sketchdfo/problems.hpp"

#include <cmath>

namespace sketchdfo {
namespace {

Vector rosenbrock(const Vector& x) {
  const Index n = x.size();
  Vector r(n);
  for (Index i = 0; i < n; i += 2) {
    r(i) = 10.0 * (x(i + 1) - x(i) * x(i));
    r(i + 1) = 1.0 - x(i);
  }
  return r;
}

Matrix rosenbrock_jac(const Vector& x) {
  const Index n = x.size();
  Matrix j = Matrix::Zero(n, n);
  for (Index i = 0; i < n; i += 2) {
    j(i, i) = -20.0 * x(i);
    j(i, i + 1) = 10.0;
    j(i + 1, i) = -1.0;
  }
  return j;
}

Vector powell(const Vector& x) {
  const Index n = x.size();
  const double s5 = std::sqrt(5.0);
  const double s10 = std::sqrt(10.0);
  Vector r(n);
  for (Index i = 0; i < n; i += 4) {
    r(i) = x(i) + 10.0 * x(i + 1);
    r(i + 1) = s5 * (x(i + 2) - x(i + 3));
    r(i + 2) = (x(i + 1) - 2.0 * x(i + 2)) * (x(i + 1) - 2.0 * x(i + 2));
    r(i + 3) = s10 * (x(i) - x(i + 3)) * (x(i) - x(i + 3));
  }
  return r;
}

Matrix powell_jac(const Vector& x) {
  const Index n = x.size();
  const double s5 = std::sqrt(5.0);
  const double s10 = std::sqrt(10.0);
  Matrix j = Matrix::Zero(n, n);
  for (Index i = 0; i < n; i += 4) {
    j(i, i) = 1.0;
    j(i, i + 1) = 10.0;
    j(i + 1, i + 2) = s5;
    j(i + 1, i + 3) = -s5;
    const double a = x(i + 1) - 2.0 * x(i + 2);
    j(i + 2, i + 1) = 2.0 * a;
    j(i + 2, i + 2) = -4.0 * a;
    const double b = x(i) - x(i + 3);
    j(i + 3, i) = 2.0 * s10 * b;
    j(i + 3, i + 3) = -2.0 * s10 * b;
  }
  return j;
}

Vector broyden_tridiagonal(const Vector& x) {
  const Index n = x.size();
  Vector r(n);
  for (Index i = 0; i < n; ++i) {
    const double left = i > 0 ? x(i - 1) : 0.0;
    const double right = i + 1 < n ? x(i + 1) : 0.0;
    r(i) = (3.0 - 2.0 * x(i)) * x(i) - left - 2.0 * right + 1.0;
  }
  return r;
}

Matrix broyden_tridiagonal_jac(const Vector& x) {
  const Index n = x.size();
  Matrix j = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    j(i, i) = 3.0 - 4.0 * x(i);
    if (i > 0) j(i, i - 1) = -1.0;
    if (i + 1 < n) j(i, i + 1) = -2.0;
  }
  return j;
}

Vector linear_full_rank(const Vector& x) {
  const Index n = x.size();
  const Index m = 2 * n;
  const double t = 2.0 * x.sum() / static_cast<double>(m);
  Vector r(m);
  for (Index i = 0; i < m; ++i) r(i) = (i < n ? x(i) : 0.0) - t - 1.0;
  return r;
}

Matrix linear_full_rank_jac(const Vector& x) {
  const Index n = x.size();
  const Index m = 2 * n;
  Matrix j = Matrix::Constant(m, n, -2.0 / static_cast<double>(m));
  for (Index i = 0; i < n; ++i) j(i, i) += 1.0;
  return j;
}

Vector trigonometric(const Vector& x) {
  const Index n = x.size();
  const double base = static_cast<double>(n) - x.array().cos().sum();
  Vector r(n);
  for (Index i = 0; i < n; ++i) {
    r(i) = base + static_cast<double>(i + 1) * (1.0 - std::cos(x(i))) - std::sin(x(i));
  }
  return r;
}

Matrix trigonometric_jac(const Vector& x) {
  const Index n = x.size();
  Matrix j(n, n);
  for (Index i = 0; i < n; ++i) j.row(i) = x.array().sin().matrix().transpose();
  for (Index i = 0; i < n; ++i) {
    j(i, i) += static_cast<double>(i + 1) * std::sin(x(i)) - std::cos(x(i));
  }
  return j;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

double ProblemSpec::objective(const Vector& x) const {
  const Vector r = residuals(x);
  return r.squaredNorm();
}

Vector sphere_shift(Index n) {
  Vector s(n);
  for (Index i = 0; i < n; ++i) s(i) = 1.0 + static_cast<double>(i + 1) / static_cast<double>(n);
  return s;
}

std::vector<ProblemInfo> list_problems() {
  return {
      {"extended-rosenbrock", "n even",
       "r_{2i-1} = 10 (x_{2i} - x_{2i-1}^2), r_{2i} = 1 - x_{2i-1}; x0 = (-1.2, 1, ...); f* = 0"},
      {"extended-powell-singular", "n multiple of 4",
       "blocks (x1 + 10 x2, sqrt5 (x3 - x4), (x2 - 2 x3)^2, sqrt10 (x1 - x4)^2); x0 = (3, -1, 0, 1, ...); f* = 0"},
      {"broyden-tridiagonal", "n >= 1",
       "r_i = (3 - 2 x_i) x_i - x_{i-1} - 2 x_{i+1} + 1; x0 = -1; f* = 0"},
      {"linear-full-rank", "n >= 1, m = 2n",
       "r_i = x_i - (2/m) sum x - 1 (i <= n), -(2/m) sum x - 1 (i > n); x0 = 1; f* = m - n"},
      {"trigonometric", "n >= 1",
       "r_i = n - sum cos x_j + i (1 - cos x_i) - sin x_i; x0 = 1/n; f* = 0"},
      {"sphere-shifted", "n >= 1", "r_i = x_i - (1 + i/n); x0 = 0; f* = 0"},
  };
}

ProblemSpec get_problem(const std::string& name, Index n) {
  require(n >= 1, "get_problem: n must be positive");
  ProblemSpec p;
  p.name = name;
  p.n = n;
  p.m = n;
  if (name == "extended-rosenbrock") {
    require(n % 2 == 0, "extended-rosenbrock: n must be even");
    p.x0 = Vector(n);
    for (Index i = 0; i < n; i += 2) {
      p.x0(i) = -1.2;
      p.x0(i + 1) = 1.0;
    }
    p.residuals = rosenbrock;
  } else if (name == "extended-powell-singular") {
    require(n % 4 == 0, "extended-powell-singular: n must be a multiple of 4");
    p.x0 = Vector(n);
    for (Index i = 0; i < n; i += 4) {
      p.x0(i) = 3.0;
      p.x0(i + 1) = -1.0;
      p.x0(i + 2) = 0.0;
      p.x0(i + 3) = 1.0;
    }
    p.residuals = powell;
  } else if (name == "broyden-tridiagonal") {
    p.x0 = Vector::Constant(n, -1.0);
    p.residuals = broyden_tridiagonal;
  } else if (name == "linear-full-rank") {
    p.m = 2 * n;
    p.x0 = Vector::Ones(n);
    p.f_star = static_cast<double>(p.m - n);
    p.residuals = linear_full_rank;
  } else if (name == "trigonometric") {
    p.x0 = Vector::Constant(n, 1.0 / static_cast<double>(n));
    p.residuals = trigonometric;
  } else if (name == "sphere-shifted") {
    p.x0 = Vector::Zero(n);
    const Vector shift = sphere_shift(n);
    p.residuals = [shift](const Vector& x) { return Vector(x - shift); };
  } else {
    throw std::invalid_argument("get_problem: unknown problem '" + name + "'");
  }
  return p;
}

Matrix residual_jacobian(const ProblemSpec& problem, const Vector& x) {
  const std::string& name = problem.name;
  if (name == "extended-rosenbrock") return rosenbrock_jac(x);
  if (name == "extended-powell-singular") return powell_jac(x);
  if (name == "broyden-tridiagonal") return broyden_tridiagonal_jac(x);
  if (name == "linear-full-rank") return linear_full_rank_jac(x);
  if (name == "trigonometric") return trigonometric_jac(x);
  if (name == "sphere-shifted") return Matrix::Identity(x.size(), x.size());
  throw std::invalid_argument("residual_jacobian: unknown problem '" + name + "'");
}

CountingOracle::CountingOracle(ProblemSpec problem, std::optional<long> budget)
    : problem_(std::move(problem)), budget_(budget) {}

Vector CountingOracle::evaluate(const Vector& x) {
  if (budget_ && count_ >= *budget_) throw BudgetExhausted("evaluation budget exhausted");
  ++count_;
  return problem_.residuals(x);
}

}  // namespace sketchdfo
