#pragma once

// Scalable nonlinear least-squares test problems, f(x) = sum_i r_i(x)^2.

#include "sketchdfo/linalg.hpp"

#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sketchdfo {

using ResidualFunction = std::function<Vector(const Vector&)>;

struct ProblemSpec {
  std::string name;
  Index n = 0;
  Index m = 0;
  Vector x0;
  double f_star = 0.0;
  ResidualFunction residuals;

  double objective(const Vector& x) const;
};

struct ProblemInfo {
  std::string name;
  std::string dimension_rule;
  std::string formula;
};

std::vector<ProblemInfo> list_problems();

/// Throws std::invalid_argument for an unknown name or an invalid n.
ProblemSpec get_problem(const std::string& name, Index n);

/// The shift used by sphere-shifted: s_i = 1 + i/n, i = 1..n.
Vector sphere_shift(Index n);

/// Analytic residual Jacobian (m x n). For tests only; solvers never see it.
Matrix residual_jacobian(const ProblemSpec& problem, const Vector& x);

class BudgetExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Counts residual-vector evaluations and enforces an optional cap.
class CountingOracle {
 public:
  explicit CountingOracle(ProblemSpec problem, std::optional<long> budget = std::nullopt);

  Vector evaluate(const Vector& x);
  long count() const { return count_; }
  std::optional<long> budget() const { return budget_; }
  const ProblemSpec& problem() const { return problem_; }

 private:
  ProblemSpec problem_;
  std::optional<long> budget_;
  long count_ = 0;
};

}  // namespace sketchdfo
