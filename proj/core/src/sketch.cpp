#include "sketchdfo/sketch.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace sketchdfo {

ProbabilityVector probabilities_from_magnitudes(const Eigen::Ref<const Vector>& v, Index p) {
  const Index n = v.size();
  if (p < 1 || p > n) throw std::invalid_argument("optimal_probabilities: need 1 <= p <= n");
  ProbabilityVector out;
  out.raw = Vector::Ones(n);

  if (p < n) {
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v(a) < v(b); });

    Vector sorted(n);
    for (Index i = 0; i < n; ++i) sorted(i) = v(order[static_cast<std::size_t>(i)]);
    Vector prefix(n);
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) prefix(i) = (acc += sorted(i));

    // Largest c in [n-p+1, n] with (p+c-n) v_(c) <= sum_{j<=c} v_(j); 1-based c.
    Index c = n - p + 1;
    for (Index cc = n; cc >= n - p + 1; --cc) {
      const double lhs = static_cast<double>(p + cc - n) * sorted(cc - 1);
      if (lhs <= prefix(cc - 1) * (1.0 + 1e-14)) {
        c = cc;
        break;
      }
    }
    const double weight = static_cast<double>(p + c - n);
    const double total = prefix(c - 1);
    for (Index i = 0; i < c; ++i) {
      const double pi_i = total > 0.0 ? weight * sorted(i) / total : weight / static_cast<double>(c);
      out.raw(order[static_cast<std::size_t>(i)]) = pi_i;
    }
  }

  out.pi = out.raw.cwiseMin(1.0).cwiseMax(kProbabilityFloor);
  out.expected_size = out.pi.sum();
  return out;
}

ProbabilityVector optimal_probabilities(const Eigen::Ref<const Vector>& delta,
                                        const Eigen::Ref<const Matrix>& q, Index p) {
  return probabilities_from_magnitudes((q.transpose() * delta).cwiseAbs(), p);
}

double weighted_variance_norm(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& pi) {
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) acc += (1.0 / pi(i) - 1.0) * v(i) * v(i);
  return acc;
}

SketchSizeChoice choose_sketch_size(double radius, const Eigen::Ref<const Matrix>& q, double C,
                                    const Eigen::Ref<const Vector>& delta, Index b0) {
  const Index n = q.cols();
  if (b0 < 1 || b0 > n) throw std::invalid_argument("choose_sketch_size: need 1 <= b0 <= n");
  if (C < 0.0) throw std::invalid_argument("choose_sketch_size: C must be nonnegative");
  SketchSizeChoice out;
  if (C == 0.0) {
    out.p = n;
    out.probs = probabilities_from_magnitudes(Vector::Zero(n), n);
    return out;
  }
  const Vector v = (q.transpose() * delta).cwiseAbs();
  const double bound = static_cast<double>(n) * C * C * radius * radius;
  for (Index b = b0; b <= n; ++b) {
    ProbabilityVector probs = probabilities_from_magnitudes(v, b);
    const double norm = weighted_variance_norm(v, probs.pi);
    if (norm <= bound || b == n) {
      out.p = b;
      out.probs = std::move(probs);
      out.weighted_norm = norm;
      return out;
    }
  }
  return out;
}

SampleRealization realize_subset(const Eigen::Ref<const Vector>& pi, CounterRng& rng) {
  SampleRealization out;
  out.seed_state = rng.state();
  for (Index i = 0; i < pi.size(); ++i) {
    if (rng.uniform() < pi(i)) out.J.push_back(i);
  }
  return out;
}

SampleRealization realize_subset(const ProbabilityVector& probs, CounterRng& rng) {
  return realize_subset(probs.pi, rng);
}

Matrix sketch_rows(const Eigen::Ref<const Matrix>& q, const std::vector<Index>& J) {
  Matrix s(static_cast<Index>(J.size()), q.rows());
  for (std::size_t r = 0; r < J.size(); ++r) s.row(static_cast<Index>(r)) = q.col(J[r]).transpose();
  return s;
}

Vector update_average_gradient(const Eigen::Ref<const Vector>& g_bar, const Eigen::Ref<const Matrix>& s,
                               const Eigen::Ref<const Vector>& g_hat) {
  return (g_bar - s.transpose() * (s * g_bar)) + s.transpose() * (s * g_hat);
}

Matrix update_average_hessian(const Eigen::Ref<const Matrix>& h_bar, const Eigen::Ref<const Matrix>& s,
                              const Eigen::Ref<const Matrix>& h_hat_sub) {
  const Matrix proj = s.transpose() * s;
  const Matrix out = h_bar - proj * h_bar * proj + s.transpose() * h_hat_sub * s;
  return linalg::symmetrized(out);
}

Vector ameliorated_gradient(const Eigen::Ref<const Vector>& g_bar, const Eigen::Ref<const Matrix>& q,
                            const std::vector<Index>& J, const Eigen::Ref<const Vector>& pi,
                            const Eigen::Ref<const Vector>& g_hat, EstimatorMode mode) {
  const Matrix s = sketch_rows(q, J);
  Vector w(static_cast<Index>(J.size()));
  for (std::size_t r = 0; r < J.size(); ++r) w(static_cast<Index>(r)) = 1.0 / pi(J[r]);
  if (mode == EstimatorMode::Practical) return s.transpose() * w.cwiseProduct(s * g_hat);
  return g_bar + s.transpose() * w.cwiseProduct(s * (g_hat - g_bar));
}

Matrix ameliorated_hessian(const Eigen::Ref<const Matrix>& h_bar, const Eigen::Ref<const Matrix>& q,
                           const std::vector<Index>& J, const Eigen::Ref<const Vector>& pi,
                           const Eigen::Ref<const Matrix>& h_hat_sub) {
  const Matrix s = sketch_rows(q, J);
  Vector w(static_cast<Index>(J.size()));
  for (std::size_t r = 0; r < J.size(); ++r) w(static_cast<Index>(r)) = 1.0 / pi(J[r]);
  const Matrix sd = w.asDiagonal() * s;  // D S
  const Matrix proj = s.transpose() * sd;  // S^T D S
  const Matrix out = h_bar - proj * h_bar * proj.transpose() + sd.transpose() * h_hat_sub * sd;
  return linalg::symmetrized(out);
}

double gradient_estimator_variance(const Eigen::Ref<const Vector>& g_bar, const Eigen::Ref<const Matrix>& q,
                                   const Eigen::Ref<const Vector>& pi,
                                   const Eigen::Ref<const Vector>& expectation) {
  const Vector v = q.transpose() * (g_bar - expectation);
  return weighted_variance_norm(v, pi);
}

EstimatorLaw enumerate_estimator_law(const Eigen::Ref<const Matrix>& q, const Eigen::Ref<const Vector>& pi,
                                     const Eigen::Ref<const Vector>& g_bar, const SubsetGradientMap& g_hat_map,
                                     EstimatorMode mode) {
  const Index n = q.cols();
  if (n > kMaxEnumerationDim) throw std::invalid_argument("enumerate_estimator_law: n too large");
  const std::uint64_t count = std::uint64_t{1} << n;

  std::vector<double> prob(count);
  std::vector<Vector> values(count);
  EstimatorLaw law;
  law.mean = Vector::Zero(n);
  std::vector<Index> J;
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    J.clear();
    double p = 1.0;
    for (Index i = 0; i < n; ++i) {
      if (mask & (std::uint64_t{1} << i)) {
        J.push_back(i);
        p *= pi(i);
      } else {
        p *= 1.0 - pi(i);
      }
    }
    prob[mask] = p;
    values[mask] = ameliorated_gradient(g_bar, q, J, pi, g_hat_map(J), mode);
    law.mean += p * values[mask];
  }
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    law.variance += prob[mask] * (values[mask] - law.mean).squaredNorm();
  }
  return law;
}

}  // namespace sketchdfo
