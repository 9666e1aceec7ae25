#pragma once

// Sampling probabilities, sketch-size selection, Bernoulli realization, and
// the sketch-and-project / inverse-probability-weighted estimators, plus an
// exhaustive-enumeration oracle for their exact laws on small n.

#include "sketchdfo/linalg.hpp"
#include "sketchdfo/rng.hpp"

#include <functional>
#include <vector>

namespace sketchdfo {

inline constexpr double kProbabilityFloor = 1e-8;
inline constexpr Index kMaxEnumerationDim = 12;

struct ProbabilityVector {
  Vector pi;                   // floored, in (0, 1]
  Vector raw;                  // closed form before flooring
  double expected_size = 0.0;  // sum of pi
};

/// Variance-minimizing inclusion probabilities for |Q^T delta| with sum p.
ProbabilityVector optimal_probabilities(const Eigen::Ref<const Vector>& delta,
                                        const Eigen::Ref<const Matrix>& q, Index p);

/// Same closed form given the magnitudes v directly.
ProbabilityVector probabilities_from_magnitudes(const Eigen::Ref<const Vector>& v, Index p);

/// sum_i (1/pi_i - 1) v_i^2, the squared (Q D Q^T - I)-norm of delta when
/// v = Q^T delta.
double weighted_variance_norm(const Eigen::Ref<const Vector>& v, const Eigen::Ref<const Vector>& pi);

struct SketchSizeChoice {
  Index p = 0;
  ProbabilityVector probs;
  double weighted_norm = 0.0;
};

/// Smallest b >= b0 whose optimal probabilities satisfy
/// |delta|^2_{Q D Q^T - I} <= n C^2 radius^2. C = 0 selects b = n.
SketchSizeChoice choose_sketch_size(double radius, const Eigen::Ref<const Matrix>& q, double C,
                                    const Eigen::Ref<const Vector>& delta, Index b0);

struct SampleRealization {
  std::vector<Index> J;  // sorted
  CounterRng::State seed_state;
};

/// One uniform draw per index in order; i is kept when u_i < pi_i.
SampleRealization realize_subset(const ProbabilityVector& probs, CounterRng& rng);
SampleRealization realize_subset(const Eigen::Ref<const Vector>& pi, CounterRng& rng);

/// Rows q_j^T for j in J.
Matrix sketch_rows(const Eigen::Ref<const Matrix>& q, const std::vector<Index>& J);

/// g_bar - S^T S g_bar + S^T S g_hat.
Vector update_average_gradient(const Eigen::Ref<const Vector>& g_bar, const Eigen::Ref<const Matrix>& s,
                               const Eigen::Ref<const Vector>& g_hat);

/// H_bar - S^T S H_bar S^T S + S^T H_hat_sub S.
Matrix update_average_hessian(const Eigen::Ref<const Matrix>& h_bar, const Eigen::Ref<const Matrix>& s,
                              const Eigen::Ref<const Matrix>& h_hat_sub);

enum class EstimatorMode { Practical, Full };

/// Full: g_bar - S^T D S g_bar + S^T D S g_hat. Practical: S^T D S g_hat.
/// S holds the J-indexed columns of Q as rows; D = diag(1/pi_j), j in J.
Vector ameliorated_gradient(const Eigen::Ref<const Vector>& g_bar, const Eigen::Ref<const Matrix>& q,
                            const std::vector<Index>& J, const Eigen::Ref<const Vector>& pi,
                            const Eigen::Ref<const Vector>& g_hat, EstimatorMode mode);

/// H_bar - S^T D S H_bar S^T D S + S^T D H_hat_sub D S.
Matrix ameliorated_hessian(const Eigen::Ref<const Matrix>& h_bar, const Eigen::Ref<const Matrix>& q,
                           const std::vector<Index>& J, const Eigen::Ref<const Vector>& pi,
                           const Eigen::Ref<const Matrix>& h_hat_sub);

/// |g_bar - expectation|^2_{Q D Q^T - I}, D = diag(1/pi) over all n.
double gradient_estimator_variance(const Eigen::Ref<const Vector>& g_bar, const Eigen::Ref<const Matrix>& q,
                                   const Eigen::Ref<const Vector>& pi,
                                   const Eigen::Ref<const Vector>& expectation);

struct EstimatorLaw {
  Vector mean;
  double variance = 0.0;  // E |g_tilde - mean|^2
};

using SubsetGradientMap = std::function<Vector(const std::vector<Index>&)>;

/// Exact law of the full-mode ameliorated gradient by summing over all 2^n
/// subsets. Throws std::invalid_argument for n > kMaxEnumerationDim.
EstimatorLaw enumerate_estimator_law(const Eigen::Ref<const Matrix>& q, const Eigen::Ref<const Vector>& pi,
                                     const Eigen::Ref<const Vector>& g_bar, const SubsetGradientMap& g_hat_map,
                                     EstimatorMode mode = EstimatorMode::Full);

}  // namespace sketchdfo
