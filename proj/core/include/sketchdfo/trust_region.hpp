#pragma once

#include "sketchdfo/linalg.hpp"

namespace sketchdfo {

struct TrustRegionConfig {
  double eta1 = 0.05;
  double eta2 = 1e-3;
  double nu1 = 0.5;
  double nu2 = 2.0;
  double delta_max = 1000.0;
  double delta0 = 1.0;

  /// Defaults with delta_max = 1000 delta0.
  static TrustRegionConfig defaults(double delta0);
  void validate() const;
};

struct StepResult {
  Vector d;
  double predicted_reduction = 0.0;  // m(0) - m(d)
  bool boundary_hit = false;
};

/// min g^T d + 1/2 d^T H d subject to |d| <= delta. Steihaug-Toint CG,
/// followed by an eigenvalue-based boundary solution (hard case included)
/// whenever CG stops on the boundary or meets negative curvature; the
/// lower model value wins.
StepResult solve_trsp(const Eigen::Ref<const Vector>& g, const Eigen::Ref<const Matrix>& h, double delta);

/// (f_old - f_new) / pred; -inf when pred <= 0 or f_new is not finite.
double acceptance_ratio(double f_old, double f_new, double predicted_reduction);

/// Grows to min(nu2 delta, delta_max) when rho >= eta1 and
/// g_norm >= eta2 * reference, shrinks to nu1 delta otherwise. The
/// reference is delta unless the caller supplies another scale.
double update_radius(double rho, double delta, double g_norm, const TrustRegionConfig& cfg,
                     double reference = -1.0);

}  // namespace sketchdfo
