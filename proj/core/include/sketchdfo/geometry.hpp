#pragma once

// Point bank and the two greedy geometry scans: choosing the subspace that
// existing points already cover, and growing an interpolation set while the
// reduced KKT matrix stays well conditioned.

#include "sketchdfo/linalg.hpp"

#include <cmath>
#include <iosfwd>
#include <vector>

namespace sketchdfo {

struct BankEntry {
  Vector point;
  Vector residuals;
  double total = 0.0;  // sum of squared residuals, +inf when any is non-finite

  bool finite() const { return std::isfinite(total); }
};

/// Append-only record of every evaluation made during a run.
class PointBank {
 public:
  PointBank() = default;
  explicit PointBank(Index dim) : dim_(dim) {}

  /// Returns the index of the new entry.
  Index append(Vector point, Vector residuals);

  Index size() const { return static_cast<Index>(entries_.size()); }
  Index dim() const { return dim_; }
  long eval_count() const { return static_cast<long>(entries_.size()); }
  const BankEntry& operator[](Index i) const { return entries_[static_cast<std::size_t>(i)]; }
  const std::vector<BankEntry>& entries() const { return entries_; }

  /// Header "index,x1..xn,r1..rm,total", one row per evaluation.
  void write_csv(std::ostream& os) const;

 private:
  Index dim_ = 0;
  std::vector<BankEntry> entries_;
};

double sum_of_squares(const Eigen::Ref<const Vector>& residuals);

struct GeometryConfig {
  double c = 1.0;           // radius multiplier
  double theta1 = 1e-5;     // projection threshold
  double theta2 = 1e-3;     // reduced-system conditioning threshold
  double big_lambda = 1e5;  // poisedness bound used by diagnostics

  /// c = sqrt(n), theta1 = 1e-5, theta2 = 1e-3, Lambda = 1/theta1.
  static GeometryConfig defaults(Index n);
  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

struct SubspaceSelection {
  Matrix S;       // p x n, orthonormal rows
  Matrix S_perp;  // (n-p) x n
  Matrix Q;       // n x n, columns are the rows of S then of S_perp
  std::vector<Index> contributing_points;

  Index rank() const { return S.rows(); }
};

/// Scans the bank in insertion order and admits y when |y - x| <= c delta
/// and |proj_{S_perp}((y - x) / (c delta))| >= theta1. Non-finite entries
/// are skipped.
SubspaceSelection identify_initial_subspace(const PointBank& bank, const Eigen::Ref<const Vector>& x,
                                            double delta, const GeometryConfig& cfg);

struct InterpolationSet {
  std::vector<Index> points;     // bank indices, Z first
  std::vector<Index> z_initial;  // the seed subset
  double sigma_min_record = 0.0; // sqrt of the smallest reduced eigenvalue; +inf if none added

  /// Rows (y - x) / delta for each member, in order.
  Matrix displacements(const PointBank& bank, const Eigen::Ref<const Vector>& x, double delta) const;
};

/// Greedy extension of z (bank indices, x first) by bank points within
/// c delta. A candidate is kept when the smallest singular value of
/// M_perp(Y+)^T N+ stays >= theta2, where M_perp stacks the complement
/// linear and quadratic columns. Stops once max_points are selected.
/// Displacements are scaled by 1/delta.
InterpolationSet determine_interpolation_set(const Eigen::Ref<const Matrix>& s,
                                             const Eigen::Ref<const Matrix>& s_perp,
                                             const std::vector<Index>& z, const PointBank& bank,
                                             const Eigen::Ref<const Vector>& x, double delta,
                                             const GeometryConfig& cfg, Index max_points);

struct SolvabilityReport {
  bool solvable = false;
  bool rank_ok = false;
  double reduced_min_eigenvalue = 0.0;  // +inf when the null space is empty
};

/// M(Phi_S, Y)^T full row rank and N^T M_perp M_perp^T N positive definite.
SolvabilityReport verify_unique_solvability(const Eigen::Ref<const Matrix>& s,
                                            const Eigen::Ref<const Matrix>& s_perp,
                                            const Eigen::Ref<const Matrix>& points);

}  // namespace sketchdfo
