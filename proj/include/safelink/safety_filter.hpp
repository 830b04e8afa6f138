#pragma once

#include <Eigen/Dense>

#include <array>
#include <vector>

#include "safelink/dynamics.hpp"

namespace safelink {

/// One affine inequality a.dot(u) >= b.
struct ConstraintRow {
  Eigen::Vector2d a = Eigen::Vector2d::Zero();
  double b = 0.0;
};

struct LinearConstraintSet {
  std::vector<ConstraintRow> rows;
  Eigen::Vector2d box_lo{-kInputLimit, -kInputLimit};
  Eigen::Vector2d box_hi{kInputLimit, kInputLimit};
  void validate() const;
};

struct FilterConfig {
  double alpha1_gain = 1.0;
  double alpha2_gain = 1.0;
  double velocity_limit = 0.5;  // rad/s
  void validate() const;
};

enum class QpStatus { Optimal, Infeasible };

/// active_set holds indices of the constraints tight at the solution:
/// 0..rows-1 for rows, then rows+0..rows+3 for the box faces in the order
/// u1 lower, u1 upper, u2 lower, u2 upper. Empty on Infeasible.
struct QpResult {
  ControlInput u_safe;
  QpStatus status = QpStatus::Optimal;
  std::vector<int> active_set;
};

/// Second-order barrier condition with linear class-K gains k1, k2:
/// lglf_b . u >= -(lf2_b + (k1 + k2) lf_b + k1 k2 b).
ConstraintRow hocbf_row(const LiftedCbf& lift, const FilterConfig& cfg);

/// Velocity-limit rows u1 <= limit - w1, -u1 <= limit + w1 and the same for
/// the second joint, in a.u >= b form. They keep |omega| <= limit under the
/// exact integrator for any dt <= 1.
std::array<ConstraintRow, 4> velocity_rows(const ManipulatorState& state,
                                           const FilterConfig& cfg);

/// Minimizes ||u - u_ref||^2 over the rows and box. Primal active-set method;
/// falls back to exhaustive enumeration if it fails to settle. When the
/// constraints are inconsistent, returns the box point minimizing the largest
/// row violation (ties resolved toward the reference), flagged Infeasible.
QpResult solve_qp(const ControlInput& u_ref,
                  const LinearConstraintSet& constraints);

/// Exhaustive reference solver: tries the unconstrained point, every single
/// active constraint, and every pair. Globally optimal at this size; shipped
/// as the fallback and used to cross-check the primal method.
QpResult solve_qp_enumerated(const ControlInput& u_ref,
                             const LinearConstraintSet& constraints);

}  // namespace safelink
