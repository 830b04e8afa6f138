#include "safelink/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace safelink {

Eigen::Vector2d forward_kinematics(double theta1, double theta2) {
  return {kLink1 * std::cos(theta1) + kLink2 * std::cos(theta1 + theta2),
          kLink1 * std::sin(theta1) + kLink2 * std::sin(theta1 + theta2)};
}

KinematicsDerivatives kinematics_derivatives(double theta1, double theta2) {
  const double s1 = std::sin(theta1);
  const double c1 = std::cos(theta1);
  const double s12 = std::sin(theta1 + theta2);
  const double c12 = std::cos(theta1 + theta2);

  KinematicsDerivatives kd;
  kd.position << kLink1 * c1 + kLink2 * c12, kLink1 * s1 + kLink2 * s12;
  kd.jacobian << -kLink1 * s1 - kLink2 * s12, -kLink2 * s12,
                  kLink1 * c1 + kLink2 * c12,  kLink2 * c12;
  kd.hessian_x << -kLink1 * c1 - kLink2 * c12, -kLink2 * c12,
                  -kLink2 * c12,               -kLink2 * c12;
  kd.hessian_y << -kLink1 * s1 - kLink2 * s12, -kLink2 * s12,
                  -kLink2 * s12,               -kLink2 * s12;
  return kd;
}

ManipulatorState step(const ManipulatorState& state, const ControlInput& input,
                      double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  ManipulatorState next;
  next.theta1 = state.theta1 + state.omega1 * dt + 0.5 * input.u1 * dt * dt;
  next.theta2 = state.theta2 + state.omega2 * dt + 0.5 * input.u2 * dt * dt;
  next.omega1 = state.omega1 + input.u1 * dt;
  next.omega2 = state.omega2 + input.u2 * dt;
  return next;
}

LiftedCbf lift_cbf(const CbfEvaluation& eval, const KinematicsDerivatives& kin,
                   const ManipulatorState& state) {
  if (eval.gradient.size() != 2)
    throw std::invalid_argument("lift requires a planar barrier");

  const Eigen::Vector2d grad = eval.gradient;
  const Eigen::Matrix2d hess = eval.hessian;
  const Eigen::Vector2d omega(state.omega1, state.omega2);
  const Eigen::Vector2d g_theta = kin.jacobian.transpose() * grad;

  LiftedCbf lift;
  lift.b = eval.value;
  lift.lf_b = g_theta.dot(omega);
  // Second time derivative along the drift: the barrier curvature pulled back
  // through the Jacobian plus the curvature of the kinematic map itself.
  const Eigen::Matrix2d pulled = kin.jacobian.transpose() * hess * kin.jacobian
                                 + grad(0) * kin.hessian_x
                                 + grad(1) * kin.hessian_y;
  lift.lf2_b = omega.dot(pulled * omega);
  lift.lglf_b = g_theta;
  return lift;
}

}  // namespace safelink
