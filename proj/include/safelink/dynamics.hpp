#pragma once

#include <Eigen/Dense>

#include "safelink/rvfl.hpp"

namespace safelink {

inline constexpr double kLink1 = 4.0;
inline constexpr double kLink2 = 4.0;
inline constexpr double kInputLimit = 2.0;  // |u1|, |u2| bound, rad/s^2

struct ManipulatorState {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double omega1 = 0.0;
  double omega2 = 0.0;
};

struct ControlInput {
  double u1 = 0.0;
  double u2 = 0.0;
};

struct KinematicsDerivatives {
  Eigen::Vector2d position;
  Eigen::Matrix2d jacobian;   // d(x,y)/d(theta1,theta2)
  Eigen::Matrix2d hessian_x;  // second derivatives of x in theta
  Eigen::Matrix2d hessian_y;
};

/// Barrier and its Lie derivatives along the joint-space double integrator.
/// lglf_b multiplies u in the second derivative, so the filter row is
/// linear in the input.
struct LiftedCbf {
  double b = 0.0;
  double lf_b = 0.0;
  double lf2_b = 0.0;
  Eigen::Vector2d lglf_b = Eigen::Vector2d::Zero();
};

Eigen::Vector2d forward_kinematics(double theta1, double theta2);

KinematicsDerivatives kinematics_derivatives(double theta1, double theta2);

/// Exact discrete step of the double integrator under a zero-order-hold
/// input: theta += omega*dt + u*dt^2/2, omega += u*dt.
ManipulatorState step(const ManipulatorState& state, const ControlInput& input,
                      double dt);

/// Chain rule from a workspace barrier to the joint state. eval must be the
/// barrier evaluated at forward_kinematics(state) and kin the derivatives at
/// the same angles.
LiftedCbf lift_cbf(const CbfEvaluation& eval, const KinematicsDerivatives& kin,
                   const ManipulatorState& state);

}  // namespace safelink
