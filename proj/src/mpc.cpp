#include "safelink/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace safelink {

void MpcConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("horizon must be at least 1");
  if (input_weight < 0.0 || terminal_weight < 0.0)
    throw std::invalid_argument("weights must be nonnegative");
  if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be positive");
  if (max_iters < 0) throw std::invalid_argument("max_iters must be nonnegative");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
}

double rollout_cost(const ManipulatorState& state,
                    const std::vector<ControlInput>& inputs,
                    const Eigen::Vector2d& target, const MpcConfig& cfg) {
  if (static_cast<int>(inputs.size()) != cfg.horizon)
    throw std::invalid_argument("input sequence length must equal horizon");
  ManipulatorState z = state;
  double cost = 0.0;
  for (const ControlInput& u : inputs) {
    z = step(z, u, cfg.dt);
    const Eigen::Vector2d p = forward_kinematics(z.theta1, z.theta2);
    cost += (p - target).squaredNorm() +
            cfg.input_weight * (u.u1 * u.u1 + u.u2 * u.u2);
  }
  const Eigen::Vector2d p_final = forward_kinematics(z.theta1, z.theta2);
  cost += cfg.terminal_weight * (p_final - target).squaredNorm();
  return cost;
}

Eigen::VectorXd rollout_cost_gradient(const ManipulatorState& state,
                                      const std::vector<ControlInput>& inputs,
                                      const Eigen::Vector2d& target,
                                      const MpcConfig& cfg) {
  if (static_cast<int>(inputs.size()) != cfg.horizon)
    throw std::invalid_argument("input sequence length must equal horizon");
  const int t_len = cfg.horizon;
  const double dt = cfg.dt;

  std::vector<ManipulatorState> states(static_cast<std::size_t>(t_len) + 1);
  states[0] = state;
  for (int k = 0; k < t_len; ++k) {
    states[static_cast<std::size_t>(k) + 1] =
        step(states[static_cast<std::size_t>(k)],
             inputs[static_cast<std::size_t>(k)], dt);
  }

  // Backward sweep. lam_theta/lam_omega carry dJ/dz_k; the step map
  // contributes theta_k+1 = theta_k + dt omega_k + ... so its transpose sends
  // lam_theta into lam_omega scaled by dt.
  Eigen::VectorXd grad(2 * t_len);
  Eigen::Vector2d lam_theta = Eigen::Vector2d::Zero();
  Eigen::Vector2d lam_omega = Eigen::Vector2d::Zero();
  for (int k = t_len; k >= 1; --k) {
    const ManipulatorState& z = states[static_cast<std::size_t>(k)];
    const KinematicsDerivatives kin =
        kinematics_derivatives(z.theta1, z.theta2);
    const double stage_weight =
        (k == t_len) ? 1.0 + cfg.terminal_weight : 1.0;
    if (k < t_len) {
      lam_omega += dt * lam_theta;  // uses lam_theta of step k+1
    }
    lam_theta += stage_weight * 2.0 *
                 (kin.jacobian.transpose() * (kin.position - target));

    const ControlInput& u = inputs[static_cast<std::size_t>(k - 1)];
    const Eigen::Vector2d du =
        0.5 * dt * dt * lam_theta + dt * lam_omega +
        2.0 * cfg.input_weight * Eigen::Vector2d(u.u1, u.u2);
    grad(2 * (k - 1)) = du(0);
    grad(2 * (k - 1) + 1) = du(1);
  }
  return grad;
}

namespace {

double clamp_input(double v) {
  return std::clamp(v, -kInputLimit, kInputLimit);
}

}  // namespace

std::vector<ControlInput> mpc_plan(const ManipulatorState& state,
                                   const Eigen::Vector2d& target,
                                   const MpcConfig& cfg,
                                   const std::vector<ControlInput>* warm_start) {
  cfg.validate();
  const int t_len = cfg.horizon;
  std::vector<ControlInput> inputs(static_cast<std::size_t>(t_len));
  if (warm_start && static_cast<int>(warm_start->size()) == t_len) {
    inputs = *warm_start;
    for (ControlInput& u : inputs) {
      u.u1 = clamp_input(u.u1);
      u.u2 = clamp_input(u.u2);
    }
  }

  double cost = rollout_cost(state, inputs, target, cfg);
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const Eigen::VectorXd grad =
        rollout_cost_gradient(state, inputs, target, cfg);
    double step_len = cfg.step_size;
    bool improved = false;
    while (step_len >= 1e-12) {
      std::vector<ControlInput> cand(static_cast<std::size_t>(t_len));
      for (int k = 0; k < t_len; ++k) {
        cand[static_cast<std::size_t>(k)].u1 = clamp_input(
            inputs[static_cast<std::size_t>(k)].u1 - step_len * grad(2 * k));
        cand[static_cast<std::size_t>(k)].u2 = clamp_input(
            inputs[static_cast<std::size_t>(k)].u2 -
            step_len * grad(2 * k + 1));
      }
      const double cand_cost = rollout_cost(state, cand, target, cfg);
      if (cand_cost < cost) {
        inputs = std::move(cand);
        cost = cand_cost;
        improved = true;
        break;
      }
      step_len *= 0.5;
    }
    if (!improved) break;
  }
  return inputs;
}

ControlInput mpc_reference(const ManipulatorState& state,
                           const Eigen::Vector2d& target,
                           const MpcConfig& cfg) {
  return mpc_plan(state, target, cfg, nullptr).front();
}

ControlInput mpc_reference(const ManipulatorState& state,
                           const Eigen::Vector2d& target, const MpcConfig& cfg,
                           std::vector<ControlInput>& warm_start) {
  std::vector<ControlInput> plan = mpc_plan(state, target, cfg, &warm_start);
  const ControlInput first = plan.front();
  warm_start.assign(plan.begin() + 1, plan.end());
  warm_start.push_back(plan.back());
  return first;
}

}  // namespace safelink
