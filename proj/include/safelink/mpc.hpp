#pragma once

#include <Eigen/Dense>

#include <vector>

#include "safelink/dynamics.hpp"

namespace safelink {

struct MpcConfig {
  int horizon = 20;
  double input_weight = 0.01;
  double terminal_weight = 10.0;
  int max_iters = 100;
  double step_size = 0.1;
  double dt = 0.05;
  void validate() const;
};

/// J = sum_k ||p_k - target||^2 + input_weight sum_k ||u_k||^2
///   + terminal_weight ||p_T - target||^2, where p_k is the endpoint after
/// applying u_k and the terminal term reuses the last stage's endpoint.
double rollout_cost(const ManipulatorState& state,
                    const std::vector<ControlInput>& inputs,
                    const Eigen::Vector2d& target, const MpcConfig& cfg);

/// Exact gradient of rollout_cost in the stacked input vector
/// (u1_1, u2_1, u1_2, ...), by backward accumulation through the rollout.
Eigen::VectorXd rollout_cost_gradient(const ManipulatorState& state,
                                      const std::vector<ControlInput>& inputs,
                                      const Eigen::Vector2d& target,
                                      const MpcConfig& cfg);

/// Projected gradient descent on [-kInputLimit, kInputLimit]^{2T}: start from
/// warm_start when given (else zeros), take steps of cfg.step_size halved
/// until the cost decreases, stop when no halving helps. Returns the whole
/// optimized sequence; cost never increases across accepted iterates.
std::vector<ControlInput> mpc_plan(const ManipulatorState& state,
                                   const Eigen::Vector2d& target,
                                   const MpcConfig& cfg,
                                   const std::vector<ControlInput>* warm_start
                                   = nullptr);

ControlInput mpc_reference(const ManipulatorState& state,
                           const Eigen::Vector2d& target,
                           const MpcConfig& cfg);

/// Warm-started variant for the control loop: seeds the optimizer with
/// warm_start, then overwrites it with the solution shifted by one step
/// (last entry repeated), ready for the next call.
ControlInput mpc_reference(const ManipulatorState& state,
                           const Eigen::Vector2d& target, const MpcConfig& cfg,
                           std::vector<ControlInput>& warm_start);

}  // namespace safelink
