#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "safelink/rvfl.hpp"
#include "safelink/scenario.hpp"

namespace safelink {

/// Analytic Lipschitz constants of the barrier and its gradient over the
/// workspace, plus the largest slope actually observed on random pairs.
struct LipschitzReport {
  double l_b = 0.0;
  double l_grad = 0.0;
  double empirical_max_ratio = 0.0;
};

/// Certified-unsafe ball radius around each unsafe training sample, in
/// training-row order; zero for samples the model does not classify unsafe.
struct CoverageReport {
  std::vector<double> radii;
  int violations = 0;
};

struct ConservativenessReport {
  bool covered = true;
  std::vector<Eigen::Vector2d> miss_points;
};

/// l_b = 2(||w_b0 col2|| + sum_k L_phi ||w_ek|| |w_bk[2]|) / input_scale with
/// L_phi = s/4; l_grad uses L_phi' = s^2/(6 sqrt 3) and squared weight norms
/// with a second 1/input_scale factor. The empirical ratio is
/// max |B(x)-B(y)|/||x-y|| over pair_count random workspace pairs.
LipschitzReport lipschitz_bound(const TrainedModel& model,
                                int pair_count = 10000,
                                std::uint64_t seed = 1);

/// Row sums of the hat matrix H = A K A^T over unsafe columns, one value per
/// unsafe training row, computed as A_k . (K u_sum) so H is never formed.
/// training_data must be the data the model was trained on.
std::vector<double> hat_row_unsafe_sum(const TrainedModel& model,
                                       const LabeledSamples& training_data);

/// delta_i = |B(x_i)| / l_b at unsafe samples with B < 0; probes each ball
/// uniformly and counts sign violations (none are possible if l_b is valid).
CoverageReport coverage_radii(const TrainedModel& model,
                              const LabeledSamples& training_data,
                              int probes_per_ball = 100,
                              std::uint64_t seed = 2);

/// Samples probe_count points uniformly in the true unsafe region at the
/// given time and reports whether the model flags them all.
ConservativenessReport conservativeness_check(const TrainedModel& model,
                                              const Scenario& scenario,
                                              int probe_count,
                                              double at_time = 0.0,
                                              std::uint64_t seed = 3);

std::string lipschitz_report_to_json(const LipschitzReport& report);
std::string coverage_report_to_json(const CoverageReport& report);
std::string conservativeness_report_to_json(const ConservativenessReport& r);

}  // namespace safelink
