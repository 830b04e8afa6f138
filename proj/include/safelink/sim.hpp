#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "safelink/mpc.hpp"
#include "safelink/rvfl.hpp"
#include "safelink/safety_filter.hpp"
#include "safelink/scenario.hpp"

namespace safelink {

struct SimConfig {
  Scenario scenario;
  RvflConfig rvfl;
  CostMatrix cost;
  FilterConfig filter;
  MpcConfig mpc;
  double dt = 0.05;
  double max_time = 30.0;
  double goal_tolerance = 0.1;  // meters
  bool updates_enabled = true;
  void validate() const;
};

struct StepRecord {
  double t = 0.0;
  double theta1 = 0.0, theta2 = 0.0, omega1 = 0.0, omega2 = 0.0;
  double x = 0.0, y = 0.0;
  double u1 = 0.0, u2 = 0.0;
  double u_ref1 = 0.0, u_ref2 = 0.0;
  double b = 0.0;
  double psi1 = 0.0;
  QpStatus qp_status = QpStatus::Optimal;
  std::string event;  // "", "RegionExpand", or "RegionExpand;ModelUpdate"
};

struct EventRecord {
  double t = 0.0;
  std::string kind;  // RegionExpand or ModelUpdate
  double update_wall_ms = 0.0;
  int delta_n = 0;
};

struct SimSummary {
  bool reached = false;
  double final_error_m = 0.0;
  double min_b = 0.0;
  std::int64_t true_region_violations = 0;
  std::int64_t total_steps = 0;
};

struct SimLog {
  std::vector<StepRecord> steps;
  std::vector<EventRecord> events;
  SimSummary summary;
};

/// Runs the closed loop: offline training on the scenario sample, then per
/// step reference MPC, barrier lift, QP filtering, and the exact plant step;
/// region activations trigger incremental model updates when enabled.
/// Terminates on reaching the target within goal_tolerance or on max_time.
SimLog run(const SimConfig& cfg);

struct SweepRow {
  double c1 = 0.0;
  std::uint64_t seed = 0;
  int n_unsafe_to_safe = 0;  // unsafe training samples predicted safe
  int n_safe_to_unsafe = 0;
  double accuracy = 0.0;
};

/// Trains one model per (c1, seed) on that seed's offline sample and scores
/// the training set with the sign rule. Seeds fan out in parallel.
std::vector<SweepRow> sweep_c1(const SimConfig& cfg,
                               const std::vector<double>& c1_values,
                               const std::vector<std::uint64_t>& seeds);

// All floats at 17 significant digits so logs round-trip exactly.
void write_trajectory_csv(const SimLog& log, std::ostream& out);
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);
std::string summary_to_json(const SimSummary& summary);
std::string events_to_json(const std::vector<EventRecord>& events);

}  // namespace safelink
