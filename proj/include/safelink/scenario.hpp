#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "safelink/dynamics.hpp"
#include "safelink/keyfile.hpp"
#include "safelink/rvfl.hpp"

namespace safelink {

/// Closed axis-aligned rectangle that becomes unsafe at active_from seconds.
struct TimedRect {
  double x_min = 0.0;
  double x_max = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
  double active_from = 0.0;

  bool contains_point(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
  double area() const { return (x_max - x_min) * (y_max - y_min); }
  void validate() const;
};

struct Scenario {
  std::vector<TimedRect> rects;
  double workspace_lo = -15.0;
  double workspace_hi = 15.0;
  Eigen::Vector2d target{-4.1, 6.9};
  ManipulatorState initial_state{};
  int offline_sample_count = 5000;
  int online_sample_count = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Ground truth: p unsafe at time t iff inside some rectangle already active.
bool contains(const Scenario& scenario, const Eigen::Vector2d& p, double t);

/// offline_sample_count points uniform on the workspace box, labeled by the
/// t = 0 region. Deterministic per scenario seed.
LabeledSamples sample_offline(const Scenario& scenario);

/// online_sample_count points uniform over the union of rectangles whose
/// active_from equals event_time exactly, all labeled Unsafe. Deterministic
/// per (seed, event_time). Throws if nothing activates then.
LabeledSamples sample_region_delta(const Scenario& scenario, double event_time);

/// Distinct activation times after t = 0, ascending.
std::vector<double> activation_times(const Scenario& scenario);

Scenario scenario_from_keyfile(const KeyFile& file);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace safelink
