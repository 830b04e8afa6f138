#include "safelink/scenario.hpp"

#include <algorithm>
#include <bit>
#include <random>
#include <stdexcept>
#include <string>

#include "safelink/rng.hpp"

namespace safelink {

namespace {

// Sub-stream tags for the scenario's root seed.
constexpr std::uint64_t kOfflineStream = 1;
constexpr std::uint64_t kDeltaStream = 2;

}  // namespace

void TimedRect::validate() const {
  if (!(x_min < x_max) || !(y_min < y_max))
    throw std::invalid_argument("rectangle has empty extent");
  if (active_from < 0.0)
    throw std::invalid_argument("rectangle activation time is negative");
}

void Scenario::validate() const {
  if (!(workspace_lo < workspace_hi))
    throw std::invalid_argument("workspace box is inverted");
  if (offline_sample_count < 1 || online_sample_count < 1)
    throw std::invalid_argument("sample counts must be positive");
  for (const TimedRect& rect : rects) {
    rect.validate();
    if (rect.contains_point(target(0), target(1)))
      throw std::invalid_argument("target lies inside an unsafe rectangle");
  }
  const Eigen::Vector2d start =
      forward_kinematics(initial_state.theta1, initial_state.theta2);
  for (const TimedRect& rect : rects) {
    if (rect.active_from <= 0.0 && rect.contains_point(start(0), start(1)))
      throw std::invalid_argument(
          "initial endpoint lies inside the t=0 unsafe region");
  }
}

bool contains(const Scenario& scenario, const Eigen::Vector2d& p, double t) {
  for (const TimedRect& rect : scenario.rects) {
    if (rect.active_from <= t && rect.contains_point(p(0), p(1))) return true;
  }
  return false;
}

LabeledSamples sample_offline(const Scenario& scenario) {
  std::mt19937_64 gen(derive_seed(scenario.seed, kOfflineStream));
  LabeledSamples out;
  out.points.resize(scenario.offline_sample_count, 2);
  out.labels.reserve(static_cast<std::size_t>(scenario.offline_sample_count));
  for (int i = 0; i < scenario.offline_sample_count; ++i) {
    const double x = uniform(gen, scenario.workspace_lo, scenario.workspace_hi);
    const double y = uniform(gen, scenario.workspace_lo, scenario.workspace_hi);
    out.points(i, 0) = x;
    out.points(i, 1) = y;
    out.labels.push_back(contains(scenario, {x, y}, 0.0)
                             ? SafetyLabel::Unsafe
                             : SafetyLabel::Safe);
  }
  return out;
}

LabeledSamples sample_region_delta(const Scenario& scenario,
                                   double event_time) {
  std::vector<const TimedRect*> fresh;
  double total_area = 0.0;
  for (const TimedRect& rect : scenario.rects) {
    if (rect.active_from == event_time) {
      fresh.push_back(&rect);
      total_area += rect.area();
    }
  }
  if (fresh.empty())
    throw std::invalid_argument("no rectangle activates at t = " +
                                std::to_string(event_time));

  std::mt19937_64 gen(derive_seed(derive_seed(scenario.seed, kDeltaStream),
                                  std::bit_cast<std::uint64_t>(event_time)));
  LabeledSamples out;
  out.points.resize(scenario.online_sample_count, 2);
  out.labels.assign(static_cast<std::size_t>(scenario.online_sample_count),
                    SafetyLabel::Unsafe);

  // Uniform over the union: pick a rectangle by area, then accept with
  // probability 1 / (number of fresh rectangles covering the point), which
  // cancels the overcounting of overlaps.
  int accepted = 0;
  while (accepted < scenario.online_sample_count) {
    double pick = uniform(gen, 0.0, total_area);
    const TimedRect* chosen = fresh.back();
    for (const TimedRect* rect : fresh) {
      if (pick < rect->area()) {
        chosen = rect;
        break;
      }
      pick -= rect->area();
    }
    const double x = uniform(gen, chosen->x_min, chosen->x_max);
    const double y = uniform(gen, chosen->y_min, chosen->y_max);
    int covering = 0;
    for (const TimedRect* rect : fresh) {
      if (rect->contains_point(x, y)) ++covering;
    }
    if (covering > 1 && uniform(gen, 0.0, 1.0) * covering >= 1.0) continue;
    out.points(accepted, 0) = x;
    out.points(accepted, 1) = y;
    ++accepted;
  }
  return out;
}

std::vector<double> activation_times(const Scenario& scenario) {
  std::vector<double> times;
  for (const TimedRect& rect : scenario.rects) {
    if (rect.active_from > 0.0) times.push_back(rect.active_from);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

Scenario scenario_from_keyfile(const KeyFile& file) {
  Scenario scenario;
  for (const KeySection& section : file.sections) {
    if (section.name == "workspace") {
      for (const KeyValue& kv : section.entries) {
        if (kv.key == "lo") scenario.workspace_lo = parse_real(file, kv);
        else if (kv.key == "hi") scenario.workspace_hi = parse_real(file, kv);
        else file.fail(kv.line, "unknown workspace key '" + kv.key + "'");
      }
    } else if (section.name == "target") {
      for (const KeyValue& kv : section.entries) {
        if (kv.key == "x") scenario.target(0) = parse_real(file, kv);
        else if (kv.key == "y") scenario.target(1) = parse_real(file, kv);
        else file.fail(kv.line, "unknown target key '" + kv.key + "'");
      }
    } else if (section.name == "initial") {
      for (const KeyValue& kv : section.entries) {
        if (kv.key == "theta1")
          scenario.initial_state.theta1 = parse_real(file, kv);
        else if (kv.key == "theta2")
          scenario.initial_state.theta2 = parse_real(file, kv);
        else if (kv.key == "omega1")
          scenario.initial_state.omega1 = parse_real(file, kv);
        else if (kv.key == "omega2")
          scenario.initial_state.omega2 = parse_real(file, kv);
        else file.fail(kv.line, "unknown initial key '" + kv.key + "'");
      }
    } else if (section.name == "rect") {
      TimedRect rect;
      bool have_x_min = false, have_x_max = false;
      bool have_y_min = false, have_y_max = false;
      for (const KeyValue& kv : section.entries) {
        if (kv.key == "x_min") { rect.x_min = parse_real(file, kv); have_x_min = true; }
        else if (kv.key == "x_max") { rect.x_max = parse_real(file, kv); have_x_max = true; }
        else if (kv.key == "y_min") { rect.y_min = parse_real(file, kv); have_y_min = true; }
        else if (kv.key == "y_max") { rect.y_max = parse_real(file, kv); have_y_max = true; }
        else if (kv.key == "active_from") rect.active_from = parse_real(file, kv);
        else file.fail(kv.line, "unknown rect key '" + kv.key + "'");
      }
      if (!have_x_min || !have_x_max || !have_y_min || !have_y_max)
        file.fail(section.line, "rect needs x_min, x_max, y_min, y_max");
      try {
        rect.validate();
      } catch (const std::invalid_argument& err) {
        file.fail(section.line, err.what());
      }
      scenario.rects.push_back(rect);
    } else if (section.name == "sampling") {
      for (const KeyValue& kv : section.entries) {
        if (kv.key == "offline_count")
          scenario.offline_sample_count =
              static_cast<int>(parse_integer(file, kv));
        else if (kv.key == "online_count")
          scenario.online_sample_count =
              static_cast<int>(parse_integer(file, kv));
        else if (kv.key == "seed") scenario.seed = parse_unsigned(file, kv);
        else file.fail(kv.line, "unknown sampling key '" + kv.key + "'");
      }
    }
    // Other sections belong to the tool config and are handled there.
  }
  try {
    scenario.validate();
  } catch (const std::invalid_argument& err) {
    throw std::runtime_error(file.source + ": " + err.what());
  }
  return scenario;
}

Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_keyfile(load_keyfile(path));
}

}  // namespace safelink
