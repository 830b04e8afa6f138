#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "safelink/config.hpp"
#include "safelink/sim.hpp"

using namespace safelink;

namespace {

// Small closed-loop setup: one obstacle tucked in a corner the arm never
// visits, so the offline labels are non-degenerate but the path is free.
SimConfig free_path_config() {
  SimConfig cfg;
  cfg.scenario.rects.push_back(TimedRect{11.0, 13.0, -13.0, -11.0, 0.0});
  cfg.scenario.target = Eigen::Vector2d(4.24, 6.6);
  cfg.scenario.offline_sample_count = 600;
  cfg.scenario.seed = 3;
  cfg.rvfl.seed = 3;
  cfg.max_time = 20.0;
  return cfg;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) fields.push_back(field);
  if (!line.empty() && line.back() == sep) fields.push_back("");
  return fields;
}

double parse17(const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  REQUIRE(end == text.c_str() + text.size());
  return v;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("configuration validation covers the loop parameters") {
  SimConfig cfg = free_path_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.dt = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = free_path_config();
  cfg.goal_tolerance = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = free_path_config();
  cfg.max_time = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("a free path reaches the goal and the filter stays out of the way") {
  SimConfig cfg = free_path_config();
  // No obstacles at all: the trained barrier is flat and positive, and the
  // raised velocity limit keeps the remaining rows slack too.
  cfg.scenario.rects.clear();
  cfg.filter.velocity_limit = 10.0;
  const SimLog log = run(cfg);

  CHECK(log.summary.reached);
  CHECK(log.summary.final_error_m <= cfg.goal_tolerance);
  CHECK(log.summary.true_region_violations == 0);
  CHECK(log.summary.total_steps ==
        static_cast<std::int64_t>(log.steps.size()));
  CHECK(log.events.empty());
  REQUIRE(!log.steps.empty());

  CHECK(log.steps.front().theta1 == cfg.scenario.initial_state.theta1);
  CHECK(log.steps.front().theta2 == cfg.scenario.initial_state.theta2);
  CHECK(log.steps.front().omega1 == cfg.scenario.initial_state.omega1);
  CHECK(log.steps.front().omega2 == cfg.scenario.initial_state.omega2);

  double min_b = log.steps.front().b;
  for (std::size_t k = 0; k < log.steps.size(); ++k) {
    const StepRecord& rec = log.steps[k];
    CHECK(rec.t == static_cast<double>(k) * cfg.dt);
    const Eigen::Vector2d p = forward_kinematics(rec.theta1, rec.theta2);
    CHECK(rec.x == p(0));
    CHECK(rec.y == p(1));
    CHECK(std::abs(rec.u1) <= kInputLimit);
    CHECK(std::abs(rec.u2) <= kInputLimit);
    CHECK(rec.qp_status == QpStatus::Optimal);
    CHECK(rec.u1 == rec.u_ref1);
    CHECK(rec.u2 == rec.u_ref2);
    CHECK(rec.event.empty());
    min_b = std::min(min_b, rec.b);
    if (k + 1 < log.steps.size()) {
      const ManipulatorState next =
          step({rec.theta1, rec.theta2, rec.omega1, rec.omega2},
               {rec.u1, rec.u2}, cfg.dt);
      CHECK(log.steps[k + 1].theta1 == next.theta1);
      CHECK(log.steps[k + 1].theta2 == next.theta2);
      CHECK(log.steps[k + 1].omega1 == next.omega1);
      CHECK(log.steps[k + 1].omega2 == next.omega2);
    }
  }
  CHECK(log.summary.min_b == min_b);
}

TEST_CASE("the default velocity limit is enforced along the run") {
  SimConfig cfg = free_path_config();
  const SimLog log = run(cfg);
  CHECK(log.summary.reached);
  for (const StepRecord& rec : log.steps) {
    CHECK(std::abs(rec.omega1) <= cfg.filter.velocity_limit + 1e-9);
    CHECK(std::abs(rec.omega2) <= cfg.filter.velocity_limit + 1e-9);
    CHECK(std::abs(rec.u1) <= kInputLimit);
    CHECK(std::abs(rec.u2) <= kInputLimit);
  }
}

TEST_CASE("an immediately satisfied goal ends the run before any step") {
  SimConfig cfg = free_path_config();
  cfg.scenario.target = forward_kinematics(0.0, 0.0);
  const SimLog log = run(cfg);
  CHECK(log.summary.reached);
  CHECK(log.summary.total_steps == 0);
  CHECK(log.summary.final_error_m == 0.0);
  CHECK(log.summary.min_b == 0.0);
  CHECK(log.steps.empty());
}

TEST_CASE("the clock runs out one step past max_time") {
  SimConfig cfg = free_path_config();
  cfg.max_time = 0.26;
  const SimLog log = run(cfg);
  CHECK_FALSE(log.summary.reached);
  CHECK(log.summary.total_steps == 6);
  CHECK(log.summary.final_error_m > cfg.goal_tolerance);
}

TEST_CASE("a mid-run activation is logged, counted, and learned from") {
  const SimConfig base = free_path_config();
  const SimLog clean = run(base);
  REQUIRE(clean.summary.reached);
  REQUIRE(clean.steps.size() > 30);

  // Drop a small obstacle onto the trajectory half a second before the
  // endpoint gets there.
  const StepRecord& hit = clean.steps[20];
  TimedRect rect{hit.x - 0.35, hit.x + 0.35, hit.y - 0.35, hit.y + 0.35, 0.5};

  SimConfig blind = base;
  blind.scenario.rects.push_back(rect);
  blind.updates_enabled = false;
  const SimLog ablated = run(blind);

  // Without updates the offline model is identical, so the whole input
  // sequence replays and the arm drives straight through the new region.
  REQUIRE(ablated.steps.size() >= clean.steps.size());
  for (std::size_t k = 0; k < clean.steps.size(); ++k) {
    CHECK(ablated.steps[k].u1 == clean.steps[k].u1);
    CHECK(ablated.steps[k].u2 == clean.steps[k].u2);
  }
  CHECK(ablated.summary.true_region_violations >= 1);
  REQUIRE(ablated.events.size() == 1);
  CHECK(ablated.events[0].kind == "RegionExpand");
  CHECK(ablated.events[0].t == 0.5);
  CHECK(ablated.events[0].delta_n == base.scenario.online_sample_count);
  CHECK(ablated.steps[10].event == "RegionExpand");

  SimConfig aware = blind;
  aware.updates_enabled = true;
  const SimLog updated = run(aware);

  REQUIRE(updated.events.size() == 2);
  CHECK(updated.events[0].kind == "RegionExpand");
  CHECK(updated.events[1].kind == "ModelUpdate");
  CHECK(updated.events[1].t == 0.5);
  CHECK(updated.events[1].update_wall_ms > 0.0);
  CHECK(updated.events[1].delta_n == base.scenario.online_sample_count);
  CHECK(updated.steps[10].event == "RegionExpand;ModelUpdate");

  // Identical prefix until the event, divergence afterwards, fewer hits.
  for (std::size_t k = 0; k < 10; ++k) {
    CHECK(updated.steps[k].u1 == clean.steps[k].u1);
    CHECK(updated.steps[k].u2 == clean.steps[k].u2);
  }
  bool diverged = false;
  for (std::size_t k = 10; k < std::min(updated.steps.size(),
                                        clean.steps.size());
       ++k) {
    if (updated.steps[k].u1 != clean.steps[k].u1 ||
        updated.steps[k].u2 != clean.steps[k].u2) {
      diverged = true;
      break;
    }
  }
  CHECK(diverged);
  CHECK(updated.summary.true_region_violations <
        ablated.summary.true_region_violations);
}

TEST_CASE("trajectory csv round-trips every field") {
  SimConfig cfg = free_path_config();
  cfg.scenario.rects.push_back(TimedRect{2.0, 2.5, 2.0, 2.5, 0.5});
  cfg.max_time = 2.0;
  const SimLog log = run(cfg);
  REQUIRE(!log.steps.empty());

  std::ostringstream out;
  write_trajectory_csv(log, out);
  std::istringstream in(out.str());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line ==
        "t,theta1,theta2,omega1,omega2,x,y,u1,u2,u_ref1,u_ref2,B,psi1,"
        "qp_status,event");

  std::size_t k = 0;
  while (std::getline(in, line)) {
    REQUIRE(k < log.steps.size());
    const std::vector<std::string> f = split(line, ',');
    REQUIRE(f.size() == 15);
    const StepRecord& rec = log.steps[k];
    CHECK(parse17(f[0]) == rec.t);
    CHECK(parse17(f[1]) == rec.theta1);
    CHECK(parse17(f[2]) == rec.theta2);
    CHECK(parse17(f[3]) == rec.omega1);
    CHECK(parse17(f[4]) == rec.omega2);
    CHECK(parse17(f[5]) == rec.x);
    CHECK(parse17(f[6]) == rec.y);
    CHECK(parse17(f[7]) == rec.u1);
    CHECK(parse17(f[8]) == rec.u2);
    CHECK(parse17(f[9]) == rec.u_ref1);
    CHECK(parse17(f[10]) == rec.u_ref2);
    CHECK(parse17(f[11]) == rec.b);
    CHECK(parse17(f[12]) == rec.psi1);
    CHECK(f[13] == (rec.qp_status == QpStatus::Optimal ? "Optimal"
                                                       : "Infeasible"));
    CHECK(f[14] == rec.event);
    ++k;
  }
  CHECK(k == log.steps.size());
  const auto pos = out.str().find(",RegionExpand");
  CHECK(pos != std::string::npos);
}

TEST_CASE("summary and event logs serialize to json verbatim") {
  SimSummary summary;
  summary.reached = true;
  summary.final_error_m = 0.0625;
  summary.min_b = -0.25;
  summary.true_region_violations = 2;
  summary.total_steps = 41;
  const nlohmann::json sj = nlohmann::json::parse(summary_to_json(summary));
  CHECK(sj.at("reached").get<bool>());
  CHECK(sj.at("final_error_m").get<double>() == 0.0625);
  CHECK(sj.at("min_B").get<double>() == -0.25);
  CHECK(sj.at("true_region_violations").get<std::int64_t>() == 2);
  CHECK(sj.at("total_steps").get<std::int64_t>() == 41);

  std::vector<EventRecord> events;
  events.push_back({0.5, "RegionExpand", 0.0, 100});
  events.push_back({0.5, "ModelUpdate", 1.5, 100});
  const nlohmann::json ej = nlohmann::json::parse(events_to_json(events));
  REQUIRE(ej.size() == 2);
  CHECK(ej[0].at("kind").get<std::string>() == "RegionExpand");
  CHECK(ej[1].at("kind").get<std::string>() == "ModelUpdate");
  CHECK(ej[1].at("update_wall_ms").get<double>() == 1.5);
  CHECK(ej[0].at("t").get<double>() == 0.5);
  CHECK(ej[0].at("delta_n").get<int>() == 100);
}

TEST_CASE("the cost sweep scores every (c1, seed) pair in grid order") {
  SimConfig cfg;
  cfg.scenario.rects.push_back(TimedRect{2.0, 6.0, 2.0, 6.0, 0.0});
  cfg.scenario.offline_sample_count = 400;
  const std::vector<double> grid{0.5, 2.0};
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const std::vector<SweepRow> rows = sweep_c1(cfg, grid, seeds);
  REQUIRE(rows.size() == 6);

  int missed_cheap = 0, missed_priced = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const SweepRow& row = rows[i];
    CHECK(row.c1 == grid[i / seeds.size()]);
    CHECK(row.seed == seeds[i % seeds.size()]);

    Scenario scenario = cfg.scenario;
    scenario.seed = row.seed;
    RvflConfig rvfl = cfg.rvfl;
    rvfl.seed = row.seed;
    const LabeledSamples samples = sample_offline(scenario);
    const TrainedModel model =
        train(samples, rvfl, CostMatrix{row.c1, cfg.cost.c2});
    int unsafe_to_safe = 0, safe_to_unsafe = 0;
    for (Eigen::Index j = 0; j < samples.count(); ++j) {
      const SafetyLabel truth = samples.labels[static_cast<std::size_t>(j)];
      const SafetyLabel seen =
          classify(model, samples.points.row(j).transpose());
      if (truth == SafetyLabel::Unsafe && seen == SafetyLabel::Safe)
        ++unsafe_to_safe;
      if (truth == SafetyLabel::Safe && seen == SafetyLabel::Unsafe)
        ++safe_to_unsafe;
    }
    CHECK(row.n_unsafe_to_safe == unsafe_to_safe);
    CHECK(row.n_safe_to_unsafe == safe_to_unsafe);
    CHECK(row.accuracy ==
          1.0 - static_cast<double>(unsafe_to_safe + safe_to_unsafe) / 400.0);
    if (row.c1 == 0.5)
      missed_cheap += row.n_unsafe_to_safe;
    else
      missed_priced += row.n_unsafe_to_safe;
  }
  CHECK(missed_priced <= missed_cheap);

  std::ostringstream out;
  write_sweep_csv(rows, out);
  std::istringstream in(out.str());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "c1,seed,n_unsafe_to_safe,n_safe_to_unsafe,accuracy");
  std::size_t k = 0;
  while (std::getline(in, line)) {
    REQUIRE(k < rows.size());
    const std::vector<std::string> f = split(line, ',');
    REQUIRE(f.size() == 5);
    CHECK(parse17(f[0]) == rows[k].c1);
    CHECK(std::stoull(f[1]) == rows[k].seed);
    CHECK(std::stoi(f[2]) == rows[k].n_unsafe_to_safe);
    CHECK(std::stoi(f[3]) == rows[k].n_safe_to_unsafe);
    CHECK(parse17(f[4]) == rows[k].accuracy);
    ++k;
  }
  CHECK(k == rows.size());
}

TEST_CASE("the shipped configuration wires a full simulation setup") {
  const SimConfig cfg = load_config(SAFELINK_DEFAULT_CONFIG);
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.dt == 0.05);
  CHECK(cfg.max_time == 30.0);
  CHECK(cfg.goal_tolerance == 0.1);
  CHECK(cfg.updates_enabled);
  CHECK(cfg.mpc.dt == cfg.dt);
}

}  // TEST_SUITE
