#include "safelink/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "safelink/analysis.hpp"
#include "safelink/incremental.hpp"

namespace safelink {

void SimConfig::validate() const {
  scenario.validate();
  rvfl.validate();
  cost.validate();
  filter.validate();
  mpc.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(goal_tolerance > 0.0))
    throw std::invalid_argument("goal tolerance must be positive");
  if (!(max_time > 0.0)) throw std::invalid_argument("max_time must be positive");
}

SimLog run(const SimConfig& cfg) {
  cfg.validate();
  SimLog log;

  TrainedModel model =
      train(sample_offline(cfg.scenario), cfg.rvfl, cfg.cost);

  // Pending region activations, earliest first. Each fires once, on the
  // first control step at or past its time.
  std::vector<double> pending = activation_times(cfg.scenario);
  std::size_t next_event = 0;

  ManipulatorState state = cfg.scenario.initial_state;
  std::vector<ControlInput> warm;
  double min_b = std::numeric_limits<double>::infinity();
  long long k = 0;

  while (true) {
    const double t = static_cast<double>(k) * cfg.dt;
    std::string event_note;

    while (next_event < pending.size() && t >= pending[next_event] - 1e-9) {
      const double event_time = pending[next_event];
      ++next_event;
      const LabeledSamples delta =
          sample_region_delta(cfg.scenario, event_time);
      log.events.push_back(
          {t, "RegionExpand", 0.0, static_cast<int>(delta.count())});
      event_note = event_note.empty() ? "RegionExpand"
                                      : event_note + ";RegionExpand";
      if (cfg.updates_enabled) {
        const auto t0 = std::chrono::steady_clock::now();
        model = append_samples(model, {delta, {}});
        const auto t1 = std::chrono::steady_clock::now();
        log.events.push_back(
            {t, "ModelUpdate",
             std::chrono::duration<double, std::milli>(t1 - t0).count(),
             static_cast<int>(delta.count())});
        event_note += ";ModelUpdate";
      }
    }

    const Eigen::Vector2d endpoint =
        forward_kinematics(state.theta1, state.theta2);
    const double goal_error = (endpoint - cfg.scenario.target).norm();
    if (goal_error <= cfg.goal_tolerance) {
      log.summary.reached = true;
      log.summary.final_error_m = goal_error;
      break;
    }
    if (t > cfg.max_time) {
      log.summary.final_error_m = goal_error;
      break;
    }

    const ControlInput u_ref =
        mpc_reference(state, cfg.scenario.target, cfg.mpc, warm);

    const CbfEvaluation eval = cbf_evaluate(model, endpoint);
    const KinematicsDerivatives kin =
        kinematics_derivatives(state.theta1, state.theta2);
    const LiftedCbf lift = lift_cbf(eval, kin, state);

    LinearConstraintSet constraints;
    constraints.rows.push_back(hocbf_row(lift, cfg.filter));
    for (const ConstraintRow& row : velocity_rows(state, cfg.filter))
      constraints.rows.push_back(row);
    const QpResult qp = solve_qp(u_ref, constraints);

    StepRecord rec;
    rec.t = t;
    rec.theta1 = state.theta1;
    rec.theta2 = state.theta2;
    rec.omega1 = state.omega1;
    rec.omega2 = state.omega2;
    rec.x = endpoint(0);
    rec.y = endpoint(1);
    rec.u1 = qp.u_safe.u1;
    rec.u2 = qp.u_safe.u2;
    rec.u_ref1 = u_ref.u1;
    rec.u_ref2 = u_ref.u2;
    rec.b = lift.b;
    rec.psi1 = lift.lf_b + cfg.filter.alpha1_gain * lift.b;
    rec.qp_status = qp.status;
    rec.event = event_note;
    log.steps.push_back(std::move(rec));

    min_b = std::min(min_b, lift.b);
    if (contains(cfg.scenario, endpoint, t))
      ++log.summary.true_region_violations;

    state = step(state, qp.u_safe, cfg.dt);
    ++k;
  }

  log.summary.min_b = log.steps.empty() ? 0.0 : min_b;
  log.summary.total_steps = static_cast<std::int64_t>(log.steps.size());
  return log;
}

namespace {

SweepRow score_one(const SimConfig& cfg, double c1, std::uint64_t seed) {
  Scenario scenario = cfg.scenario;
  scenario.seed = seed;
  RvflConfig rvfl = cfg.rvfl;
  rvfl.seed = seed;
  const CostMatrix cost{c1, cfg.cost.c2};

  const LabeledSamples samples = sample_offline(scenario);
  const TrainedModel model = train(samples, rvfl, cost);

  SweepRow row;
  row.c1 = c1;
  row.seed = seed;
  for (Eigen::Index i = 0; i < samples.count(); ++i) {
    const SafetyLabel seen =
        classify(model, samples.points.row(i).transpose());
    const SafetyLabel truth = samples.labels[static_cast<std::size_t>(i)];
    if (truth == SafetyLabel::Unsafe && seen == SafetyLabel::Safe)
      ++row.n_unsafe_to_safe;
    if (truth == SafetyLabel::Safe && seen == SafetyLabel::Unsafe)
      ++row.n_safe_to_unsafe;
  }
  row.accuracy =
      1.0 - static_cast<double>(row.n_unsafe_to_safe + row.n_safe_to_unsafe) /
                static_cast<double>(samples.count());
  return row;
}

}  // namespace

std::vector<SweepRow> sweep_c1(const SimConfig& cfg,
                               const std::vector<double>& c1_values,
                               const std::vector<std::uint64_t>& seeds) {
  std::vector<SweepRow> rows;
  rows.reserve(c1_values.size() * seeds.size());
  for (const double c1 : c1_values) {
    std::vector<std::future<SweepRow>> futures;
    futures.reserve(seeds.size());
    for (const std::uint64_t seed : seeds) {
      futures.push_back(std::async(std::launch::async, score_one,
                                   std::cref(cfg), c1, seed));
    }
    for (std::future<SweepRow>& f : futures) rows.push_back(f.get());
  }
  return rows;
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* status_name(QpStatus status) {
  return status == QpStatus::Optimal ? "Optimal" : "Infeasible";
}

}  // namespace

void write_trajectory_csv(const SimLog& log, std::ostream& out) {
  out << "t,theta1,theta2,omega1,omega2,x,y,u1,u2,u_ref1,u_ref2,B,psi1,"
         "qp_status,event\n";
  for (const StepRecord& s : log.steps) {
    out << format_double(s.t) << ',' << format_double(s.theta1) << ','
        << format_double(s.theta2) << ',' << format_double(s.omega1) << ','
        << format_double(s.omega2) << ',' << format_double(s.x) << ','
        << format_double(s.y) << ',' << format_double(s.u1) << ','
        << format_double(s.u2) << ',' << format_double(s.u_ref1) << ','
        << format_double(s.u_ref2) << ',' << format_double(s.b) << ','
        << format_double(s.psi1) << ',' << status_name(s.qp_status) << ','
        << s.event << '\n';
  }
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "c1,seed,n_unsafe_to_safe,n_safe_to_unsafe,accuracy\n";
  for (const SweepRow& row : rows) {
    out << format_double(row.c1) << ',' << row.seed << ','
        << row.n_unsafe_to_safe << ',' << row.n_safe_to_unsafe << ','
        << format_double(row.accuracy) << '\n';
  }
}

std::string summary_to_json(const SimSummary& summary) {
  nlohmann::json j;
  j["reached"] = summary.reached;
  j["final_error_m"] = summary.final_error_m;
  j["min_B"] = summary.min_b;
  j["true_region_violations"] = summary.true_region_violations;
  j["total_steps"] = summary.total_steps;
  return j.dump(2) + "\n";
}

std::string events_to_json(const std::vector<EventRecord>& events) {
  nlohmann::json j = nlohmann::json::array();
  for (const EventRecord& e : events) {
    j.push_back({{"t", e.t},
                 {"kind", e.kind},
                 {"update_wall_ms", e.update_wall_ms},
                 {"delta_n", e.delta_n}});
  }
  return j.dump(2) + "\n";
}

}  // namespace safelink
