#include "CLI11.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "safelink/analysis.hpp"
#include "safelink/config.hpp"
#include "safelink/incremental.hpp"
#include "safelink/model_io.hpp"
#include "safelink/rng.hpp"
#include "safelink/sim.hpp"

namespace fs = std::filesystem;
using namespace safelink;

namespace {

// Exit codes: 0 success, 1 operational error (bad flags, unreadable config,
// I/O), 2 the command ran but its checks or goals were not met.
constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUnmet = 2;

struct GlobalOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> c1;
  std::optional<double> c2;
  std::string format = "csv";

  bool json() const { return format == "json"; }
};

// Flags override file values, file values override built-in defaults.
SimConfig resolve_config(const GlobalOptions& global) {
  SimConfig cfg = global.config_path.empty() ? SimConfig{}
                                             : load_config(global.config_path);
  if (global.seed) {
    cfg.scenario.seed = *global.seed;
    cfg.rvfl.seed = *global.seed;
  }
  if (global.c1) cfg.cost.c1 = *global.c1;
  if (global.c2) cfg.cost.c2 = *global.c2;
  return cfg;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("failed writing: " + path.string());
}

fs::path prepare_out_dir(const GlobalOptions& global) {
  const fs::path out(global.out_dir);
  fs::create_directories(out);
  return out;
}

int run_train(const GlobalOptions& global) {
  const SimConfig cfg = resolve_config(global);
  cfg.validate();
  const fs::path out = prepare_out_dir(global);
  fs::create_directories(out / "reports");

  const LabeledSamples offline = sample_offline(cfg.scenario);
  const TrainedModel model = train(offline, cfg.rvfl, cfg.cost);
  save_model(model, out / "model.bin");

  const LipschitzReport lipschitz = lipschitz_bound(model);
  const CoverageReport coverage = coverage_radii(model, offline);
  const ConservativenessReport conservativeness =
      conservativeness_check(model, cfg.scenario, 1000);

  write_text_file(out / "reports" / "lipschitz.json",
                  lipschitz_report_to_json(lipschitz));
  write_text_file(out / "reports" / "coverage.json",
                  coverage_report_to_json(coverage));
  write_text_file(out / "reports" / "conservativeness.json",
                  conservativeness_report_to_json(conservativeness));

  const bool slope_ok =
      lipschitz.empirical_max_ratio <= lipschitz.l_b * (1.0 + 1e-12);
  const bool coverage_ok = coverage.violations == 0;
  if (global.json()) {
    nlohmann::json j;
    j["model"] = (out / "model.bin").string();
    j["l_b"] = lipschitz.l_b;
    j["l_grad"] = lipschitz.l_grad;
    j["empirical_max_ratio"] = lipschitz.empirical_max_ratio;
    j["coverage_violations"] = coverage.violations;
    j["covered"] = conservativeness.covered;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "model: " << (out / "model.bin").string() << "\n"
              << "l_b: " << lipschitz.l_b
              << "  empirical: " << lipschitz.empirical_max_ratio << "\n"
              << "coverage violations: " << coverage.violations << "\n"
              << "unsafe region covered: "
              << (conservativeness.covered ? "yes" : "no") << "\n";
  }
  if (!conservativeness.covered)
    std::cerr << "warning: " << conservativeness.miss_points.size()
              << " probe(s) in the true unsafe region classify as safe\n";
  if (!slope_ok)
    std::cerr << "error: sampled slope exceeds the analytic bound\n";
  if (!coverage_ok)
    std::cerr << "error: certified coverage balls contain safe-classified "
                 "points\n";
  return (slope_ok && coverage_ok) ? kExitOk : kExitUnmet;
}

int run_simulate(const GlobalOptions& global, bool no_updates) {
  SimConfig cfg = resolve_config(global);
  if (no_updates) cfg.updates_enabled = false;
  const fs::path out = prepare_out_dir(global);

  const SimLog log = run(cfg);

  std::ofstream csv(out / "trajectory.csv", std::ios::binary);
  if (!csv)
    throw std::runtime_error("cannot open for writing: " +
                             (out / "trajectory.csv").string());
  write_trajectory_csv(log, csv);
  csv.flush();
  if (!csv)
    throw std::runtime_error("failed writing: " +
                             (out / "trajectory.csv").string());
  write_text_file(out / "summary.json", summary_to_json(log.summary));
  write_text_file(out / "events.json", events_to_json(log.events));

  if (global.json()) {
    std::cout << summary_to_json(log.summary);
  } else {
    std::cout << "reached,final_error_m,min_B,true_region_violations,"
                 "total_steps\n"
              << (log.summary.reached ? "true" : "false") << ','
              << log.summary.final_error_m << ',' << log.summary.min_b << ','
              << log.summary.true_region_violations << ','
              << log.summary.total_steps << "\n";
  }
  const bool ok =
      log.summary.reached && log.summary.true_region_violations == 0;
  return ok ? kExitOk : kExitUnmet;
}

int run_sweep(const GlobalOptions& global, const std::vector<double>& grid,
              const std::vector<std::uint64_t>& seeds) {
  if (grid.empty() || seeds.empty())
    throw std::invalid_argument("sweep needs a non-empty grid and seed list");
  const SimConfig cfg = resolve_config(global);
  const fs::path out = prepare_out_dir(global);

  const std::vector<SweepRow> rows = sweep_c1(cfg, grid, seeds);
  std::ostringstream table;
  write_sweep_csv(rows, table);
  write_text_file(out / "sweep.csv", table.str());

  if (global.json()) {
    nlohmann::json j = nlohmann::json::array();
    for (const SweepRow& row : rows) {
      j.push_back({{"c1", row.c1},
                   {"seed", row.seed},
                   {"n_unsafe_to_safe", row.n_unsafe_to_safe},
                   {"n_safe_to_unsafe", row.n_safe_to_unsafe},
                   {"accuracy", row.accuracy}});
    }
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << table.str();
  }
  return kExitOk;
}

int run_bench(const GlobalOptions& global, int n_offline, int delta_n,
              const std::vector<std::uint64_t>& seeds) {
  const SimConfig cfg = resolve_config(global);
  const fs::path out = prepare_out_dir(global);

  const UpdateBenchmarkReport report =
      benchmark_update(n_offline, delta_n, seeds, cfg.rvfl, cfg.cost);
  write_text_file(out / "bench.json", benchmark_report_to_json(report));

  if (global.json()) {
    std::cout << benchmark_report_to_json(report);
  } else {
    std::cout << "n_offline,delta_n,median_incremental_ms,median_batch_ms,"
                 "speedup\n"
              << report.n_offline << ',' << report.delta_n << ','
              << report.median_incremental_ms << ','
              << report.median_batch_ms << ',' << report.speedup << "\n";
  }
  return kExitOk;
}

LabeledSamples synthetic_samples(int count, double half, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  LabeledSamples data;
  data.points.resize(count, 2);
  data.labels.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    data.points(i, 0) = uniform(gen, -half, half);
    data.points(i, 1) = uniform(gen, -half, half);
    data.labels.push_back(i % 3 == 0 ? SafetyLabel::Unsafe
                                     : SafetyLabel::Safe);
  }
  return data;
}

struct CheckOutcome {
  bool pass = true;
  double worst = 0.0;

  void fold(double error, double tolerance) {
    worst = std::max(worst, error);
    if (error > tolerance) pass = false;
  }
};

int run_verify(const GlobalOptions& global) {
  const SimConfig cfg = resolve_config(global);
  RvflConfig rvfl = cfg.rvfl;
  const std::uint64_t root = rvfl.seed;
  int failures = 0;
  const auto report = [&](const char* name, const CheckOutcome& outcome) {
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " " << name
              << " (worst " << outcome.worst << ")\n";
    if (!outcome.pass) ++failures;
  };

  {
    // Central differences against the analytic derivatives.
    const LabeledSamples data =
        synthetic_samples(300, 12.0, derive_seed(root, 101));
    const TrainedModel model = train(data, rvfl, cfg.cost);
    std::mt19937_64 gen(derive_seed(root, 102));
    CheckOutcome grad_check, hess_check;
    const double h = 1e-4;
    for (int i = 0; i < 20; ++i) {
      Eigen::Vector2d x(uniform(gen, -12.0, 12.0), uniform(gen, -12.0, 12.0));
      const CbfEvaluation eval = cbf_evaluate(model, x);
      for (int j = 0; j < 2; ++j) {
        Eigen::Vector2d hi = x, lo = x;
        hi(j) += h;
        lo(j) -= h;
        const double fd =
            (cbf_value(model, hi) - cbf_value(model, lo)) / (2.0 * h);
        grad_check.fold(std::abs(eval.gradient(j) - fd) /
                            std::max(1.0, std::abs(fd)),
                        1e-5);
        const Eigen::VectorXd gd =
            (cbf_gradient(model, hi) - cbf_gradient(model, lo)) / (2.0 * h);
        for (int r = 0; r < 2; ++r)
          hess_check.fold(std::abs(eval.hessian(r, j) - gd(r)) /
                              std::max(1.0, std::abs(gd(r))),
                          1e-3);
      }
    }
    report("gradient finite differences", grad_check);
    report("hessian finite differences", hess_check);
  }

  {
    // Incremental append against a from-scratch retrain.
    const LabeledSamples base =
        synthetic_samples(500, 12.0, derive_seed(root, 103));
    const LabeledSamples extra =
        synthetic_samples(50, 12.0, derive_seed(root, 104));
    const TrainedModel incremental =
        append_samples(train(base, rvfl, cfg.cost), {extra, {}});

    LabeledSamples all;
    all.points.resize(base.count() + extra.count(), 2);
    all.points << base.points, extra.points;
    all.labels = base.labels;
    all.labels.insert(all.labels.end(), extra.labels.begin(),
                      extra.labels.end());
    const TrainedModel batch = train(all, rvfl, cfg.cost);

    CheckOutcome weights, probes;
    weights.fold((incremental.w_b - batch.w_b).norm() / batch.w_b.norm(),
                 1e-8);
    std::mt19937_64 gen(derive_seed(root, 105));
    for (int i = 0; i < 20; ++i) {
      Eigen::Vector2d x(uniform(gen, -12.0, 12.0), uniform(gen, -12.0, 12.0));
      probes.fold(std::abs(cbf_value(incremental, x) - cbf_value(batch, x)),
                  1e-7);
    }
    report("incremental update vs retrain", weights);
    report("incremental update probes", probes);

    // Cost re-pricing against a retrain at the shifted price.
    CostMatrix shifted = cfg.cost;
    shifted.c1 += 0.5;
    const TrainedModel repriced = update_cost(batch, 0.5);
    const TrainedModel reference = train(all, rvfl, shifted);
    CheckOutcome reprice;
    reprice.fold((repriced.w_b - reference.w_b).norm() /
                     std::max(1.0, reference.w_b.norm()),
                 1e-9);
    report("cost re-pricing vs retrain", reprice);
  }

  {
    // Active-set QP against exhaustive enumeration.
    std::mt19937_64 gen(derive_seed(root, 106));
    CheckOutcome objective;
    for (int i = 0; i < 500; ++i) {
      LinearConstraintSet constraints;
      const int rows = static_cast<int>(uniform(gen, 0.0, 4.999));
      for (int r = 0; r < rows; ++r) {
        ConstraintRow row;
        row.a = Eigen::Vector2d(uniform(gen, -1.0, 1.0),
                                uniform(gen, -1.0, 1.0));
        row.b = uniform(gen, -2.0, 2.0);
        constraints.rows.push_back(row);
      }
      const ControlInput r{uniform(gen, -3.0, 3.0), uniform(gen, -3.0, 3.0)};
      const QpResult fast = solve_qp(r, constraints);
      const QpResult exact = solve_qp_enumerated(r, constraints);
      if (fast.status != exact.status) {
        objective.fold(1.0, 1e-8);
        continue;
      }
      const auto cost = [&](const ControlInput& u) {
        return (u.u1 - r.u1) * (u.u1 - r.u1) + (u.u2 - r.u2) * (u.u2 - r.u2);
      };
      objective.fold(std::abs(cost(fast.u_safe) - cost(exact.u_safe)), 1e-8);
    }
    report("qp vs enumeration", objective);
  }

  return failures == 0 ? kExitOk : kExitUnmet;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Learned-barrier safety filtering for a two-link arm: train the "
      "classifier, run the filtered closed loop, and audit the guarantees."};
  app.require_subcommand(1);

  GlobalOptions global;
  std::vector<CLI::Option*> seed_opts, c1_opts, c2_opts;
  const auto add_global = [&](CLI::App* cmd) {
    cmd->add_option("--config", global.config_path,
                    "Configuration file (built-in defaults when omitted)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", global.out_dir,
                    "Output directory (created if missing)");
    seed_opts.push_back(cmd->add_option(
        "--seed", "Root seed override for the scenario and the classifier"));
    c1_opts.push_back(
        cmd->add_option("--c1", "Unsafe-predicted-safe price override"));
    c2_opts.push_back(
        cmd->add_option("--c2", "Safe-predicted-unsafe price override"));
    cmd->add_option("--format", global.format, "Stdout format")
        ->check(CLI::IsMember({"csv", "json"}));
  };

  CLI::App* train_cmd = app.add_subcommand(
      "train", "Train the classifier and write the model plus reports");
  add_global(train_cmd);

  bool no_updates = false;
  CLI::App* sim_cmd = app.add_subcommand(
      "simulate", "Run the filtered closed loop and write the logs");
  add_global(sim_cmd);
  sim_cmd->add_flag("--no-updates", no_updates,
                    "Disable incremental model updates (ablation)");

  std::vector<double> grid{0.5, 1.0, 1.5, 2.0};
  std::vector<std::uint64_t> sweep_seeds{1,  2,  3,  4,  5,  6,  7,
                                         8,  9,  10, 11, 12, 13, 14,
                                         15, 16, 17, 18, 19, 20};
  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep-c1", "Score training-set confusion across a grid of c1 values");
  add_global(sweep_cmd);
  sweep_cmd->add_option("--c1-grid", grid, "Comma-separated c1 values")
      ->delimiter(',');
  sweep_cmd->add_option("--seeds", sweep_seeds, "Comma-separated seeds")
      ->delimiter(',');

  int n_offline = 50000;
  int delta_n = 100;
  std::vector<std::uint64_t> bench_seeds{1, 2, 3, 4, 5};
  CLI::App* bench_cmd = app.add_subcommand(
      "bench-update", "Time the incremental update against a full retrain");
  add_global(bench_cmd);
  bench_cmd->add_option("--n-offline", n_offline, "Offline training rows")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--delta-n", delta_n, "Appended rows per update")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seeds", bench_seeds, "Comma-separated seeds")
      ->delimiter(',');

  CLI::App* verify_cmd = app.add_subcommand(
      "verify", "Cross-check the analytic paths against independent oracles");
  add_global(verify_cmd);

  CLI11_PARSE(app, argc, argv);

  // add_option above binds by name per subcommand; collect whichever parsed.
  for (CLI::Option* opt : seed_opts)
    if (opt->count() > 0) global.seed = opt->as<std::uint64_t>();
  for (CLI::Option* opt : c1_opts)
    if (opt->count() > 0) global.c1 = opt->as<double>();
  for (CLI::Option* opt : c2_opts)
    if (opt->count() > 0) global.c2 = opt->as<double>();

  try {
    if (train_cmd->parsed()) return run_train(global);
    if (sim_cmd->parsed()) return run_simulate(global, no_updates);
    if (sweep_cmd->parsed()) return run_sweep(global, grid, sweep_seeds);
    if (bench_cmd->parsed())
      return run_bench(global, n_offline, delta_n, bench_seeds);
    if (verify_cmd->parsed()) return run_verify(global);
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
