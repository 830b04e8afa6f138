#include "safelink/incremental.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "safelink/rng.hpp"

namespace safelink {

namespace {

constexpr int kRebaseInterval = 50;
constexpr double kRebaseDriftTol = 1e-6;

// Every kRebaseInterval updates, compare the running inverse against a fresh
// factorization of the exactly accumulated Gram matrix and re-base if the
// Woodbury chain has drifted.
void maybe_rebase(TrainedModel& model) {
  if (model.updates_since_rebase < kRebaseInterval) return;
  model.updates_since_rebase = 0;
  const Eigen::Index d = model.gram.rows();
  Eigen::LLT<Eigen::MatrixXd> llt(model.gram);
  if (llt.info() != Eigen::Success) return;  // keep the running cache
  Eigen::MatrixXd fresh = llt.solve(Eigen::MatrixXd::Identity(d, d));
  fresh = 0.5 * (fresh + fresh.transpose()).eval();
  const double drift =
      (model.k_cache - fresh).norm() / std::max(fresh.norm(), 1e-300);
  if (drift > kRebaseDriftTol) {
    model.k_cache = fresh;
    model.w_b = fresh * model.q_cache;
  }
}

}  // namespace

TrainedModel append_samples(const TrainedModel& model,
                            const UpdateBatch& batch) {
  batch.samples.validate(model.config.input_dim);
  if (batch.samples.count() == 0)
    throw std::invalid_argument("append batch must contain samples");

  const Eigen::MatrixXd da =
      build_design_matrix(batch.samples, model.layer, model.config);
  const Eigen::MatrixXd dt_priced =
      build_priced_label_matrix(batch.samples, model.cost);
  const Eigen::Index dn = da.rows();

  // u = K dA^T feeds both the inner system and the rank-dn correction.
  const Eigen::MatrixXd u = model.k_cache * da.transpose();
  Eigen::MatrixXd inner = Eigen::MatrixXd::Identity(dn, dn) + da * u;
  inner = 0.5 * (inner + inner.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(inner);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error(
        "batch update produced a degenerate inner system; split the batch");

  const Eigen::MatrixXd dk = u * llt.solve(u.transpose());
  const Eigen::MatrixXd dq = da.transpose() * dt_priced;

  TrainedModel out = model;
  out.k_cache = model.k_cache - dk;
  out.k_cache = 0.5 * (out.k_cache + out.k_cache.transpose()).eval();
  out.q_cache = model.q_cache + dq;
  out.w_b = model.w_b + model.k_cache * dq - dk * model.q_cache - dk * dq;

  Eigen::MatrixXd gram_lower = out.gram;
  gram_lower.selfadjointView<Eigen::Lower>().rankUpdate(da.transpose());
  out.gram = gram_lower.selfadjointView<Eigen::Lower>();

  for (Eigen::Index i = 0; i < dn; ++i) {
    if (batch.samples.labels[static_cast<std::size_t>(i)] ==
        SafetyLabel::Unsafe) {
      out.unsafe_feature_sum += da.row(i).transpose();
    }
  }
  out.sample_count += dn;
  out.updates_since_rebase += 1;
  maybe_rebase(out);
  return out;
}

TrainedModel update_cost(const TrainedModel& model, double delta_c1) {
  if (model.cost.c1 + delta_c1 < 0.0)
    throw std::invalid_argument("cost update would make c1 negative");
  if (delta_c1 == 0.0) return model;

  TrainedModel out = model;
  const Eigen::VectorXd influence = model.k_cache * model.unsafe_feature_sum;
  out.w_b.col(1) -= delta_c1 * influence;
  out.q_cache.col(1) -= delta_c1 * model.unsafe_feature_sum;
  out.cost.c1 += delta_c1;
  return out;
}

namespace {

// Synthetic benchmark data: uniform points with a circular unsafe pocket so
// both labels occur. Label geometry is irrelevant to the timings.
LabeledSamples synthetic_samples(int count, const RvflConfig& config,
                                 std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  LabeledSamples out;
  out.points.resize(count, config.input_dim);
  out.labels.reserve(static_cast<std::size_t>(count));
  const double half = config.input_scale;
  const double pocket = 0.3 * half;
  for (int i = 0; i < count; ++i) {
    double norm2 = 0.0;
    for (int j = 0; j < config.input_dim; ++j) {
      const double v = uniform(gen, -half, half);
      out.points(i, j) = v;
      const double centered = v - 0.25 * half;
      norm2 += centered * centered;
    }
    out.labels.push_back(norm2 <= pocket * pocket ? SafetyLabel::Unsafe
                                                  : SafetyLabel::Safe);
  }
  return out;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

UpdateBenchmarkReport benchmark_update(int n_offline, int delta_n,
                                       const std::vector<std::uint64_t>& seeds,
                                       const RvflConfig& config,
                                       const CostMatrix& cost) {
  if (delta_n < 1 || n_offline < delta_n)
    throw std::invalid_argument("need n_offline >= delta_n >= 1");
  if (seeds.empty()) throw std::invalid_argument("need at least one seed");

  using clock = std::chrono::steady_clock;
  UpdateBenchmarkReport report;
  report.n_offline = n_offline;
  report.delta_n = delta_n;
  report.seeds = seeds;

  std::vector<double> incremental_ms;
  std::vector<double> batch_ms;
  for (const std::uint64_t seed : seeds) {
    RvflConfig cfg = config;
    cfg.seed = seed;
    const LabeledSamples base =
        synthetic_samples(n_offline, cfg, derive_seed(seed, 11));
    const LabeledSamples extra =
        synthetic_samples(delta_n, cfg, derive_seed(seed, 12));
    const TrainedModel model = train(base, cfg, cost);

    const auto t0 = clock::now();
    const TrainedModel updated = append_samples(model, {extra, {}});
    const auto t1 = clock::now();

    LabeledSamples all;
    all.points.resize(base.count() + extra.count(), cfg.input_dim);
    all.points << base.points, extra.points;
    all.labels = base.labels;
    all.labels.insert(all.labels.end(), extra.labels.begin(),
                      extra.labels.end());

    const auto t2 = clock::now();
    const TrainedModel retrained = train(all, cfg, cost);
    const auto t3 = clock::now();

    // Touch both results so the compiler cannot drop either path.
    if (!updated.w_b.allFinite() || !retrained.w_b.allFinite())
      throw std::runtime_error("benchmark produced non-finite weights");

    incremental_ms.push_back(
        std::chrono::duration<double, std::milli>(t1 - t0).count());
    batch_ms.push_back(
        std::chrono::duration<double, std::milli>(t3 - t2).count());
  }

  report.median_incremental_ms = median(incremental_ms);
  report.median_batch_ms = median(batch_ms);
  report.speedup = report.median_batch_ms /
                   std::max(report.median_incremental_ms, 1e-9);
  return report;
}

std::string benchmark_report_to_json(const UpdateBenchmarkReport& report) {
  nlohmann::json j;
  j["n_offline"] = report.n_offline;
  j["delta_n"] = report.delta_n;
  j["median_incremental_ms"] = report.median_incremental_ms;
  j["median_batch_ms"] = report.median_batch_ms;
  j["speedup"] = report.speedup;
  j["seeds"] = report.seeds;
  return j.dump(2) + "\n";
}

}  // namespace safelink
