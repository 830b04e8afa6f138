#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "safelink/rvfl.hpp"

namespace safelink {

/// A batch of newly labeled samples to fold into an existing model.
/// wall_time_budget_s is advisory metadata carried through to reports; the
/// update is always run to completion because a partial update would break
/// the exactness guarantees.
struct UpdateBatch {
  LabeledSamples samples;
  std::optional<double> wall_time_budget_s;
};

/// Folds the batch into the model through the Woodbury identity:
///   dK = K dA^T (I + dA K dA^T)^{-1} dA K,  K' = K - dK,
///   dQ = dA^T dY (I - C),                   Q' = Q + dQ,
///   w' = w + K dQ - dK Q - dK dQ.
/// Cost is O(dN * d^2 + dN^3) for d extended features, never O(N).
/// After 50 such updates the inverse cache is checked against a fresh
/// factorization of the accumulated Gram matrix and re-based if it drifted.
TrainedModel append_samples(const TrainedModel& model,
                            const UpdateBatch& batch);

/// Re-prices all unsafe samples seen so far at c1 + delta_c1 without
/// touching K: w'.col(2) = w.col(2) - delta_c1 * K * unsafe_feature_sum.
TrainedModel update_cost(const TrainedModel& model, double delta_c1);

struct UpdateBenchmarkReport {
  int n_offline = 0;
  int delta_n = 0;
  double median_incremental_ms = 0.0;
  double median_batch_ms = 0.0;
  double speedup = 0.0;
  std::vector<std::uint64_t> seeds;
};

/// Times append_samples against a full retrain on n_offline + delta_n rows
/// of synthetic data, once per seed, and reports the medians.
UpdateBenchmarkReport benchmark_update(int n_offline, int delta_n,
                                       const std::vector<std::uint64_t>& seeds,
                                       const RvflConfig& config,
                                       const CostMatrix& cost);

std::string benchmark_report_to_json(const UpdateBenchmarkReport& report);

}  // namespace safelink
