#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace safelink {

enum class SafetyLabel { Unsafe = 0, Safe = 1 };

/// Hyperparameters of the random-feature classifier. The enhancement layer
/// has `groups * nodes_per_group` sigmoid nodes whose input weights and
/// biases are drawn once, uniformly from [-init_range, init_range], and never
/// trained. Classifier inputs are divided by `input_scale` before feature
/// extension so the sigmoids operate in their responsive range; the scale is
/// part of the model and travels with it through serialization.
struct RvflConfig {
  int input_dim = 2;
  int groups = 10;
  int nodes_per_group = 10;
  double ridge = 1e-3;
  double activation_scale = 5.0;
  double init_range = 1.0;
  double input_scale = 15.0;
  std::uint64_t seed = 0;

  int enhancement_nodes() const { return groups * nodes_per_group; }
  int extended_dim() const { return input_dim + enhancement_nodes(); }
  void validate() const;
};

/// Fixed random projection: weights is input_dim x M, biases is 1 x M,
/// where M = groups * nodes_per_group.
struct EnhancementLayer {
  Eigen::MatrixXd weights;
  Eigen::RowVectorXd biases;
};

/// Asymmetric misclassification prices. c1 prices unsafe-predicted-safe
/// (the dangerous direction), c2 prices safe-predicted-unsafe.
struct CostMatrix {
  double c1 = 2.0;
  double c2 = 1.0;

  Eigen::Matrix2d materialize() const {
    Eigen::Matrix2d c;
    c << 0.0, c1, c2, 0.0;
    return c;
  }
  void validate() const;
};

struct LabeledSamples {
  Eigen::MatrixXd points;  // N x input_dim, workspace units
  std::vector<SafetyLabel> labels;

  Eigen::Index count() const { return points.rows(); }
  void validate(int input_dim) const;
};

/// Classifier state plus the caches that make exact incremental updates
/// possible: k_cache = (ridge*I + A^T A)^{-1}, q_cache = A^T Y (I - C),
/// gram = ridge*I + A^T A (kept so the inverse can be re-verified against a
/// fresh factorization without retaining raw samples), and the column sum of
/// unsafe extended features that drives cost re-pricing.
struct TrainedModel {
  RvflConfig config;
  EnhancementLayer layer;
  CostMatrix cost;
  Eigen::MatrixXd w_b;                 // extended_dim x 2
  Eigen::MatrixXd k_cache;             // extended_dim x extended_dim
  Eigen::MatrixXd gram;                // extended_dim x extended_dim
  Eigen::MatrixXd q_cache;             // extended_dim x 2
  Eigen::VectorXd unsafe_feature_sum;  // extended_dim
  std::int64_t sample_count = 0;
  std::int64_t updates_since_rebase = 0;
};

/// Barrier value with its first two workspace derivatives, all in
/// un-normalized (workspace) coordinates.
struct CbfEvaluation {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

EnhancementLayer init_enhancement(const RvflConfig& config);

/// Pure feature map: [x; sigmoid(activation_scale * (x^T weights + biases))].
/// No normalization happens here; callers scale x first.
Eigen::VectorXd extend_features(const Eigen::VectorXd& x,
                                const EnhancementLayer& layer,
                                const RvflConfig& config);

/// Ridge regression against one-hot labels with the asymmetric cost folded
/// into the target: W = (ridge*I + A^T A)^{-1} A^T Y (I - C).
TrainedModel train(const LabeledSamples& samples, const RvflConfig& config,
                   const CostMatrix& cost);

/// Row vector [unsafe_confidence, safe_confidence] at workspace point x.
Eigen::RowVector2d predict_confidence(const TrainedModel& model,
                                      const Eigen::VectorXd& x);

/// Barrier value 2 * safe_confidence - 1. Negative means unsafe.
double cbf_value(const TrainedModel& model, const Eigen::VectorXd& x);

Eigen::VectorXd cbf_gradient(const TrainedModel& model,
                             const Eigen::VectorXd& x);

Eigen::MatrixXd cbf_hessian(const TrainedModel& model,
                            const Eigen::VectorXd& x);

/// Value, gradient, and Hessian in one pass over the enhancement nodes.
CbfEvaluation cbf_evaluate(const TrainedModel& model, const Eigen::VectorXd& x);

/// Sign rule on the barrier: strictly negative is Unsafe, zero or positive
/// is Safe.
SafetyLabel classify(const TrainedModel& model, const Eigen::VectorXd& x);

// Shared with the incremental-update path; rows of the design matrix are
// extended features of input_scale-normalized points.
Eigen::MatrixXd build_design_matrix(const LabeledSamples& samples,
                                    const EnhancementLayer& layer,
                                    const RvflConfig& config);
Eigen::MatrixXd build_label_matrix(const LabeledSamples& samples);
Eigen::MatrixXd build_priced_label_matrix(const LabeledSamples& samples,
                                          const CostMatrix& cost);

}  // namespace safelink
