#include "safelink/rvfl.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include "safelink/rng.hpp"

namespace safelink {

namespace {

double stable_sigmoid(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

void RvflConfig::validate() const {
  if (input_dim < 1) throw std::invalid_argument("input_dim must be positive");
  if (groups < 1 || nodes_per_group < 1)
    throw std::invalid_argument("enhancement layer must have at least one node");
  if (!(ridge > 0.0)) throw std::invalid_argument("ridge must be positive");
  if (!(activation_scale > 0.0))
    throw std::invalid_argument("activation_scale must be positive");
  if (!(init_range >= 0.0))
    throw std::invalid_argument("init_range must be nonnegative");
  if (!(input_scale > 0.0))
    throw std::invalid_argument("input_scale must be positive");
}

void CostMatrix::validate() const {
  if (!(c1 >= 0.0) || !(c2 >= 0.0))
    throw std::invalid_argument("misclassification costs must be nonnegative");
}

void LabeledSamples::validate(int input_dim) const {
  if (points.cols() != input_dim)
    throw std::invalid_argument("sample dimension " +
                                std::to_string(points.cols()) +
                                " does not match input_dim " +
                                std::to_string(input_dim));
  if (static_cast<Eigen::Index>(labels.size()) != points.rows())
    throw std::invalid_argument("label count does not match sample count");
}

EnhancementLayer init_enhancement(const RvflConfig& config) {
  config.validate();
  std::mt19937_64 gen(derive_seed(config.seed, 0));
  const int n = config.input_dim;
  const int m = config.enhancement_nodes();
  EnhancementLayer layer;
  layer.weights.resize(n, m);
  layer.biases.resize(m);
  // Column-major draw order (all weights of node j, then its bias) so the
  // layer for a given seed does not depend on matrix storage details.
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) {
      layer.weights(i, j) = uniform(gen, -config.init_range, config.init_range);
    }
    layer.biases(j) = uniform(gen, -config.init_range, config.init_range);
  }
  return layer;
}

Eigen::VectorXd extend_features(const Eigen::VectorXd& x,
                                const EnhancementLayer& layer,
                                const RvflConfig& config) {
  if (x.size() != layer.weights.rows())
    throw std::invalid_argument("input dimension does not match layer");
  const int m = static_cast<int>(layer.weights.cols());
  Eigen::VectorXd ext(x.size() + m);
  ext.head(x.size()) = x;
  const Eigen::RowVectorXd pre =
      x.transpose() * layer.weights + layer.biases;
  for (int j = 0; j < m; ++j) {
    ext(x.size() + j) = stable_sigmoid(config.activation_scale * pre(j));
  }
  return ext;
}

Eigen::MatrixXd build_design_matrix(const LabeledSamples& samples,
                                    const EnhancementLayer& layer,
                                    const RvflConfig& config) {
  samples.validate(config.input_dim);
  const Eigen::Index n_samples = samples.count();
  Eigen::MatrixXd a(n_samples, config.extended_dim());
  for (Eigen::Index i = 0; i < n_samples; ++i) {
    const Eigen::VectorXd scaled =
        samples.points.row(i).transpose() / config.input_scale;
    a.row(i) = extend_features(scaled, layer, config).transpose();
  }
  return a;
}

Eigen::MatrixXd build_label_matrix(const LabeledSamples& samples) {
  Eigen::MatrixXd y(samples.count(), 2);
  for (Eigen::Index i = 0; i < samples.count(); ++i) {
    const bool safe = samples.labels[static_cast<std::size_t>(i)] ==
                      SafetyLabel::Safe;
    y(i, 0) = safe ? 0.0 : 1.0;
    y(i, 1) = safe ? 1.0 : 0.0;
  }
  return y;
}

Eigen::MatrixXd build_priced_label_matrix(const LabeledSamples& samples,
                                          const CostMatrix& cost) {
  // Y (I - C) row by row: unsafe rows become [1, -c1], safe rows [-c2, 1].
  Eigen::MatrixXd t(samples.count(), 2);
  for (Eigen::Index i = 0; i < samples.count(); ++i) {
    const bool safe = samples.labels[static_cast<std::size_t>(i)] ==
                      SafetyLabel::Safe;
    if (safe) {
      t(i, 0) = -cost.c2;
      t(i, 1) = 1.0;
    } else {
      t(i, 0) = 1.0;
      t(i, 1) = -cost.c1;
    }
  }
  return t;
}

TrainedModel train(const LabeledSamples& samples, const RvflConfig& config,
                   const CostMatrix& cost) {
  config.validate();
  cost.validate();
  samples.validate(config.input_dim);
  if (samples.count() == 0)
    throw std::invalid_argument("cannot train on an empty sample set");

  TrainedModel model;
  model.config = config;
  model.cost = cost;
  model.layer = init_enhancement(config);

  const Eigen::MatrixXd a = build_design_matrix(samples, model.layer, config);
  const int d = config.extended_dim();

  Eigen::MatrixXd gram_lower =
      config.ridge * Eigen::MatrixXd::Identity(d, d);
  gram_lower.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  model.gram = gram_lower.selfadjointView<Eigen::Lower>();

  Eigen::LLT<Eigen::MatrixXd> llt(model.gram);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.gram,
                                                      Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    throw std::runtime_error(
        "normal equations failed to factorize; condition estimate " +
        std::to_string(hi / std::max(lo, 1e-300)));
  }
  model.k_cache = llt.solve(Eigen::MatrixXd::Identity(d, d));
  // Symmetrize so the cache stays exactly self-adjoint through updates.
  model.k_cache = 0.5 * (model.k_cache + model.k_cache.transpose()).eval();

  model.q_cache = a.transpose() * build_priced_label_matrix(samples, cost);
  model.w_b = model.k_cache * model.q_cache;

  model.unsafe_feature_sum = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < samples.count(); ++i) {
    if (samples.labels[static_cast<std::size_t>(i)] == SafetyLabel::Unsafe) {
      model.unsafe_feature_sum += a.row(i).transpose();
    }
  }
  model.sample_count = samples.count();
  return model;
}

namespace {

void check_query(const TrainedModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.config.input_dim)
    throw std::invalid_argument("query dimension does not match model");
}

}  // namespace

Eigen::RowVector2d predict_confidence(const TrainedModel& model,
                                      const Eigen::VectorXd& x) {
  check_query(model, x);
  const Eigen::VectorXd ext =
      extend_features(x / model.config.input_scale, model.layer, model.config);
  return (ext.transpose() * model.w_b).row(0);
}

double cbf_value(const TrainedModel& model, const Eigen::VectorXd& x) {
  return 2.0 * predict_confidence(model, x)(1) - 1.0;
}

CbfEvaluation cbf_evaluate(const TrainedModel& model,
                           const Eigen::VectorXd& x) {
  check_query(model, x);
  const int n = model.config.input_dim;
  const int m = model.config.enhancement_nodes();
  const double s = model.config.activation_scale;
  const double inv_scale = 1.0 / model.config.input_scale;
  const Eigen::VectorXd z = x * inv_scale;

  CbfEvaluation eval;
  eval.gradient = model.w_b.col(1).head(n);
  eval.hessian = Eigen::MatrixXd::Zero(n, n);
  double safe_conf = z.dot(model.w_b.col(1).head(n));

  const Eigen::RowVectorXd pre =
      z.transpose() * model.layer.weights + model.layer.biases;
  for (int j = 0; j < m; ++j) {
    const double sig = stable_sigmoid(s * pre(j));
    const double w_out = model.w_b(n + j, 1);
    safe_conf += sig * w_out;
    // d(sigmoid(s t))/dt = s sig (1 - sig); one more factor for the second
    // derivative. The enhancement weight column chains these into x-space.
    const double d1 = s * sig * (1.0 - sig);
    const double d2 = s * d1 * (1.0 - 2.0 * sig);
    const Eigen::VectorXd wj = model.layer.weights.col(j);
    eval.gradient += (w_out * d1) * wj;
    eval.hessian += (w_out * d2) * (wj * wj.transpose());
  }

  eval.value = 2.0 * safe_conf - 1.0;
  eval.gradient *= 2.0 * inv_scale;
  eval.hessian *= 2.0 * inv_scale * inv_scale;
  return eval;
}

Eigen::VectorXd cbf_gradient(const TrainedModel& model,
                             const Eigen::VectorXd& x) {
  return cbf_evaluate(model, x).gradient;
}

Eigen::MatrixXd cbf_hessian(const TrainedModel& model,
                            const Eigen::VectorXd& x) {
  return cbf_evaluate(model, x).hessian;
}

SafetyLabel classify(const TrainedModel& model, const Eigen::VectorXd& x) {
  return cbf_value(model, x) < 0.0 ? SafetyLabel::Unsafe : SafetyLabel::Safe;
}

}  // namespace safelink
