#include "safelink/analysis.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "safelink/rng.hpp"

namespace safelink {

namespace {

// Largest slopes of the scaled sigmoid and of its derivative: phi' peaks at
// s/4; phi'' peaks at s^2 sigma(1-sigma)(1-2 sigma) whose extremum over
// sigma is 1/(6 sqrt 3).
double activation_lipschitz(double s) { return s / 4.0; }
double activation_derivative_lipschitz(double s) {
  return s * s / (6.0 * std::sqrt(3.0));
}

void check_training_data(const TrainedModel& model,
                         const LabeledSamples& data) {
  data.validate(model.config.input_dim);
  if (data.count() != model.sample_count)
    throw std::invalid_argument(
        "training data does not match the model's sample count");
  const Eigen::MatrixXd a =
      build_design_matrix(data, model.layer, model.config);
  Eigen::VectorXd unsafe_sum =
      Eigen::VectorXd::Zero(model.config.extended_dim());
  for (Eigen::Index i = 0; i < data.count(); ++i) {
    if (data.labels[static_cast<std::size_t>(i)] == SafetyLabel::Unsafe)
      unsafe_sum += a.row(i).transpose();
  }
  const double scale = std::max(model.unsafe_feature_sum.norm(), 1.0);
  if ((unsafe_sum - model.unsafe_feature_sum).norm() > 1e-6 * scale)
    throw std::invalid_argument(
        "training data does not match the model's unsafe feature sum");
}

// Analytic constants only; the Monte-Carlo part lives in lipschitz_bound.
void analytic_lipschitz(const TrainedModel& model, double& l_b,
                        double& l_grad) {
  const int n = model.config.input_dim;
  const int m = model.config.enhancement_nodes();
  const double s = model.config.activation_scale;
  const double inv_scale = 1.0 / model.config.input_scale;
  const double l_phi = activation_lipschitz(s);
  const double l_dphi = activation_derivative_lipschitz(s);

  double value_sum = model.w_b.col(1).head(n).norm();
  double grad_sum = 0.0;
  for (int j = 0; j < m; ++j) {
    const double w_norm = model.layer.weights.col(j).norm();
    const double w_out = std::abs(model.w_b(n + j, 1));
    value_sum += l_phi * w_norm * w_out;
    grad_sum += l_dphi * w_norm * w_norm * w_out;
  }
  l_b = 2.0 * inv_scale * value_sum;
  l_grad = 2.0 * inv_scale * inv_scale * grad_sum;
}

}  // namespace

LipschitzReport lipschitz_bound(const TrainedModel& model, int pair_count,
                                std::uint64_t seed) {
  LipschitzReport report;
  analytic_lipschitz(model, report.l_b, report.l_grad);

  const int n = model.config.input_dim;
  const double half = model.config.input_scale;
  std::mt19937_64 gen(derive_seed(seed, 21));
  Eigen::VectorXd x(n), y(n);
  for (int i = 0; i < pair_count; ++i) {
    for (int j = 0; j < n; ++j) x(j) = uniform(gen, -half, half);
    for (int j = 0; j < n; ++j) y(j) = uniform(gen, -half, half);
    const double dist = (x - y).norm();
    if (dist < 1e-9) continue;
    const double ratio =
        std::abs(cbf_value(model, x) - cbf_value(model, y)) / dist;
    report.empirical_max_ratio = std::max(report.empirical_max_ratio, ratio);
  }
  return report;
}

std::vector<double> hat_row_unsafe_sum(const TrainedModel& model,
                                       const LabeledSamples& training_data) {
  check_training_data(model, training_data);
  // S_k = A_k . (K u_sum): one row of the hat matrix summed over unsafe
  // columns, with the N x N matrix never formed.
  const Eigen::VectorXd influence =
      model.k_cache * model.unsafe_feature_sum;
  std::vector<double> out;
  for (Eigen::Index i = 0; i < training_data.count(); ++i) {
    if (training_data.labels[static_cast<std::size_t>(i)] !=
        SafetyLabel::Unsafe)
      continue;
    const Eigen::VectorXd features = extend_features(
        training_data.points.row(i).transpose() / model.config.input_scale,
        model.layer, model.config);
    out.push_back(features.dot(influence));
  }
  return out;
}

CoverageReport coverage_radii(const TrainedModel& model,
                              const LabeledSamples& training_data,
                              int probes_per_ball, std::uint64_t seed) {
  check_training_data(model, training_data);
  double l_b = 0.0, l_grad_unused = 0.0;
  analytic_lipschitz(model, l_b, l_grad_unused);
  if (!(l_b > 0.0)) throw std::runtime_error("degenerate Lipschitz bound");

  const int n = model.config.input_dim;
  std::mt19937_64 gen(derive_seed(seed, 22));
  CoverageReport report;
  for (Eigen::Index i = 0; i < training_data.count(); ++i) {
    if (training_data.labels[static_cast<std::size_t>(i)] !=
        SafetyLabel::Unsafe)
      continue;
    const Eigen::VectorXd center = training_data.points.row(i).transpose();
    const double b = cbf_value(model, center);
    if (b >= 0.0) {
      report.radii.push_back(0.0);
      continue;
    }
    const double radius = std::abs(b) / l_b;
    report.radii.push_back(radius);
    Eigen::VectorXd offset(n);
    for (int probe = 0; probe < probes_per_ball; ++probe) {
      // Uniform in the ball by rejection from the enclosing cube.
      do {
        for (int j = 0; j < n; ++j) offset(j) = uniform(gen, -1.0, 1.0);
      } while (offset.squaredNorm() > 1.0);
      if (cbf_value(model, center + radius * offset) >= 0.0)
        ++report.violations;
    }
  }
  return report;
}

ConservativenessReport conservativeness_check(const TrainedModel& model,
                                              const Scenario& scenario,
                                              int probe_count, double at_time,
                                              std::uint64_t seed) {
  std::vector<const TimedRect*> active;
  double total_area = 0.0;
  for (const TimedRect& rect : scenario.rects) {
    if (rect.active_from <= at_time) {
      active.push_back(&rect);
      total_area += rect.area();
    }
  }
  ConservativenessReport report;
  if (active.empty()) return report;  // vacuously covered

  std::mt19937_64 gen(derive_seed(seed, 23));
  int accepted = 0;
  while (accepted < probe_count) {
    double pick = uniform(gen, 0.0, total_area);
    const TimedRect* chosen = active.back();
    for (const TimedRect* rect : active) {
      if (pick < rect->area()) {
        chosen = rect;
        break;
      }
      pick -= rect->area();
    }
    const double x = uniform(gen, chosen->x_min, chosen->x_max);
    const double y = uniform(gen, chosen->y_min, chosen->y_max);
    int covering = 0;
    for (const TimedRect* rect : active) {
      if (rect->contains_point(x, y)) ++covering;
    }
    if (covering > 1 && uniform(gen, 0.0, 1.0) * covering >= 1.0) continue;
    ++accepted;
    if (cbf_value(model, Eigen::Vector2d(x, y)) >= 0.0) {
      report.covered = false;
      report.miss_points.emplace_back(x, y);
    }
  }
  return report;
}

std::string lipschitz_report_to_json(const LipschitzReport& report) {
  nlohmann::json j;
  j["l_b"] = report.l_b;
  j["l_grad"] = report.l_grad;
  j["empirical_max_ratio"] = report.empirical_max_ratio;
  return j.dump(2) + "\n";
}

std::string coverage_report_to_json(const CoverageReport& report) {
  nlohmann::json j;
  j["radii"] = report.radii;
  j["violations"] = report.violations;
  return j.dump(2) + "\n";
}

std::string conservativeness_report_to_json(const ConservativenessReport& r) {
  nlohmann::json j;
  j["covered"] = r.covered;
  j["miss_points"] = nlohmann::json::array();
  for (const Eigen::Vector2d& p : r.miss_points)
    j["miss_points"].push_back({p(0), p(1)});
  return j.dump(2) + "\n";
}

}  // namespace safelink
