#include "safelink/safety_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace safelink {

void LinearConstraintSet::validate() const {
  if (!(box_lo.array() <= box_hi.array()).all())
    throw std::invalid_argument("constraint box is inverted");
  for (const ConstraintRow& row : rows) {
    if (!row.a.allFinite() || !std::isfinite(row.b))
      throw std::invalid_argument("constraint row is not finite");
  }
}

void FilterConfig::validate() const {
  if (!(alpha1_gain > 0.0) || !(alpha2_gain > 0.0))
    throw std::invalid_argument("class-K gains must be positive");
  if (!(velocity_limit > 0.0))
    throw std::invalid_argument("velocity limit must be positive");
}

ConstraintRow hocbf_row(const LiftedCbf& lift, const FilterConfig& cfg) {
  cfg.validate();
  const double k1 = cfg.alpha1_gain;
  const double k2 = cfg.alpha2_gain;
  ConstraintRow row;
  row.a = lift.lglf_b;
  row.b = -(lift.lf2_b + (k1 + k2) * lift.lf_b + k1 * k2 * lift.b);
  return row;
}

std::array<ConstraintRow, 4> velocity_rows(const ManipulatorState& state,
                                           const FilterConfig& cfg) {
  cfg.validate();
  const double limit = cfg.velocity_limit;
  std::array<ConstraintRow, 4> rows;
  rows[0].a << -1.0, 0.0;  // u1 <= limit - omega1
  rows[0].b = state.omega1 - limit;
  rows[1].a << 1.0, 0.0;   // u1 >= -limit - omega1
  rows[1].b = -limit - state.omega1;
  rows[2].a << 0.0, -1.0;
  rows[2].b = state.omega2 - limit;
  rows[3].a << 0.0, 1.0;
  rows[3].b = -limit - state.omega2;
  return rows;
}

namespace {

constexpr double kFeasTol = 1e-9;
constexpr double kSingularTol = 1e-12;

struct Row {
  Eigen::Vector2d a;
  double b;
};

// Rows plus the four box faces; active-set indices refer to this list, with
// the faces ordered u1 lower, u1 upper, u2 lower, u2 upper after the rows.
std::vector<Row> gather_rows(const LinearConstraintSet& c) {
  std::vector<Row> rows;
  rows.reserve(c.rows.size() + 4);
  for (const ConstraintRow& r : c.rows) rows.push_back({r.a, r.b});
  rows.push_back({{1.0, 0.0}, c.box_lo(0)});
  rows.push_back({{-1.0, 0.0}, -c.box_hi(0)});
  rows.push_back({{0.0, 1.0}, c.box_lo(1)});
  rows.push_back({{0.0, -1.0}, -c.box_hi(1)});
  return rows;
}

double violation(const Eigen::Vector2d& u, const Row& row) {
  return row.b - row.a.dot(u);  // positive when violated
}

bool feasible(const Eigen::Vector2d& u, const std::vector<Row>& rows) {
  for (const Row& row : rows) {
    if (violation(u, row) > kFeasTol) return false;
  }
  return true;
}

std::vector<int> tight_rows(const Eigen::Vector2d& u,
                            const std::vector<Row>& rows) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) {
    if (std::abs(violation(u, rows[i])) <= 10.0 * kFeasTol) out.push_back(i);
  }
  return out;
}

// Best feasible candidate among the reference, all single-row projections,
// and all pair vertices; nullopt when none of them is feasible.
std::optional<Eigen::Vector2d> enumerate_best(const Eigen::Vector2d& r,
                                              const std::vector<Row>& rows) {
  const int n = static_cast<int>(rows.size());
  double best = std::numeric_limits<double>::infinity();
  Eigen::Vector2d best_u;
  bool found = false;
  auto consider = [&](const Eigen::Vector2d& u) {
    if (!feasible(u, rows)) return;
    const double obj = (u - r).squaredNorm();
    if (obj < best - 1e-15) {
      best = obj;
      best_u = u;
      found = true;
    }
  };

  consider(r);
  for (int i = 0; i < n; ++i) {
    const Row& row = rows[static_cast<std::size_t>(i)];
    const double nn = row.a.squaredNorm();
    if (nn < kSingularTol) continue;
    consider(r + ((row.b - row.a.dot(r)) / nn) * row.a);
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      Eigen::Matrix2d m;
      m.row(0) = rows[static_cast<std::size_t>(i)].a;
      m.row(1) = rows[static_cast<std::size_t>(j)].a;
      if (std::abs(m.determinant()) < kSingularTol) continue;
      consider(m.partialPivLu().solve(
          Eigen::Vector2d(rows[static_cast<std::size_t>(i)].b,
                          rows[static_cast<std::size_t>(j)].b)));
    }
  }
  if (!found) return std::nullopt;
  return best_u;
}

// Minimizer of the largest row violation over the box, found by enumerating
// vertices of the epigraph polyhedron in (u1, u2, t). The polyhedron is
// pointed (the box pins u, t >= 0 pins t), so an optimal vertex exists.
// Among the points achieving that violation level, the one closest to the
// reference is returned.
QpResult least_violation_point(const Eigen::Vector2d& r,
                               const LinearConstraintSet& c) {
  struct Plane {
    Eigen::Vector3d n;
    double rhs;  // n . (u, t) >= rhs
  };
  std::vector<Plane> planes;
  for (const ConstraintRow& row : c.rows)
    planes.push_back({{row.a(0), row.a(1), 1.0}, row.b});
  planes.push_back({{1.0, 0.0, 0.0}, c.box_lo(0)});
  planes.push_back({{-1.0, 0.0, 0.0}, -c.box_hi(0)});
  planes.push_back({{0.0, 1.0, 0.0}, c.box_lo(1)});
  planes.push_back({{0.0, -1.0, 0.0}, -c.box_hi(1)});
  planes.push_back({{0.0, 0.0, 1.0}, 0.0});

  const int n = static_cast<int>(planes.size());
  double best_t = std::numeric_limits<double>::infinity();
  double best_dist = std::numeric_limits<double>::infinity();
  Eigen::Vector2d best_u = r;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int k = j + 1; k < n; ++k) {
        Eigen::Matrix3d m;
        m.row(0) = planes[i].n;
        m.row(1) = planes[j].n;
        m.row(2) = planes[k].n;
        if (std::abs(m.determinant()) < kSingularTol) continue;
        const Eigen::Vector3d rhs(planes[i].rhs, planes[j].rhs, planes[k].rhs);
        const Eigen::Vector3d x = m.partialPivLu().solve(rhs);
        bool ok = true;
        for (const Plane& p : planes) {
          if (p.n.dot(x) < p.rhs - 1e-7) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        const double dist = (x.head<2>() - r).norm();
        if (x(2) < best_t - 1e-12 ||
            (x(2) < best_t + 1e-12 && dist < best_dist)) {
          best_t = x(2);
          best_dist = dist;
          best_u = x.head<2>();
        }
      }
    }
  }

  // The optimum can be a whole face (a row parallel to a box edge, say), and
  // the vertex sweep only sees its corners. Re-solving with every row slack
  // by the optimal violation picks the face point nearest the reference.
  if (std::isfinite(best_t)) {
    LinearConstraintSet relaxed = c;
    const double margin =
        best_t + 1e-7 * std::max(1.0, std::abs(best_t)) + 1e-9;
    for (ConstraintRow& row : relaxed.rows) row.b -= margin;
    if (const auto u = enumerate_best(r, gather_rows(relaxed))) best_u = *u;
  }

  QpResult res;
  res.u_safe = {best_u(0), best_u(1)};
  res.status = QpStatus::Infeasible;
  return res;
}

// Equality-constrained minimizer of ||u - r||^2 over the working set.
// Returns false when the set is degenerate (parallel rows).
bool eqp_solve(const Eigen::Vector2d& r, const std::vector<Row>& rows,
               const std::vector<int>& w, Eigen::Vector2d& u_out) {
  if (w.empty()) {
    u_out = r;
    return true;
  }
  if (w.size() == 1) {
    const Row& row = rows[static_cast<std::size_t>(w[0])];
    const double nn = row.a.squaredNorm();
    if (nn < kSingularTol) return false;
    u_out = r + ((row.b - row.a.dot(r)) / nn) * row.a;
    return true;
  }
  const Row& r0 = rows[static_cast<std::size_t>(w[0])];
  const Row& r1 = rows[static_cast<std::size_t>(w[1])];
  Eigen::Matrix2d m;
  m.row(0) = r0.a;
  m.row(1) = r1.a;
  if (std::abs(m.determinant()) < kSingularTol) return false;
  u_out = m.partialPivLu().solve(Eigen::Vector2d(r0.b, r1.b));
  return true;
}

// Multipliers for u - r = sum lambda_i a_i over the working set.
bool eqp_multipliers(const Eigen::Vector2d& r, const Eigen::Vector2d& u,
                     const std::vector<Row>& rows, const std::vector<int>& w,
                     Eigen::Vector2d& lambda_out) {
  lambda_out.setZero();
  if (w.empty()) return true;
  if (w.size() == 1) {
    const Row& row = rows[static_cast<std::size_t>(w[0])];
    lambda_out(0) = row.a.dot(u - r) / row.a.squaredNorm();
    return true;
  }
  Eigen::Matrix2d at;
  at.col(0) = rows[static_cast<std::size_t>(w[0])].a;
  at.col(1) = rows[static_cast<std::size_t>(w[1])].a;
  if (std::abs(at.determinant()) < kSingularTol) return false;
  lambda_out = at.partialPivLu().solve(u - r);
  return true;
}

QpResult enumerate_impl(const Eigen::Vector2d& r,
                        const LinearConstraintSet& constraints) {
  const std::vector<Row> rows = gather_rows(constraints);
  const std::optional<Eigen::Vector2d> best = enumerate_best(r, rows);
  if (!best) return least_violation_point(r, constraints);
  QpResult res;
  res.u_safe = {(*best)(0), (*best)(1)};
  res.status = QpStatus::Optimal;
  res.active_set = tight_rows(*best, rows);
  return res;
}

}  // namespace

QpResult solve_qp_enumerated(const ControlInput& u_ref,
                             const LinearConstraintSet& constraints) {
  constraints.validate();
  return enumerate_impl({u_ref.u1, u_ref.u2}, constraints);
}

QpResult solve_qp(const ControlInput& u_ref,
                  const LinearConstraintSet& constraints) {
  constraints.validate();
  const Eigen::Vector2d r(u_ref.u1, u_ref.u2);
  const std::vector<Row> rows = gather_rows(constraints);
  const int n = static_cast<int>(rows.size());

  Eigen::Vector2d u;
  std::vector<int> w;
  if (feasible(r, rows)) {
    u = r;
  } else {
    // Phase 1: the feasible set is a polytope, so if it is nonempty some
    // single-row projection or pair vertex is feasible. Start from the one
    // closest to the reference.
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (int i = 0; i < n && !found; ++i) {
      // A lone feasible projection is rare but cheap to check first.
      const Row& row = rows[static_cast<std::size_t>(i)];
      const double nn = row.a.squaredNorm();
      if (nn < kSingularTol) continue;
      const Eigen::Vector2d cand = r + ((row.b - row.a.dot(r)) / nn) * row.a;
      if (feasible(cand, rows) && (cand - r).squaredNorm() < best) {
        best = (cand - r).squaredNorm();
        u = cand;
        w = {i};
        found = true;
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        Eigen::Matrix2d m;
        m.row(0) = rows[static_cast<std::size_t>(i)].a;
        m.row(1) = rows[static_cast<std::size_t>(j)].a;
        if (std::abs(m.determinant()) < kSingularTol) continue;
        const Eigen::Vector2d cand = m.partialPivLu().solve(
            Eigen::Vector2d(rows[static_cast<std::size_t>(i)].b,
                            rows[static_cast<std::size_t>(j)].b));
        if (feasible(cand, rows) && (cand - r).squaredNorm() < best) {
          best = (cand - r).squaredNorm();
          u = cand;
          w = {i, j};
          found = true;
        }
      }
    }
    if (!found) return least_violation_point(r, constraints);
  }

  for (int iter = 0; iter < 100; ++iter) {
    Eigen::Vector2d target;
    if (!eqp_solve(r, rows, w, target)) {
      w.pop_back();  // degenerate pair; retry with one constraint
      continue;
    }

    const Eigen::Vector2d d = target - u;
    if (d.norm() <= 1e-13) {
      Eigen::Vector2d lambda;
      if (!eqp_multipliers(r, u, rows, w, lambda)) {
        w.pop_back();
        continue;
      }
      int drop = -1;
      double most_negative = -1e-10;
      for (std::size_t i = 0; i < w.size(); ++i) {
        if (lambda(static_cast<Eigen::Index>(i)) < most_negative) {
          most_negative = lambda(static_cast<Eigen::Index>(i));
          drop = static_cast<int>(i);
        }
      }
      if (drop < 0) {
        QpResult res;
        res.u_safe = {u(0), u(1)};
        res.status = QpStatus::Optimal;
        std::sort(w.begin(), w.end());
        res.active_set = w;
        return res;
      }
      w.erase(w.begin() + drop);
      continue;
    }

    // Step toward the equality-constrained minimizer until a new row blocks.
    double alpha = 1.0;
    int blocking = -1;
    for (int i = 0; i < n; ++i) {
      if (std::find(w.begin(), w.end(), i) != w.end()) continue;
      const Row& row = rows[static_cast<std::size_t>(i)];
      const double ad = row.a.dot(d);
      if (ad >= -1e-14) continue;
      const double slack = row.a.dot(u) - row.b;
      const double step = std::max(slack, 0.0) / (-ad);
      if (step < alpha) {
        alpha = step;
        blocking = i;
      }
    }
    u += alpha * d;
    if (blocking >= 0) {
      w.push_back(blocking);
      if (w.size() > 2) w.erase(w.begin());  // cannot happen in 2-D; guard
    }
  }

  // The loop failing to settle means degeneracy cycling; the exhaustive
  // search is exact and fast at this size.
  return enumerate_impl(r, constraints);
}

}  // namespace safelink
