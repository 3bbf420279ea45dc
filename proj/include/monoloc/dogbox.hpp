#pragma once

// Bound-constrained nonlinear least squares with a rectangular trust region
// ("dogbox"): Powell's dogleg path intersected with the box formed by the
// trust region and the variable bounds. Variables sitting on a bound whose
// gradient pushes outward are removed from the step subspace.
//
// The objective is supplied through two callables:
//   cost(x)      -> double, may return +inf to reject a trial point;
//   linearize(x) -> Linearization with residuals r and Jacobian J such that
//                   the gradient of cost is J^T r and 0.5 |r + J p|^2 is the
//                   local quadratic model. For plain least squares
//                   cost = 0.5 |r|^2.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "monoloc/defaults.hpp"
#include "monoloc/errors.hpp"

namespace monoloc {

struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Box unbounded(Eigen::Index n) {
    const double inf = std::numeric_limits<double>::infinity();
    return {Eigen::VectorXd::Constant(n, -inf), Eigen::VectorXd::Constant(n, inf)};
  }

  bool contains(const Eigen::VectorXd& x) const {
    return ((x.array() >= lower.array()) && (x.array() <= upper.array())).all();
  }
};

struct Linearization {
  double cost = 0.0;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
};

struct DogboxOptions {
  double ftol = defaults::kFtol;
  double xtol = defaults::kXtol;
  double gtol = defaults::kGtol;
  int max_iterations = defaults::kMaxInnerIterations;  // trial steps
  double initial_trust_radius = 0.0;                   // <= 0: |x0|_inf, or 1
  bool record_trace = false;
};

enum class DogboxStatus { kGradientTolerance, kCostTolerance, kStepTolerance, kMaxIterations };

struct DogboxReport {
  Eigen::VectorXd x;
  double cost = 0.0;
  int iterations = 0;
  int accepted_steps = 0;
  DogboxStatus status = DogboxStatus::kMaxIterations;
  bool converged = false;
  // Filled when record_trace is set: cost and iterate after every accepted step
  // (the first entry is the starting point).
  std::vector<double> cost_trace;
  std::vector<Eigen::VectorXd> iterate_trace;
};

namespace detail {

// Largest t >= 0 such that x + t s stays inside [lb, ub], plus which bound is
// hit per component (-1 lower, +1 upper, 0 none).
inline double step_size_to_bound(const Eigen::VectorXd& x, const Eigen::VectorXd& s, const Eigen::VectorXd& lb,
                                 const Eigen::VectorXd& ub, Eigen::VectorXi* hits) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd steps = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (s[i] != 0.0) steps[i] = std::max((lb[i] - x[i]) / s[i], (ub[i] - x[i]) / s[i]);
  }
  const double min_step = steps.minCoeff();
  if (hits) {
    hits->setZero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (steps[i] == min_step && s[i] != 0.0) (*hits)[i] = s[i] > 0.0 ? 1 : -1;
    }
  }
  return min_step;
}

// argmin of a t^2 + b t over [lo, hi].
inline double minimize_quadratic_1d(double a, double b, double lo, double hi) {
  double best_t = lo;
  double best_y = a * lo * lo + b * lo;
  const auto consider = [&](double t) {
    const double y = a * t * t + b * t;
    if (y < best_y) {
      best_y = y;
      best_t = t;
    }
  };
  consider(hi);
  if (a != 0.0) {
    const double extremum = -0.5 * b / a;
    if (extremum > lo && extremum < hi) consider(extremum);
  }
  return best_t;
}

struct DoglegResult {
  Eigen::VectorXd step;
  Eigen::VectorXi bound_hits;  // variable-bound (not trust-region) hits
  bool trust_region_hit = false;
};

inline DoglegResult dogleg_step(const Eigen::VectorXd& x, const Eigen::VectorXd& newton_step,
                                const Eigen::VectorXd& g, double a, double b, double radius,
                                const Eigen::VectorXd& lb, const Eigen::VectorXd& ub) {
  const Eigen::Index n = x.size();
  const Eigen::VectorXd tr = Eigen::VectorXd::Constant(n, radius);
  const Eigen::VectorXd lb_total = (lb - x).cwiseMax(-tr);
  const Eigen::VectorXd ub_total = (ub - x).cwiseMin(tr);
  const Eigen::Array<bool, Eigen::Dynamic, 1> orig_l = (lb - x).array() >= -tr.array();
  const Eigen::Array<bool, Eigen::Dynamic, 1> orig_u = (ub - x).array() <= tr.array();

  DoglegResult out;
  out.bound_hits = Eigen::VectorXi::Zero(n);
  if ((newton_step.array() >= lb_total.array()).all() && (newton_step.array() <= ub_total.array()).all()) {
    out.step = newton_step;
    return out;
  }

  // Constrained Cauchy point along -g, then walk towards the Newton step until
  // the rectangular region is left.
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  const double to_bounds = step_size_to_bound(zero, -g, lb_total, ub_total, nullptr);
  const double t = std::isfinite(to_bounds) ? minimize_quadratic_1d(a, b, 0.0, to_bounds) : 0.0;
  const Eigen::VectorXd cauchy_step = -t * g;

  const Eigen::VectorXd step_diff = newton_step - cauchy_step;
  Eigen::VectorXi hits;
  double step_size = step_size_to_bound(cauchy_step, step_diff, lb_total, ub_total, &hits);
  if (!std::isfinite(step_size)) step_size = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (hits[i] < 0 && orig_l[i]) out.bound_hits[i] = -1;
    if (hits[i] > 0 && orig_u[i]) out.bound_hits[i] = 1;
    if ((hits[i] < 0 && !orig_l[i]) || (hits[i] > 0 && !orig_u[i])) out.trust_region_hit = true;
  }
  out.step = cauchy_step + step_size * step_diff;
  return out;
}

}  // namespace detail

/// Minimizes a bounded least-squares objective from x0. Iterates never leave
/// the box and accepted steps never increase the cost.
template <typename CostFn, typename LinearizeFn>
DogboxReport dogbox_minimize(CostFn&& cost_fn, LinearizeFn&& linearize_fn, Eigen::VectorXd x0, const Box& box,
                             const DogboxOptions& options = {}) {
  const Eigen::Index n = x0.size();
  if (box.lower.size() != n || box.upper.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "bounds dimension mismatch");
  }
  if (!(box.lower.array() < box.upper.array()).all()) {
    throw Error(ErrorCode::kInvalidArgument, "each lower bound must be below its upper bound");
  }
  if (!(options.ftol > 0.0 && options.xtol > 0.0 && options.gtol > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tolerances must be positive");
  }

  // Move the start strictly inside the box.
  for (Eigen::Index i = 0; i < n; ++i) {
    const double range = box.upper[i] - box.lower[i];
    const double margin = std::isfinite(range) ? 1e-9 * range : 0.0;
    x0[i] = std::clamp(x0[i], box.lower[i] + margin, box.upper[i] - margin);
  }

  const Eigen::VectorXd& lb = box.lower;
  const Eigen::VectorXd& ub = box.upper;
  Eigen::VectorXd x = x0;
  Eigen::VectorXi on_bound = Eigen::VectorXi::Zero(n);

  Linearization lin = linearize_fn(x);
  if (!std::isfinite(lin.cost)) {
    throw Error(ErrorCode::kInvalidArgument, "objective is not finite at the starting point");
  }
  double cost = lin.cost;
  Eigen::VectorXd g = lin.jacobian.transpose() * lin.residuals;

  double radius = options.initial_trust_radius > 0.0 ? options.initial_trust_radius : x0.lpNorm<Eigen::Infinity>();
  if (!(radius > 0.0) || !std::isfinite(radius)) radius = 1.0;

  DogboxReport report;
  if (options.record_trace) {
    report.cost_trace.push_back(cost);
    report.iterate_trace.push_back(x);
  }

  int trials = 0;
  bool done = false;
  while (!done) {
    // Active set: variables pinned at a bound whose gradient points outward.
    std::vector<Eigen::Index> free;
    Eigen::VectorXd g_projected = g;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool active = on_bound[i] * g[i] < 0.0;
      if (active) {
        g_projected[i] = 0.0;
      } else {
        free.push_back(i);
      }
    }
    if (g_projected.lpNorm<Eigen::Infinity>() < options.gtol) {
      report.status = DogboxStatus::kGradientTolerance;
      break;
    }
    if (trials >= options.max_iterations) {
      report.status = DogboxStatus::kMaxIterations;
      break;
    }

    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::VectorXd x_free(nf), lb_free(nf), ub_free(nf), g_free(nf);
    Eigen::MatrixXd j_free(lin.jacobian.rows(), nf);
    for (Eigen::Index k = 0; k < nf; ++k) {
      const Eigen::Index i = free[static_cast<std::size_t>(k)];
      x_free[k] = x[i];
      lb_free[k] = lb[i];
      ub_free[k] = ub[i];
      g_free[k] = g[i];
      j_free.col(k) = lin.jacobian.col(i);
    }

    // Gauss-Newton step. On rank deficiency fall back to the unconstrained
    // Cauchy point, which reduces the dogleg to steepest descent.
    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(j_free);
    const Eigen::VectorXd jg = j_free * g_free;
    const double a = 0.5 * jg.squaredNorm();
    const double b = -g_free.squaredNorm();
    const bool singular = cod.rank() < nf;
    Eigen::VectorXd newton_step;
    if (!singular) {
      newton_step = cod.solve(-lin.residuals);
    } else {
      const double curvature = jg.squaredNorm();
      const double t = curvature > 0.0 ? g_free.squaredNorm() / curvature : radius / g_free.norm();
      newton_step = -t * g_free;
    }

    bool accepted = false;
    Eigen::VectorXd x_new, step;
    Eigen::VectorXi on_bound_free;
    double cost_new = cost;
    while (!accepted) {
      if (trials >= options.max_iterations) {
        report.status = DogboxStatus::kMaxIterations;
        done = true;
        break;
      }
      ++trials;
      const detail::DoglegResult dl = detail::dogleg_step(x_free, newton_step, g_free, a, b, radius, lb_free, ub_free);
      on_bound_free = dl.bound_hits;
      step = Eigen::VectorXd::Zero(n);
      for (Eigen::Index k = 0; k < nf; ++k) step[free[static_cast<std::size_t>(k)]] = dl.step[k];

      x_new = (x + step).cwiseMax(lb).cwiseMin(ub);
      const double step_inf = step.lpNorm<Eigen::Infinity>();
      cost_new = cost_fn(x_new);
      if (!std::isfinite(cost_new)) {
        radius = 0.25 * step_inf;
        if (step.norm() < options.xtol * (options.xtol + x.norm())) {
          report.status = DogboxStatus::kStepTolerance;
          done = true;
          break;
        }
        continue;
      }

      const double actual = cost - cost_new;
      const double predicted = -(0.5 * (j_free * dl.step).squaredNorm() + g_free.dot(dl.step));
      double ratio = 0.0;
      if (predicted > 0.0) {
        ratio = actual / predicted;
      } else if (predicted == 0.0 && actual == 0.0) {
        ratio = 1.0;
      }
      if (ratio < 0.25) {
        radius = 0.25 * step_inf;
      } else if (ratio > 0.75 && dl.trust_region_hit) {
        radius *= 2.0;
      }

      accepted = actual > 0.0 && ratio > 1e-4;
      const bool ftol_hit = actual >= 0.0 && actual < options.ftol * cost && ratio > 0.25;
      const bool xtol_hit = step.norm() < options.xtol * (options.xtol + x.norm());
      if (ftol_hit || xtol_hit) {
        report.status = ftol_hit ? DogboxStatus::kCostTolerance : DogboxStatus::kStepTolerance;
        done = true;
        break;
      }
    }

    if (accepted) {
      for (Eigen::Index k = 0; k < nf; ++k) on_bound[free[static_cast<std::size_t>(k)]] = on_bound_free[k];
      x = x_new;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (on_bound[i] == -1) x[i] = lb[i];
        if (on_bound[i] == 1) x[i] = ub[i];
      }
      lin = linearize_fn(x);
      cost = lin.cost;
      g = lin.jacobian.transpose() * lin.residuals;
      ++report.accepted_steps;
      if (options.record_trace) {
        report.cost_trace.push_back(cost);
        report.iterate_trace.push_back(x);
      }
    } else if (singular && report.status == DogboxStatus::kStepTolerance) {
      throw Error(ErrorCode::kSingularNormalEquations, "no descent along the steepest-descent segment");
    }
  }

  report.x = x;
  report.cost = cost;
  report.iterations = trials;
  report.converged = report.status != DogboxStatus::kMaxIterations;
  return report;
}

/// Adapter for plain least squares: cost = 0.5 |r(x)|^2.
template <typename ResidualFn, typename JacobianFn>
DogboxReport least_squares(ResidualFn&& residual_fn, JacobianFn&& jacobian_fn, const Eigen::VectorXd& x0,
                           const Box& box, const DogboxOptions& options = {}) {
  const auto cost = [&](const Eigen::VectorXd& x) {
    const Eigen::VectorXd r = residual_fn(x);
    return r.allFinite() ? 0.5 * r.squaredNorm() : std::numeric_limits<double>::infinity();
  };
  const auto linearize = [&](const Eigen::VectorXd& x) {
    Linearization lin;
    lin.residuals = residual_fn(x);
    lin.jacobian = jacobian_fn(x);
    lin.cost = 0.5 * lin.residuals.squaredNorm();
    return lin;
  };
  return dogbox_minimize(cost, linearize, x0, box, options);
}

}  // namespace monoloc
