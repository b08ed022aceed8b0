// Copyright 2026 The dpmorse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Gradient system of a Gaussian mixture density p.
//
// The Morse function is f = -ln p, so density modes are the stable
// equilibria (index 0) and saddles between two modes have index 1. The flow
// integrated here is dx/dt = grad ln p(x) = -sum_k w_k(x) P_k (x - mu_k), with
// w_k(x) the posterior component weights and P_k the precision matrices; the
// Riemannian metric is the identity. Equilibrium locations and indices do not
// depend on the metric, which the optional `metric` hooks let tests confirm.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "dpmorse/mixture.hpp"

namespace dpmorse {

/// Hyperbolicity threshold on |eigenvalue| of the Hessian of f.
inline constexpr double kHessTol = 1e-8;

/// A mixture viewed as a landscape f = -ln p. Immutable; safe to share.
class Landscape {
 public:
  Landscape() = default;
  explicit Landscape(MixtureModel model) : model_(std::move(model)) {}

  const MixtureModel& model() const { return model_; }
  Eigen::Index dim() const { return model_.dim(); }
  Eigen::Index components() const { return model_.components(); }

 private:
  MixtureModel model_;
};

inline double log_density(const Landscape& land, const Eigen::VectorXd& x) {
  return log_sum_exp(land.model().weighted_log_densities(x));
}

/// Posterior weights w_k(x); the same quantity as the E-step responsibilities.
inline Eigen::VectorXd mixture_weights_at(const Landscape& land, const Eigen::VectorXd& x) {
  return responsibilities(land.model(), x);
}

inline Eigen::VectorXd grad_log_density(const Landscape& land, const Eigen::VectorXd& x) {
  const MixtureModel& m = land.model();
  const Eigen::VectorXd w = mixture_weights_at(land, x);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m.dim());
  for (Eigen::Index k = 0; k < m.components(); ++k) {
    g.noalias() -= w(k) * (m.precision(k) * (x - m.mean(k)));
  }
  return g;
}

/// Analytic Hessian of ln p:
///   sum_k w_k (P_k d_k d_k^T P_k - P_k) - g g^T,  d_k = x - mu_k, g = grad ln p.
inline Eigen::MatrixXd hessian_log_density(const Landscape& land, const Eigen::VectorXd& x) {
  const MixtureModel& m = land.model();
  const Eigen::VectorXd w = mixture_weights_at(land, x);
  const Eigen::Index dim = m.dim();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
  for (Eigen::Index k = 0; k < m.components(); ++k) {
    const Eigen::VectorXd gk = -(m.precision(k) * (x - m.mean(k)));
    h.noalias() += w(k) * (gk * gk.transpose() - m.precision(k));
    g.noalias() += w(k) * gk;
  }
  h.noalias() -= g * g.transpose();
  // Exact symmetry: every term above is symmetric up to rounding.
  return 0.5 * (h + h.transpose());
}

/// ln p(x + delta) - ln p(x), computed from per-component increments so that
/// it stays accurate when the change is far below the rounding error of ln p.
inline double log_density_increment(const Landscape& land, const Eigen::VectorXd& x,
                                    const Eigen::VectorXd& delta) {
  const MixtureModel& m = land.model();
  const Eigen::VectorXd w = mixture_weights_at(land, x);
  Eigen::VectorXd da(m.components());
  for (Eigen::Index k = 0; k < m.components(); ++k) {
    const Eigen::VectorXd pd = m.precision(k) * delta;
    da(k) = -pd.dot(x - m.mean(k)) - 0.5 * pd.dot(delta);
  }
  // Far jumps: the direct difference is accurate enough and cannot overflow.
  if (da.cwiseAbs().maxCoeff() > 1e-3) return log_density(land, x + delta) - log_density(land, x);
  double s = 0.0;
  for (Eigen::Index k = 0; k < m.components(); ++k) s += w(k) * std::expm1(da(k));
  return std::log1p(s);
}

inline constexpr double kMaxImplicitStep = 1e12;

enum class FlowIntegrator {
  /// x += h g with h halved until the step is accepted.
  forward_euler,
  /// x += (M/h - H)^-1 g with H the Hessian of ln p and M the metric, the
  /// linearization of backward Euler. Stable on the stiff ridges of
  /// near-singular components; h doubles after every accepted step, so
  /// steps approach Newton steps near a mode.
  linearly_implicit,
};

struct FlowOptions {
  FlowIntegrator integrator = FlowIntegrator::linearly_implicit;
  /// Euler step size, or the initial h of the implicit integrator.
  double step = 0.05;
  double grad_tol = 1e-8;
  int max_iter = 5000;
  /// Cap on the length of any single step.
  double max_displacement = std::numeric_limits<double>::infinity();
  /// Constant SPD metric R; the flow becomes dx/dt = R^-1 grad ln p.
  std::optional<Eigen::MatrixXd> metric;
  bool record_trace = false;
  int max_halvings = 60;
  /// Sufficient-increase factor: a step d is accepted once the ln p gain is
  /// at least armijo * g.d. Keeps each step short of the local line maximum,
  /// so trajectories do not jump into neighbouring basins.
  double armijo = 0.5;
  /// Near a mode (ln p locally concave, squared Newton decrement at most
  /// newton_decrement) try the Newton step first; it is accepted under the
  /// same test as an Euler step. Ill-conditioned modes otherwise need
  /// about as many Euler steps as their condition number.
  bool newton_polish = true;
  double newton_decrement = 0.25;
};

struct FlowResult {
  Eigen::VectorXd endpoint;
  bool converged = false;
  int steps = 0;  // accepted steps
  double path_length = 0.0;
  double gradient_norm = 0.0;
  double max_iterate_norm = 0.0;
  std::vector<double> log_density_trace;  // ln p at every accepted iterate
  std::vector<double> increments;         // accurate ln p change of every accepted step
};

/// Integrates dx/dt = grad ln p with step halving until the step gains ln p
/// by at least the Armijo fraction of its first-order prediction, so ln p
/// never decreases along the returned path. Stops when the gradient norm
/// reaches grad_tol, after max_iter steps, or when no positive step length
/// increases ln p any further.
inline FlowResult flow_ascend(const Landscape& land, const Eigen::VectorXd& x0,
                              const FlowOptions& opt = {}) {
  if (!(opt.step > 0.0)) throw std::invalid_argument("flow step must be > 0");
  std::optional<Eigen::LLT<Eigen::MatrixXd>> metric;
  if (opt.metric) {
    metric.emplace(*opt.metric);
    if (metric->info() != Eigen::Success) throw std::invalid_argument("metric must be SPD");
  }
  FlowResult res;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd g = grad_log_density(land, x);
  res.max_iterate_norm = x.norm();
  if (opt.record_trace) res.log_density_trace.push_back(log_density(land, x));
  const bool implicit = opt.integrator == FlowIntegrator::linearly_implicit;
  const Eigen::Index dim = x.size();
  const Eigen::MatrixXd m_metric = opt.metric ? *opt.metric : Eigen::MatrixXd::Identity(dim, dim);
  double h_implicit = opt.step;
  for (int it = 0; it < opt.max_iter; ++it) {
    if (g.norm() <= opt.grad_tol) break;
    bool accepted = false;
    Eigen::VectorXd delta;
    double inc = 0.0;
    if (implicit) {
      const Eigen::MatrixXd hess = hessian_log_density(land, x);
      for (int halving = 0; !accepted && halving <= opt.max_halvings; ++halving, h_implicit *= 0.5) {
        Eigen::LLT<Eigen::MatrixXd> llt(m_metric / h_implicit - hess);
        if (llt.info() != Eigen::Success) continue;
        delta = llt.solve(g);
        const double len = delta.norm();
        if (!std::isfinite(len)) continue;
        if (len > opt.max_displacement) delta *= opt.max_displacement / len;
        if (delta.norm() == 0.0 || (x + delta) == x) break;
        inc = log_density_increment(land, x, delta);
        if (inc >= 0.0 && inc >= opt.armijo * g.dot(delta)) accepted = true;
      }
      if (!accepted) break;
      h_implicit = std::min(4.0 * h_implicit, kMaxImplicitStep);  // undoes the loop's halving, then doubles
    }
    const Eigen::VectorXd dir = metric ? Eigen::VectorXd(metric->solve(g)) : g;
    if (!implicit && opt.newton_polish && !metric) {
      Eigen::LLT<Eigen::MatrixXd> llt(-hessian_log_density(land, x));
      if (llt.info() == Eigen::Success) {
        delta = llt.solve(g);
        const double decrement = g.dot(delta);
        if (decrement <= opt.newton_decrement && delta.norm() <= opt.max_displacement && (x + delta) != x) {
          inc = log_density_increment(land, x, delta);
          accepted = inc >= 0.0 && inc >= opt.armijo * g.dot(delta);
        }
      }
    }
    double h = opt.step;
    for (int halving = 0; !accepted && halving <= opt.max_halvings; ++halving, h *= 0.5) {
      delta = h * dir;
      const double len = delta.norm();
      if (len > opt.max_displacement) delta *= opt.max_displacement / len;
      if (delta.norm() == 0.0 || (x + delta) == x) break;
      inc = log_density_increment(land, x, delta);
      if (inc >= 0.0 && inc >= opt.armijo * g.dot(delta)) accepted = true;
    }
    if (!accepted) break;
    x += delta;
    g = grad_log_density(land, x);
    ++res.steps;
    res.path_length += delta.norm();
    res.max_iterate_norm = std::max(res.max_iterate_norm, x.norm());
    if (opt.record_trace) {
      res.log_density_trace.push_back(log_density(land, x));
      res.increments.push_back(inc);
    }
  }
  res.endpoint = x;
  res.gradient_norm = g.norm();
  res.converged = res.gradient_norm <= opt.grad_tol;
  return res;
}

/// An equilibrium of the gradient system with its Morse classification.
struct CriticalPoint {
  Eigen::VectorXd location;
  int index = -1;  // number of negative eigenvalues of the Hessian of f
  double f_value = 0.0;
  double p_value = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  bool hyperbolic = false;
  int iterations = 0;
  Eigen::VectorXd hessian_eigenvalues;   // of f = -ln p, ascending
  Eigen::MatrixXd hessian_eigenvectors;  // columns match the eigenvalues
};

/// Morse classification of an arbitrary point.
inline CriticalPoint classify_point(const Landscape& land, const Eigen::VectorXd& x) {
  CriticalPoint cp;
  cp.location = x;
  const double lp = log_density(land, x);
  cp.f_value = -lp;
  cp.p_value = std::exp(lp);
  cp.gradient_norm = grad_log_density(land, x).norm();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-hessian_log_density(land, x));
  cp.hessian_eigenvalues = eig.eigenvalues();
  cp.hessian_eigenvectors = eig.eigenvectors();
  cp.index = static_cast<int>((cp.hessian_eigenvalues.array() < 0.0).count());
  cp.hyperbolic = (cp.hessian_eigenvalues.array().abs() > kHessTol).all();
  return cp;
}

struct RefineOptions {
  double grad_tol = 1e-8;
  int max_iter = 100;
  /// Largest Newton step taken in one iteration.
  double max_step = 0.25;
  std::optional<Eigen::MatrixXd> metric;
  /// When set, steps ascend f along this many lowest Hessian eigenvectors
  /// and descend along the rest (eigenvector following), which converges to
  /// critical points of that index from much farther away than Newton.
  std::optional<int> target_index;
};

namespace detail {

// Eigenvector-following search for a critical point of index `target`.
// The trust radius halves whenever the gradient norm grows and recovers
// towards max_step while it shrinks.
inline CriticalPoint follow_index(const Landscape& land, const Eigen::VectorXd& x0,
                                  const RefineOptions& opt, int target);

}  // namespace detail

/// Newton iteration on grad ln p = 0 with the analytic Hessian. Eigenvalues
/// of small magnitude are lifted (keeping their sign) before inversion, and
/// each step is damped until the gradient norm decreases. On failure the
/// result carries the last iterate with converged = false.
inline CriticalPoint refine_critical(const Landscape& land, const Eigen::VectorXd& x0,
                                     const RefineOptions& opt = {}) {
  if (opt.target_index) {
    if (*opt.target_index < 0 || *opt.target_index > land.dim()) {
      throw std::invalid_argument("target index must lie in [0, D]");
    }
    if (opt.metric) throw std::invalid_argument("target_index and metric are exclusive");
    return detail::follow_index(land, x0, opt, *opt.target_index);
  }
  std::optional<Eigen::LLT<Eigen::MatrixXd>> metric;
  if (opt.metric) {
    metric.emplace(*opt.metric);
    if (metric->info() != Eigen::Success) throw std::invalid_argument("metric must be SPD");
  }
  // Residual whose zeros are the equilibria: R^-1 grad ln p.
  auto residual = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    Eigen::VectorXd g = grad_log_density(land, x);
    return metric ? Eigen::VectorXd(metric->solve(g)) : g;
  };
  Eigen::VectorXd x = x0;
  Eigen::VectorXd r = residual(x);
  int it = 0;
  bool done = false;
  for (; it < opt.max_iter; ++it) {
    if (grad_log_density(land, x).norm() <= opt.grad_tol) {
      done = true;
      break;
    }
    const Eigen::MatrixXd h = hessian_log_density(land, x);
    Eigen::VectorXd delta;
    if (metric) {
      const Eigen::MatrixXd jac = metric->solve(h);
      const double lift = 1e-10 * (1.0 + jac.norm());
      delta = -(jac + lift * Eigen::MatrixXd::Identity(x.size(), x.size()))
                   .colPivHouseholderQr()
                   .solve(r);
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
      const Eigen::VectorXd& vals = eig.eigenvalues();
      const double floor = 1e-8 * std::max(1.0, vals.cwiseAbs().maxCoeff());
      Eigen::VectorXd coeff = eig.eigenvectors().transpose() * r;
      for (Eigen::Index i = 0; i < vals.size(); ++i) {
        const double lam = std::abs(vals(i)) < floor ? (vals(i) < 0.0 ? -floor : floor) : vals(i);
        coeff(i) /= lam;
      }
      delta = -(eig.eigenvectors() * coeff);
    }
    const double len = delta.norm();
    if (!std::isfinite(len)) break;
    if (len > opt.max_step) delta *= opt.max_step / len;

    const double r_norm = r.norm();
    double alpha = 1.0;
    Eigen::VectorXd x_next = x + delta;
    Eigen::VectorXd r_next = residual(x_next);
    for (int k = 0; k < 30 && !(r_next.norm() < r_norm); ++k) {
      alpha *= 0.5;
      x_next = x + alpha * delta;
      r_next = residual(x_next);
    }
    if (x_next == x) break;
    x = std::move(x_next);
    r = std::move(r_next);
  }
  CriticalPoint cp = classify_point(land, x);
  cp.iterations = it;
  cp.converged = done || cp.gradient_norm <= opt.grad_tol;
  return cp;
}

namespace detail {

inline CriticalPoint follow_index(const Landscape& land, const Eigen::VectorXd& x0,
                                  const RefineOptions& opt, int target) {
  Eigen::VectorXd x = x0;
  Eigen::VectorXd g = grad_log_density(land, x);
  double radius = opt.max_step;
  int it = 0;
  bool done = false;
  for (; it < opt.max_iter; ++it) {
    if (g.norm() <= opt.grad_tol) {
      done = true;
      break;
    }
    // Hessian of f and gradient of f.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-hessian_log_density(land, x));
    const Eigen::VectorXd& vals = eig.eigenvalues();
    const double floor = 1e-8 * std::max(1.0, vals.cwiseAbs().maxCoeff());
    Eigen::VectorXd coeff = eig.eigenvectors().transpose() * (-g);
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
      const double mag = std::max(std::abs(vals(i)), floor);
      coeff(i) = i < target ? coeff(i) / mag : -coeff(i) / mag;
    }
    Eigen::VectorXd delta = eig.eigenvectors() * coeff;
    const double len = delta.norm();
    if (!std::isfinite(len)) break;
    // Away from the target index region the walk climbs without a merit test.
    if ((vals.array() < 0.0).count() != target) radius = opt.max_step;
    if (len > radius) delta *= radius / len;
    const Eigen::VectorXd x_next = x + delta;
    if (x_next == x) break;
    const Eigen::VectorXd g_next = grad_log_density(land, x_next);
    radius = g_next.norm() < g.norm() ? std::min(2.0 * radius, opt.max_step) : 0.5 * radius;
    x = x_next;
    g = g_next;
  }
  CriticalPoint cp = classify_point(land, x);
  cp.iterations = it;
  cp.converged = done || cp.gradient_norm <= opt.grad_tol;
  return cp;
}

}  // namespace detail

struct BasinAssignment {
  Eigen::Index center = 0;
  bool converged = false;
  /// Endpoint farther than match_tol from every center.
  bool low_confidence = false;
  /// Endpoint is not a strict mode, or two centers are equally near.
  bool boundary = false;
  Eigen::VectorXd endpoint;
};

/// Index of the center nearest x; ties go to the lower index. Also reports
/// whether the two nearest were tied.
inline std::pair<Eigen::Index, bool> nearest_center_index(const std::vector<Eigen::VectorXd>& centers,
                                                          const Eigen::VectorXd& x,
                                                          double* distance = nullptr) {
  Eigen::Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const double d = (x - centers[k]).norm();
    if (d < best_d) {
      second = best_d;
      best_d = d;
      best = static_cast<Eigen::Index>(k);
    } else if (d < second) {
      second = d;
    }
  }
  if (distance) *distance = best_d;
  const bool tie = std::isfinite(second) && second - best_d <= 1e-12 * std::max(1.0, best_d);
  return {best, tie};
}

/// Follows the flow from x and reports the center nearest the endpoint.
inline BasinAssignment assign_basin(const Landscape& land, const Eigen::VectorXd& x,
                                    const std::vector<Eigen::VectorXd>& centers, double match_tol,
                                    const FlowOptions& opt = {}) {
  if (centers.empty()) throw std::invalid_argument("assign_basin needs at least one center");
  const FlowResult flow = flow_ascend(land, x, opt);
  BasinAssignment out;
  out.endpoint = flow.endpoint;
  out.converged = flow.converged;
  double dist = 0.0;
  auto [idx, tie] = nearest_center_index(centers, flow.endpoint, &dist);
  out.center = idx;
  out.low_confidence = dist > match_tol;
  const Eigen::VectorXd curv =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(hessian_log_density(land, flow.endpoint),
                                                     Eigen::EigenvaluesOnly)
          .eigenvalues();
  out.boundary = tie || curv.maxCoeff() >= -kHessTol;
  return out;
}

}  // namespace dpmorse
