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

// Transition equilibrium vectors (TEVs): index-one saddles of f = -ln p whose
// unstable manifold connects two different modes.
//
// For every pair of centers (mu_k, mu_l) a quadratic string
//
//   c(s) = mu_k + s u + (s - s^2)(4 v - 2 u),  u = mu_l - mu_k,  v = m - mu_k,
//
// is laid through both centers with its vertex (s = 1/2) at the current
// estimate m. Each round samples c at s = i/(m+1), i = 1..m, moves to the
// lowest-density sample and takes one bounded ascent step of the flow; the
// last estimate is refined by eigenvector following towards an index-one
// point, with plain Newton as the fallback. A refined point is accepted as a TEV when
// it has exactly one negative Hessian eigenvalue and flows started on either
// side along that eigenvector end at two different centers.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpmorse/landscape.hpp"

namespace dpmorse {

struct TransitionRecord {
  Eigen::VectorXd t;
  Eigen::Index a = 0;  // a < b
  Eigen::Index b = 0;
  double f_value = 0.0;  // -ln p(t), the merge weight
  double p_value = 0.0;
  double gradient_norm = 0.0;
};

inline constexpr double kRidgelineLogitRange = 12.0;
/// Validation offsets never exceed this many curvature radii 1/sqrt(|lambda|).
inline constexpr double kPerturbCurvatureScale = 0.1;

struct TevOptions {
  int m = 20;             // interior samples per string
  int tau2 = 5;           // string rounds
  double step = 0.05;     // ascent step of one round
  double eps_perturb = 0.05;
  double dedupe_tol = 1e-4;
  double match_tol = 0.25;  // endpoint-to-center distance before flagging
  double grad_tol = 1e-8;
  int refine_max_iter = 100;
  double mode_tol = 1e-4;    // flow endpoints this close are one mode
  int max_extra_modes = 10;  // modes owned by no center that join the search
  int ridgeline_samples = 200;  // 0 skips the ridgeline start of center pairs
  FlowOptions flow;          // used for the validation flows
};

inline Eigen::VectorXd quadratic_string_point(const Eigen::VectorXd& mu_k, const Eigen::VectorXd& mu_l,
                                              const Eigen::VectorXd& v, double s) {
  const Eigen::VectorXd u = mu_l - mu_k;
  return mu_k + s * u + (s - s * s) * (4.0 * v - 2.0 * u);
}

/// Outcome of one pair search before validation.
struct PairSearch {
  std::optional<CriticalPoint> candidate;  // refined from the final estimate
  /// Distinct index-one points refined from the earlier string estimates.
  std::vector<CriticalPoint> alternates;
  std::string diagnostic;  // why no candidate, when empty
};

namespace detail {

// Eigenvector following towards index one, then plain Newton when that
// fails to produce a converged index-one point.
inline CriticalPoint refine_saddle(const Landscape& land, const Eigen::VectorXd& start, const TevOptions& opt,
                                   double max_step) {
  RefineOptions ro;
  ro.grad_tol = opt.grad_tol;
  ro.max_iter = opt.refine_max_iter;
  ro.max_step = max_step;
  ro.target_index = 1;
  CriticalPoint cp = refine_critical(land, start, ro);
  if (!cp.converged || cp.index != 1) {
    ro.target_index.reset();
    CriticalPoint newton = refine_critical(land, start, ro);
    if (newton.converged || !cp.converged) cp = std::move(newton);
  }
  return cp;
}

// Lowest-density point of the ridgeline of components k and l,
//   x(a) = ((1-a) P_k + a P_l)^-1 ((1-a) P_k mu_k + a P_l mu_l),  P = Sigma^-1,
// which holds every critical point of the two-component mixture. a runs
// over a logistic grid so both ends are resolved at the scale of the
// narrower component.
inline Eigen::VectorXd ridgeline_barrier(const Landscape& land, Eigen::Index k, Eigen::Index l, int samples) {
  const MixtureModel& model = land.model();
  const Eigen::MatrixXd& pk = model.precision(k);
  const Eigen::MatrixXd& pl = model.precision(l);
  const Eigen::VectorXd bk = pk * model.mean(k);
  const Eigen::VectorXd bl = pl * model.mean(l);
  Eigen::VectorXd best = model.mean(k);
  double best_lp = std::numeric_limits<double>::infinity();
  for (int i = 1; i < samples; ++i) {
    const double z = kRidgelineLogitRange * (2.0 * i / samples - 1.0);
    const double a = 1.0 / (1.0 + std::exp(-z));
    Eigen::VectorXd x = ((1.0 - a) * pk + a * pl).llt().solve((1.0 - a) * bk + a * bl);
    const double lp = log_density(land, x);
    if (lp < best_lp) {
      best_lp = lp;
      best = std::move(x);
    }
  }
  return best;
}

}  // namespace detail

/// Saddle candidate on a string between two arbitrary anchor points.
inline PairSearch find_tev_between(const Landscape& land, const Eigen::VectorXd& mu_k,
                                   const Eigen::VectorXd& mu_l, const TevOptions& opt = {}) {
  if (opt.m < 1) throw std::invalid_argument("string needs m >= 1 samples");
  const Eigen::VectorXd u = mu_l - mu_k;
  PairSearch out;
  if (u.norm() <= 1e-12 * std::max(1.0, mu_k.norm())) {
    out.diagnostic = "coincident centers";
    return out;
  }
  const double spacing = u.norm() / (opt.m + 1);

  FlowOptions one_step;
  one_step.step = opt.step;
  one_step.max_iter = 1;
  one_step.grad_tol = 0.0;
  one_step.max_displacement = spacing;
  one_step.newton_polish = false;
  one_step.integrator = FlowIntegrator::forward_euler;

  auto lowest_density = [&](auto&& curve) {
    Eigen::VectorXd best;
    double best_lp = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= opt.m; ++i) {
      const double s = static_cast<double>(i) / (opt.m + 1);
      Eigen::VectorXd p = curve(s);
      const double lp = log_density(land, p);
      if (lp < best_lp) {
        best_lp = lp;
        best = std::move(p);
      }
    }
    return best;
  };

  const double max_step = std::max(spacing, 1e-3);
  auto refine = [&](const Eigen::VectorXd& start) { return detail::refine_saddle(land, start, opt, max_step); };

  std::vector<Eigen::VectorXd> estimates;
  Eigen::VectorXd est = lowest_density([&](double s) -> Eigen::VectorXd { return mu_k + s * u; });
  est = flow_ascend(land, est, one_step).endpoint;
  for (int t = 0; t < opt.tau2; ++t) {
    estimates.push_back(est);
    const Eigen::VectorXd v = est - mu_k;
    est = lowest_density([&](double s) { return quadratic_string_point(mu_k, mu_l, v, s); });
    est = flow_ascend(land, est, one_step).endpoint;
  }

  CriticalPoint cp = refine(est);
  // Shallow intermediate modes can pull the string past the saddle nearest
  // an anchor; the earlier estimates keep it in reach.
  for (const auto& e : estimates) {
    CriticalPoint alt = refine(e);
    if (!alt.converged || alt.index != 1) continue;
    const auto same = [&](const CriticalPoint& other) {
      return (other.location - alt.location).norm() <= opt.dedupe_tol;
    };
    if ((cp.converged && same(cp)) || std::any_of(out.alternates.begin(), out.alternates.end(), same)) continue;
    out.alternates.push_back(std::move(alt));
  }
  if (!cp.converged) {
    out.diagnostic = "refinement did not converge";
    return out;
  }
  out.candidate = std::move(cp);
  return out;
}

/// Saddle candidate between centers k and l: the string search, plus the
/// refined lowest-density point of their ridgeline as one more alternate.
inline PairSearch find_tev_for_pair(const Landscape& land, Eigen::Index k, Eigen::Index l,
                                    const TevOptions& opt = {}) {
  if (k == l) throw std::invalid_argument("find_tev_for_pair needs two distinct centers");
  const MixtureModel& model = land.model();
  if (k < 0 || l < 0 || k >= model.components() || l >= model.components()) {
    throw std::invalid_argument("center index out of range");
  }
  PairSearch out = find_tev_between(land, model.mean(k), model.mean(l), opt);
  if (opt.ridgeline_samples < 2) return out;
  const double spacing = (model.mean(l) - model.mean(k)).norm() / (opt.m + 1);
  CriticalPoint cp = detail::refine_saddle(land, detail::ridgeline_barrier(land, k, l, opt.ridgeline_samples), opt,
                                           std::max(spacing, 1e-3));
  if (!cp.converged || cp.index != 1) return out;
  const auto same = [&](const CriticalPoint& other) {
    return (other.location - cp.location).norm() <= opt.dedupe_tol;
  };
  if ((out.candidate && same(*out.candidate)) || std::any_of(out.alternates.begin(), out.alternates.end(), same)) {
    return out;
  }
  if (!out.candidate) {
    out.candidate = std::move(cp);
    out.diagnostic.clear();
  } else {
    out.alternates.push_back(std::move(cp));
  }
  return out;
}

/// Endpoints of the two flows leaving an index-one point along its unstable
/// direction, or a diagnostic.
struct UnstableFlows {
  std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> endpoints;
  std::string diagnostic;
};

inline UnstableFlows unstable_flows(const Landscape& land, const CriticalPoint& cp, const TevOptions& opt = {}) {
  UnstableFlows out;
  if (!cp.converged) {
    out.diagnostic = "candidate not converged";
    return out;
  }
  if (!cp.hyperbolic) {
    out.diagnostic = "non-hyperbolic critical point";
    return out;
  }
  if (cp.index != 1) {
    out.diagnostic = "index " + std::to_string(cp.index) + ", not 1";
    return out;
  }
  // Eigenvalues are ascending, so column 0 is the unstable direction. The
  // offset stays inside the quadratic region of steep saddles, whose
  // curvature radius can be far below eps_perturb next to needle components.
  const Eigen::VectorXd e = cp.hessian_eigenvectors.col(0);
  const double offset =
      std::min(opt.eps_perturb, kPerturbCurvatureScale / std::sqrt(std::abs(cp.hessian_eigenvalues(0))));
  const FlowResult up = flow_ascend(land, cp.location + offset * e, opt.flow);
  const FlowResult down = flow_ascend(land, cp.location - offset * e, opt.flow);
  if (!up.converged || !down.converged) {
    out.diagnostic = "validation flow did not converge";
    return out;
  }
  out.endpoints.emplace(up.endpoint, down.endpoint);
  return out;
}

struct Validation {
  std::optional<TransitionRecord> record;
  std::string diagnostic;
};

/// Accepts cp as a TEV between the centers nearest to where its two unstable
/// flows end.
inline Validation validate_tev(const Landscape& land, const CriticalPoint& cp,
                               const std::vector<Eigen::VectorXd>& centers, const TevOptions& opt = {}) {
  Validation out;
  const UnstableFlows flows = unstable_flows(land, cp, opt);
  if (!flows.endpoints) {
    out.diagnostic = flows.diagnostic;
    return out;
  }
  const Eigen::Index a = nearest_center_index(centers, flows.endpoints->first).first;
  const Eigen::Index b = nearest_center_index(centers, flows.endpoints->second).first;
  if (a == b) {
    out.diagnostic = "both sides reach center " + std::to_string(a);
    return out;
  }
  TransitionRecord rec;
  rec.t = cp.location;
  rec.a = std::min(a, b);
  rec.b = std::max(a, b);
  rec.f_value = cp.f_value;
  rec.p_value = cp.p_value;
  rec.gradient_norm = cp.gradient_norm;
  out.record = std::move(rec);
  return out;
}

/// One string search. Vertices below K are centers; higher ones are extra
/// modes met by validation flows.
struct PairOutcome {
  Eigen::Index k = 0;
  Eigen::Index l = 0;
  std::optional<TransitionRecord> record;  // a, b are the vertices joined
  std::string diagnostic;
};

struct TevSearch {
  std::vector<TransitionRecord> records;  // between centers, sorted by (a, b)
  std::vector<PairOutcome> pairs;         // in search order
  std::vector<Eigen::VectorXd> modes;     // vertex locations: center modes, then extra modes
};

namespace detail {

inline std::vector<TransitionRecord> dedupe_by_location(std::vector<TransitionRecord> found, double tol) {
  // Order-independent: best gradient norm first, then vertices, then location.
  std::sort(found.begin(), found.end(), [](const TransitionRecord& x, const TransitionRecord& y) {
    if (x.gradient_norm != y.gradient_norm) return x.gradient_norm < y.gradient_norm;
    if (x.a != y.a || x.b != y.b) return std::pair(x.a, x.b) < std::pair(y.a, y.b);
    return std::lexicographical_compare(x.t.data(), x.t.data() + x.t.size(), y.t.data(),
                                        y.t.data() + y.t.size());
  });
  std::vector<TransitionRecord> unique;
  for (auto& r : found) {
    const bool dup = std::any_of(unique.begin(), unique.end(), [&](const TransitionRecord& u) {
      return (u.t - r.t).norm() <= tol;
    });
    if (!dup) unique.push_back(std::move(r));
  }
  return unique;
}

}  // namespace detail

/// Runs the string search between every pair of centers and validates each
/// candidate by where its unstable flows end. Flow endpoints are matched to
/// modes: the mode each center flows to, or an extra mode when no center
/// owns it. Extra modes join the search as new string anchors, so barriers
/// that pass through them are found too. Saddles are then taken in order of
/// increasing f; each one that first connects two groups of modes containing
/// centers becomes a record between the lowest centers of those groups,
/// while saddles joining two centers' own modes are all recorded. Duplicate
/// locations collapse onto the one with the smallest gradient norm, and each
/// (a, b) keeps its lowest f.
inline TevSearch find_all_tevs(const Landscape& land, const TevOptions& opt = {}) {
  const Eigen::Index K = land.components();
  if (K < 2) throw std::invalid_argument("TEV search needs at least two components");
  const std::vector<Eigen::VectorXd>& centers = land.model().means();
  TevSearch out;

  // Vertex v: string anchor, mode location, and the lowest center owning it.
  std::vector<Eigen::VectorXd> anchors(centers.begin(), centers.end());
  std::vector<Eigen::Index> owner;
  for (Eigen::Index k = 0; k < K; ++k) {
    const FlowResult fr = flow_ascend(land, centers[static_cast<std::size_t>(k)], opt.flow);
    out.modes.push_back(fr.converged ? fr.endpoint : centers[static_cast<std::size_t>(k)]);
    owner.push_back(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      if ((out.modes[static_cast<std::size_t>(j)] - out.modes.back()).norm() <= opt.mode_tol) {
        owner.back() = owner[static_cast<std::size_t>(j)];
        break;
      }
    }
  }
  auto identify = [&](const Eigen::VectorXd& endpoint) -> std::optional<Eigen::Index> {
    for (std::size_t v = 0; v < out.modes.size(); ++v) {
      if ((out.modes[v] - endpoint).norm() <= opt.mode_tol) return owner[v];
    }
    if (static_cast<Eigen::Index>(out.modes.size()) >= K + opt.max_extra_modes) return std::nullopt;
    const auto v = static_cast<Eigen::Index>(out.modes.size());
    out.modes.push_back(endpoint);
    anchors.push_back(endpoint);
    owner.push_back(v);
    return v;
  };

  std::vector<std::pair<Eigen::Index, Eigen::Index>> queue;
  for (Eigen::Index k = 0; k < K; ++k) {
    for (Eigen::Index l = k + 1; l < K; ++l) queue.emplace_back(k, l);
  }
  std::vector<TransitionRecord> found;
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const auto [k, l] = queue[q];
    PairOutcome po{k, l, std::nullopt, {}};
    const std::size_t before = out.modes.size();
    const PairSearch ps = l < K ? find_tev_for_pair(land, k, l, opt)
                                : find_tev_between(land, anchors[static_cast<std::size_t>(k)],
                                                   anchors[static_cast<std::size_t>(l)], opt);
    std::vector<const CriticalPoint*> candidates;
    if (ps.candidate) candidates.push_back(&*ps.candidate);
    for (const auto& alt : ps.alternates) candidates.push_back(&alt);
    po.diagnostic = ps.diagnostic;
    for (const CriticalPoint* cp : candidates) {
      const UnstableFlows flows = unstable_flows(land, *cp, opt);
      std::string diagnostic;
      if (!flows.endpoints) {
        diagnostic = flows.diagnostic;
      } else {
        const auto a = identify(flows.endpoints->first);
        const auto b = identify(flows.endpoints->second);
        if (!a || !b) {
          diagnostic = "extra mode limit reached";
        } else if (*a == *b) {
          diagnostic = "both sides reach mode " + std::to_string(*a);
        } else {
          TransitionRecord rec;
          rec.t = cp->location;
          rec.a = std::min(*a, *b);
          rec.b = std::max(*a, *b);
          rec.f_value = cp->f_value;
          rec.p_value = cp->p_value;
          rec.gradient_norm = cp->gradient_norm;
          if (!po.record) po.record = rec;
          found.push_back(std::move(rec));
        }
      }
      if (!po.record && po.diagnostic.empty()) po.diagnostic = diagnostic;
    }
    if (po.record) po.diagnostic.clear();
    out.pairs.push_back(std::move(po));
    for (std::size_t v = before; v < out.modes.size(); ++v) {
      for (std::size_t w = 0; w < v; ++w) {
        if (owner[w] == static_cast<Eigen::Index>(w)) {
          queue.emplace_back(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(v));
        }
      }
    }
  }

  std::vector<TransitionRecord> unique = detail::dedupe_by_location(std::move(found), opt.dedupe_tol);
  std::sort(unique.begin(), unique.end(), [](const TransitionRecord& x, const TransitionRecord& y) {
    if (x.f_value != y.f_value) return x.f_value < y.f_value;
    return std::pair(x.a, x.b) < std::pair(y.a, y.b);
  });

  // Kruskal over mode vertices; a group's center is its lowest center index.
  std::vector<Eigen::Index> parent(out.modes.size());
  std::iota(parent.begin(), parent.end(), Eigen::Index{0});
  std::vector<Eigen::Index> center_of(out.modes.size(), -1);
  for (Eigen::Index v = 0; v < static_cast<Eigen::Index>(out.modes.size()); ++v) {
    if (v < K) center_of[static_cast<std::size_t>(v)] = v;
  }
  auto find = [&](Eigen::Index x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  std::vector<TransitionRecord> projected;
  for (const auto& r : unique) {
    const Eigen::Index ra = find(r.a);
    const Eigen::Index rb = find(r.b);
    const Eigen::Index ca = center_of[static_cast<std::size_t>(ra)];
    const Eigen::Index cb = center_of[static_cast<std::size_t>(rb)];
    if (r.a < K && r.b < K) {
      projected.push_back(r);
    } else if (ra != rb && ca >= 0 && cb >= 0) {
      TransitionRecord p = r;
      p.a = std::min(ca, cb);
      p.b = std::max(ca, cb);
      projected.push_back(std::move(p));
    }
    if (ra != rb) {
      const Eigen::Index c = ca < 0 ? cb : (cb < 0 ? ca : std::min(ca, cb));
      parent[static_cast<std::size_t>(rb)] = ra;
      center_of[static_cast<std::size_t>(ra)] = c;
    }
  }
  std::sort(projected.begin(), projected.end(), [](const TransitionRecord& x, const TransitionRecord& y) {
    if (x.a != y.a || x.b != y.b) return std::pair(x.a, x.b) < std::pair(y.a, y.b);
    return x.f_value < y.f_value;
  });
  for (auto& r : projected) {
    if (!out.records.empty() && out.records.back().a == r.a && out.records.back().b == r.b) continue;
    out.records.push_back(std::move(r));
  }
  return out;
}

/// A center that is not a mode of its own: the flow from it ends at the mode
/// of center `to`. Both lie in one superlevel component from level f(from)
/// on, since ln p increases along that flow.
struct CenterLink {
  Eigen::Index from = 0;
  Eigen::Index to = 0;
  double f_value = 0.0;  // -ln p at center `from`
};

/// Flows from every center; reports those whose endpoint is nearer to
/// another center. A flow that does not converge yields no link.
inline std::vector<CenterLink> absorbed_centers(const Landscape& land, const FlowOptions& flow = {}) {
  const std::vector<Eigen::VectorXd>& centers = land.model().means();
  std::vector<CenterLink> out;
  for (Eigen::Index k = 0; k < land.components(); ++k) {
    const Eigen::VectorXd& mu = centers[static_cast<std::size_t>(k)];
    const FlowResult fr = flow_ascend(land, mu, flow);
    if (!fr.converged) continue;
    const Eigen::Index j = nearest_center_index(centers, fr.endpoint).first;
    if (j != k) out.push_back({k, j, -log_density(land, mu)});
  }
  return out;
}

}  // namespace dpmorse
