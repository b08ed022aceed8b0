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

// Noise calibration and sampling.
//
// Both private fits release Gaussian-noised cluster statistics and account for
// them with zero-concentrated DP (zCDP):
//
//   * a statistic of l2-sensitivity S released with N(0, sigma^2) noise is
//     S^2 / (2 sigma^2)-zCDP;
//   * zCDP composes additively;
//   * rho-zCDP implies (rho + 2 sqrt(rho ln(1/delta)), delta)-DP;
//   * eps0-DP (e.g. Laplace noise) implies eps0^2 / 2-zCDP.
//
// Per hard-EM iteration the count (sensitivity 1), the D coordinate sums
// (sensitivity 2 each) and the D(D+1)/2 second-moment entries (diagonal 1,
// off-diagonal 2) sum to r = 1 + 3D + 2D^2 squared-sensitivity units, so tau
// iterations cost rho = r tau / (2 sigma^2). Solving the conversion for sigma
// gives
//
//   sigma = sqrt(r tau / 2) (sqrt(ln(1/delta) + eps) + sqrt(ln(1/delta))) / eps.
//
// For the Lloyd variant the Laplace scale b = sigma is read literally: one
// iteration spends eps0 = (2D + 1) / sigma of pure DP (count plus D sums of
// l1-sensitivity 2). Composing tau of those as pure DP gives tau (2D+1) / sigma,
// i.e. tau^2 (2D+1)^2 / (2 sigma^2)-zCDP; the final Gaussian covariance release
// adds D + 4 D(D-1)/2 = D(2D-1) units, so r = (2D+1)^2 tau^2 + D(2D-1) and
// rho = r / (2 sigma^2).
//
// The noisy second moment is centered on the noisy mean, while the sensitivity
// bound above is for the uncentered sum of x x^T; once the noisy mean leaves
// the unit box a centered entry can move by more than the stated bound. That
// mismatch is inherited from the published algorithm and not corrected here.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "dpmorse/dataset.hpp"
#include "dpmorse/error.hpp"
#include "dpmorse/random.hpp"

namespace dpmorse {

enum class Mechanism { gaussian_mog_hard, lloyd_mixed };

inline const char* to_string(Mechanism m) {
  return m == Mechanism::gaussian_mog_hard ? "gaussian_mog_hard" : "lloyd_mixed";
}

struct PrivacySpec {
  double epsilon = 1.0;
  double delta = 1e-5;
  int tau = 10;
  Mechanism mechanism = Mechanism::gaussian_mog_hard;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be > 0");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
    if (tau < 1) throw ConfigError("tau must be >= 1");
  }
};

struct NoiseScale {
  double sigma = 0.0;
  std::int64_t r = 0;
  double rho = 0.0;
};

/// Squared-sensitivity units per hard-EM iteration.
constexpr std::int64_t r_mog_hard(std::int64_t dim) {
  if (dim < 1) throw std::invalid_argument("dimension must be >= 1");
  return 1 + 3 * dim + 2 * dim * dim;
}

/// Composition weight of the whole Lloyd-with-covariance run.
constexpr std::int64_t r_lloyd(std::int64_t dim, std::int64_t tau) {
  if (dim < 1 || tau < 1) throw std::invalid_argument("dimension and tau must be >= 1");
  return (2 * dim + 1) * (2 * dim + 1) * tau * tau + dim * (2 * dim - 1);
}

/// zCDP budget rho that converts to exactly (epsilon, delta)-DP.
inline double rho_for(double epsilon, double delta) {
  const double l = std::log(1.0 / delta);
  const double root = epsilon / (std::sqrt(l + epsilon) + std::sqrt(l));
  return root * root;
}

/// epsilon implied by rho-zCDP at the given delta.
inline double epsilon_from_rho(double rho, double delta) {
  return rho + 2.0 * std::sqrt(rho * std::log(1.0 / delta));
}

inline NoiseScale calibrate_sigma(const PrivacySpec& spec, std::int64_t dim) {
  spec.validate();
  NoiseScale out;
  const double l = std::log(1.0 / spec.delta);
  const double tail = (std::sqrt(l + spec.epsilon) + std::sqrt(l)) / spec.epsilon;
  if (spec.mechanism == Mechanism::gaussian_mog_hard) {
    out.r = r_mog_hard(dim);
    out.sigma = std::sqrt(static_cast<double>(out.r) * spec.tau / 2.0) * tail;
    out.rho = static_cast<double>(out.r) * spec.tau / (2.0 * out.sigma * out.sigma);
  } else {
    out.r = r_lloyd(dim, spec.tau);
    out.sigma = std::sqrt(static_cast<double>(out.r) / 2.0) * tail;
    out.rho = static_cast<double>(out.r) / (2.0 * out.sigma * out.sigma);
  }
  return out;
}

/// Counts of noise draws, never their values.
struct NoiseLog {
  std::int64_t gaussian_draws = 0;
  std::int64_t laplace_draws = 0;
};

inline Eigen::VectorXd sample_gaussian(double sigma, Eigen::Index count, RandomStream& rng,
                                       NoiseLog* log = nullptr) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
  if (log) log->gaussian_draws += count;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(count);
  if (sigma == 0.0) return out;
  std::normal_distribution<double> dist(0.0, sigma);
  for (Eigen::Index i = 0; i < count; ++i) out(i) = dist(rng.engine());
  return out;
}

/// Laplace(0, b) via inverse CDF; density proportional to exp(-|x| / b).
inline Eigen::VectorXd sample_laplace(double scale, Eigen::Index count, RandomStream& rng,
                                      NoiseLog* log = nullptr) {
  if (!(scale >= 0.0)) throw std::invalid_argument("scale must be >= 0");
  if (log) log->laplace_draws += count;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(count);
  if (scale == 0.0) return out;
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  for (Eigen::Index i = 0; i < count; ++i) {
    double u = unit(rng.engine());
    while (u == -0.5) u = unit(rng.engine());
    const double mag = -scale * std::log1p(-2.0 * std::abs(u));
    out(i) = u < 0.0 ? -mag : mag;
  }
  return out;
}

/// Fills the upper triangle row-major from a length D(D+1)/2 vector and
/// mirrors it below the diagonal.
inline Eigen::MatrixXd sym_pack(const Eigen::VectorXd& v, Eigen::Index dim) {
  if (dim < 1 || v.size() != dim * (dim + 1) / 2) {
    throw std::invalid_argument("sym_pack: vector length must be D(D+1)/2");
  }
  Eigen::MatrixXd m(dim, dim);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = i; j < dim; ++j) {
      m(i, j) = v(k);
      m(j, i) = v(k);
      ++k;
    }
  }
  return m;
}

struct SensitivityReport {
  double count_delta = 0.0;
  double sum_delta = 0.0;            // max over clusters and coordinates
  double second_moment_diag_delta = 0.0;
  double second_moment_offdiag_delta = 0.0;
  Eigen::Index changed_row = -1;

  static constexpr double kCountBound = 1.0;
  static constexpr double kSumBound = 2.0;
  static constexpr double kDiagBound = 1.0;
  static constexpr double kOffDiagBound = 2.0;

  bool within_bounds() const {
    return count_delta <= kCountBound && sum_delta <= kSumBound &&
           second_moment_diag_delta <= kDiagBound && second_moment_offdiag_delta <= kOffDiagBound;
  }
};

using AssignmentFn = std::function<int(const Eigen::VectorXd&)>;

/// Compares the per-cluster count, coordinate sums and uncentered second
/// moments of two replace-one neighbors under a fixed assignment rule, and
/// reports the largest absolute change of each statistic.
inline SensitivityReport audit_sensitivity(const Dataset& d1, const Dataset& d2,
                                           const AssignmentFn& assign) {
  if (d1.size() != d2.size() || d1.dim() != d2.dim() || d1.size() < 1) {
    throw std::invalid_argument("audit_sensitivity: datasets must have equal shape");
  }
  if (!d1.in_unit_box() || !d2.in_unit_box()) {
    throw std::invalid_argument("audit_sensitivity: values outside [-1, 1]");
  }
  SensitivityReport rep;
  for (Eigen::Index i = 0; i < d1.size(); ++i) {
    if (d1.rows.row(i) != d2.rows.row(i)) {
      if (rep.changed_row >= 0) {
        throw std::invalid_argument("audit_sensitivity: datasets differ in more than one row");
      }
      rep.changed_row = i;
    }
  }
  if (rep.changed_row < 0) {
    throw std::invalid_argument("audit_sensitivity: datasets are identical, not neighbors");
  }

  // Unchanged rows contribute identically to both sides, so every cluster
  // delta equals the changed row's contribution difference, taken exactly.
  const Eigen::VectorXd x1 = d1.rows.row(rep.changed_row).transpose();
  const Eigen::VectorXd x2 = d2.rows.row(rep.changed_row).transpose();
  const int k1 = assign(x1);
  const int k2 = assign(x2);
  if (k1 < 0 || k2 < 0) throw std::invalid_argument("assignment returned a negative cluster");
  const Eigen::Index dim = d1.dim();
  auto record = [&](const Eigen::VectorXd& sum, const Eigen::MatrixXd& second) {
    rep.sum_delta = std::max(rep.sum_delta, sum.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd diff = second.cwiseAbs();
    for (Eigen::Index i = 0; i < dim; ++i) {
      rep.second_moment_diag_delta = std::max(rep.second_moment_diag_delta, diff(i, i));
      for (Eigen::Index j = i + 1; j < dim; ++j) {
        rep.second_moment_offdiag_delta = std::max(rep.second_moment_offdiag_delta, diff(i, j));
      }
    }
  };
  if (k1 == k2) {
    Eigen::MatrixXd second(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      for (Eigen::Index j = 0; j < dim; ++j) second(i, j) = std::fma(x1(i), x1(j), -x2(i) * x2(j));
    }
    record(x1 - x2, second);
  } else {
    rep.count_delta = 1.0;
    record(x1, x1 * x1.transpose());
    record(x2, x2 * x2.transpose());
  }
  return rep;
}

}  // namespace dpmorse
