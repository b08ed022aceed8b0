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

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dpmorse {

/// Smallest eigenvalue a repaired covariance may have.
inline constexpr double kEigFloor = 1e-6;
/// Noisy counts are clamped to kCountFloorFraction * N.
inline constexpr double kCountFloorFraction = 1e-6;

/// Gaussian mixture with per-component Cholesky factor, precision and
/// log-determinant cached at construction. Immutable.
class MixtureModel {
 public:
  MixtureModel() = default;

  MixtureModel(std::vector<double> weights, std::vector<Eigen::VectorXd> means,
               std::vector<Eigen::MatrixXd> covariances)
      : weights_(std::move(weights)), means_(std::move(means)), covs_(std::move(covariances)) {
    const std::size_t k = weights_.size();
    if (k == 0) throw std::invalid_argument("mixture needs at least one component");
    if (means_.size() != k || covs_.size() != k) {
      throw std::invalid_argument("mixture weights, means and covariances differ in length");
    }
    dim_ = means_.front().size();
    if (dim_ < 1) throw std::invalid_argument("mixture dimension must be >= 1");
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (!(weights_[c] > 0.0) || !std::isfinite(weights_[c])) {
        throw std::invalid_argument("mixture weight " + std::to_string(c) + " must be positive");
      }
      total += weights_[c];
      if (means_[c].size() != dim_ || covs_[c].rows() != dim_ || covs_[c].cols() != dim_) {
        throw std::invalid_argument("mixture component " + std::to_string(c) + " has wrong shape");
      }
      if (!means_[c].allFinite() || !covs_[c].allFinite()) {
        throw std::invalid_argument("mixture component " + std::to_string(c) + " is not finite");
      }
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mixture weights must sum to 1");

    const double log_2pi = std::log(2.0 * std::numbers::pi);
    for (std::size_t c = 0; c < k; ++c) {
      Eigen::LLT<Eigen::MatrixXd> llt(covs_[c]);
      if (llt.info() != Eigen::Success) {
        throw std::invalid_argument("covariance " + std::to_string(c) + " is not positive definite");
      }
      Eigen::MatrixXd lower = llt.matrixL();
      const double log_det = 2.0 * lower.diagonal().array().log().sum();
      Eigen::MatrixXd precision = llt.solve(Eigen::MatrixXd::Identity(dim_, dim_));
      precision = 0.5 * (precision + precision.transpose()).eval();
      log_norm_.push_back(std::log(weights_[c]) - 0.5 * static_cast<double>(dim_) * log_2pi -
                          0.5 * log_det);
      chol_.push_back(std::move(lower));
      precision_.push_back(std::move(precision));
      log_det_.push_back(log_det);
    }
  }

  Eigen::Index components() const { return static_cast<Eigen::Index>(weights_.size()); }
  Eigen::Index dim() const { return dim_; }

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& means() const { return means_; }
  const std::vector<Eigen::MatrixXd>& covariances() const { return covs_; }

  double weight(Eigen::Index k) const { return weights_[idx(k)]; }
  const Eigen::VectorXd& mean(Eigen::Index k) const { return means_[idx(k)]; }
  const Eigen::MatrixXd& covariance(Eigen::Index k) const { return covs_[idx(k)]; }
  const Eigen::MatrixXd& cholesky(Eigen::Index k) const { return chol_[idx(k)]; }
  const Eigen::MatrixXd& precision(Eigen::Index k) const { return precision_[idx(k)]; }
  double log_det(Eigen::Index k) const { return log_det_[idx(k)]; }

  /// ln(pi_k N(x | mu_k, Sigma_k)).
  double weighted_log_density(Eigen::Index k, const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z =
        chol_[idx(k)].triangularView<Eigen::Lower>().solve(x - means_[idx(k)]);
    return log_norm_[idx(k)] - 0.5 * z.squaredNorm();
  }

  /// All K weighted log densities.
  Eigen::VectorXd weighted_log_densities(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(components());
    for (Eigen::Index k = 0; k < components(); ++k) out(k) = weighted_log_density(k, x);
    return out;
  }

 private:
  static std::size_t idx(Eigen::Index k) { return static_cast<std::size_t>(k); }

  Eigen::Index dim_ = 0;
  std::vector<double> weights_;
  std::vector<Eigen::VectorXd> means_;
  std::vector<Eigen::MatrixXd> covs_;
  std::vector<Eigen::MatrixXd> chol_;
  std::vector<Eigen::MatrixXd> precision_;
  std::vector<double> log_det_;
  std::vector<double> log_norm_;
};

/// log(sum(exp(v))) without overflow.
inline double log_sum_exp(const Eigen::VectorXd& v) {
  const double top = v.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((v.array() - top).exp().sum());
}

/// Normalizes weighted log densities into a probability vector.
inline Eigen::VectorXd softmax(const Eigen::VectorXd& log_terms) {
  const double top = log_terms.maxCoeff();
  Eigen::VectorXd w = (log_terms.array() - top).exp();
  return w / w.sum();
}

/// Posterior component probabilities of x (the E-step responsibilities).
inline Eigen::VectorXd responsibilities(const MixtureModel& model, const Eigen::VectorXd& x) {
  return softmax(model.weighted_log_densities(x));
}

/// Index of the largest entry; ties go to the lowest index.
inline Eigen::Index argmax_lowest(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k) {
    if (v(k) > v(best)) best = k;
  }
  return best;
}

/// Mixture parameters straight out of a (possibly noisy) M-step.
struct RawMixture {
  Eigen::VectorXd counts;  // N_k, may be zero or negative after noise
  double total = 0.0;      // N
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covariances;
};

struct RepairEvents {
  int clamped_counts = 0;
  int repaired_covariances = 0;
  int nonfinite_components = 0;
};

/// Projects raw parameters onto a valid mixture: counts are clamped to
/// count_floor = 1e-6 N and renormalized into weights; covariances are
/// symmetrized and their eigenvalues clipped below at kEigFloor. A component
/// whose count was clamped, or whose parameters are not finite, falls back to
/// `previous` when given (keeping its last valid mean and covariance).
inline MixtureModel repair_model(const RawMixture& raw, RepairEvents* events = nullptr,
                                 const MixtureModel* previous = nullptr) {
  const auto k = static_cast<std::size_t>(raw.counts.size());
  if (k == 0 || raw.means.size() != k || raw.covariances.size() != k) {
    throw std::invalid_argument("repair_model: inconsistent component count");
  }
  if (!(raw.total > 0.0)) throw std::invalid_argument("repair_model: total must be positive");
  const Eigen::Index dim = raw.means.front().size();
  RepairEvents ev;
  const double floor = kCountFloorFraction * raw.total;

  std::vector<double> counts(k);
  std::vector<Eigen::VectorXd> means(k);
  std::vector<Eigen::MatrixXd> covs(k);
  for (std::size_t c = 0; c < k; ++c) {
    double n = raw.counts(static_cast<Eigen::Index>(c));
    bool fallback = false;
    if (!(n > floor) || !std::isfinite(n)) {
      n = floor;
      ++ev.clamped_counts;
      fallback = previous != nullptr;
    }
    counts[c] = n;
    means[c] = raw.means[c];
    covs[c] = raw.covariances[c];
    if (!means[c].allFinite() || !covs[c].allFinite()) {
      ++ev.nonfinite_components;
      fallback = true;
    }
    if (fallback) {
      if (previous != nullptr) {
        means[c] = previous->mean(static_cast<Eigen::Index>(c));
        covs[c] = previous->covariance(static_cast<Eigen::Index>(c));
      } else {
        if (!means[c].allFinite()) means[c] = Eigen::VectorXd::Zero(dim);
        if (!covs[c].allFinite()) covs[c] = Eigen::MatrixXd::Identity(dim, dim);
      }
    }
    Eigen::MatrixXd sym = 0.5 * (covs[c] + covs[c].transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    if (eig.eigenvalues().minCoeff() < kEigFloor) {
      Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(kEigFloor);
      sym = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
      sym = 0.5 * (sym + sym.transpose()).eval();
      ++ev.repaired_covariances;
    }
    covs[c] = std::move(sym);
  }
  double sum = 0.0;
  for (double n : counts) sum += n;
  std::vector<double> weights(k);
  for (std::size_t c = 0; c < k; ++c) weights[c] = counts[c] / sum;
  if (events) *events = ev;
  return MixtureModel(std::move(weights), std::move(means), std::move(covs));
}

}  // namespace dpmorse
