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

// Sub-cluster fits: private hard EM (DPMoG-hard), private Lloyd with a noisy
// covariance pass (DPLloyd-MoG), and their non-private baselines.
//
// Random streams: a fit given stream `rng` draws its data-independent
// initialization from rng.fork(0) and all privacy noise from rng.fork(1).
// fit_lloyd(seed) uses RandomStream(seed).fork(0), so DPLloyd-MoG with noise
// forced to zero and Lloyd from the same seed run the same iterations. The
// non-private EM baseline is free to look at the data: without an explicit
// start it runs kEmRestarts k-means++ seeded starts, restart r drawing from
// RandomStream(seed).fork(r), and keeps the most likely result.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dpmorse/dataset.hpp"
#include "dpmorse/error.hpp"
#include "dpmorse/mixture.hpp"
#include "dpmorse/privacy.hpp"
#include "dpmorse/random.hpp"

namespace dpmorse {

/// Isotropic variance of the data-independent initial components.
inline constexpr double kInitVariance = 0.2;

/// Data-driven starts tried by the non-private EM baseline.
inline constexpr int kEmRestarts = 10;

/// Lloyd iterations run on the k-means++ seeds of each EM start.
inline constexpr int kEmLloydIterations = 10;

struct FitIteration {
  std::vector<Eigen::Index> cluster_sizes;  // true |C_k|; diagnostic, not private
  std::vector<double> noisy_counts;         // released N_k before clamping
  RepairEvents repair;
  double log_likelihood = std::numeric_limits<double>::quiet_NaN();  // soft EM only
  std::vector<int> assignments;             // only with FitOptions::record_assignments
};

struct FitTrace {
  std::string method;
  std::uint64_t seed = 0;
  int restart = 0;  // selected EM start
  std::optional<PrivacySpec> spec;
  std::optional<NoiseScale> noise;
  bool noise_overridden = false;
  NoiseLog noise_log;
  std::vector<FitIteration> iterations;
  RawMixture final_raw;
  double final_log_likelihood = std::numeric_limits<double>::quiet_NaN();  // EM baselines only
};

struct FitResult {
  MixtureModel model;
  FitTrace trace;
};

struct FitOptions {
  /// Test harness hook: replaces the calibrated sigma (0 turns noise off).
  std::optional<double> sigma_override;
  bool record_assignments = false;
};

/// Means uniform on [-1,1]^D, covariances kInitVariance * I, equal weights.
/// Uses no data, hence no privacy budget.
inline MixtureModel initial_model(Eigen::Index components, Eigen::Index dim, RandomStream& rng) {
  std::vector<double> w(static_cast<std::size_t>(components), 1.0 / static_cast<double>(components));
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
  for (Eigen::Index k = 0; k < components; ++k) {
    Eigen::VectorXd m(dim);
    for (Eigen::Index j = 0; j < dim; ++j) m(j) = rng.uniform(-1.0, 1.0);
    means.push_back(std::move(m));
    covs.push_back(kInitVariance * Eigen::MatrixXd::Identity(dim, dim));
  }
  return MixtureModel(std::move(w), std::move(means), std::move(covs));
}

namespace detail {

inline void check_fit_input(const Dataset& data, Eigen::Index components) {
  data.validate();
  if (components < 1) throw ConfigError("component count must be >= 1");
  if (components > data.size()) throw ConfigError("component count exceeds the number of rows");
}

inline void check_unit_box(const Dataset& data) {
  if (!data.in_unit_box()) throw DataError("private fits need every value in [-1, 1]");
}

inline std::vector<int> hard_assign(const MixtureModel& model, const Eigen::MatrixXd& rows) {
  std::vector<int> out(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    out[static_cast<std::size_t>(i)] =
        static_cast<int>(argmax_lowest(model.weighted_log_densities(rows.row(i).transpose())));
  }
  return out;
}

inline std::vector<int> nearest_center(const std::vector<Eigen::VectorXd>& centers,
                                       const Eigen::MatrixXd& rows) {
  std::vector<int> out(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const double d = (rows.row(i).transpose() - centers[k]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(k);
      }
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

inline bool all_rows_identical(const Eigen::MatrixXd& rows) {
  for (Eigen::Index i = 1; i < rows.rows(); ++i) {
    if (rows.row(i) != rows.row(0)) return false;
  }
  return true;
}

inline double log_likelihood(const MixtureModel& model, const Eigen::MatrixXd& rows) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    ll += log_sum_exp(model.weighted_log_densities(rows.row(i).transpose()));
  }
  return ll;
}

// Per-cluster member sums for a hard partition.
struct HardStats {
  std::vector<Eigen::Index> sizes;
  std::vector<Eigen::VectorXd> sums;
};

inline HardStats hard_stats(const Eigen::MatrixXd& rows, const std::vector<int>& assign,
                            Eigen::Index components) {
  HardStats s;
  s.sizes.assign(static_cast<std::size_t>(components), 0);
  s.sums.assign(static_cast<std::size_t>(components), Eigen::VectorXd::Zero(rows.cols()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const auto k = static_cast<std::size_t>(assign[static_cast<std::size_t>(i)]);
    ++s.sizes[k];
    s.sums[k] += rows.row(i).transpose();
  }
  return s;
}

inline Eigen::MatrixXd centered_scatter(const Eigen::MatrixXd& rows, const std::vector<int>& assign,
                                        int cluster, const Eigen::VectorXd& center) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(rows.cols(), rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    if (assign[static_cast<std::size_t>(i)] != cluster) continue;
    const Eigen::VectorXd d = rows.row(i).transpose() - center;
    s += d * d.transpose();
  }
  return s;
}

}  // namespace detail

/// Private hard EM. Each of spec.tau iterations assigns every row to its
/// argmax-responsibility component (clusters are rebuilt from scratch every
/// iteration), then releases per cluster the count, the coordinate sum and
/// the second moment centered on the new noisy mean, each with N(0, sigma^2)
/// noise at the calibrated sigma, and repairs the result into a valid model.
inline FitResult fit_dpmog_hard(const Dataset& data, Eigen::Index components,
                                const PrivacySpec& spec, const std::optional<MixtureModel>& init,
                                RandomStream& rng, const FitOptions& options = {}) {
  spec.validate();
  if (spec.mechanism != Mechanism::gaussian_mog_hard) {
    throw ConfigError("fit_dpmog_hard needs mechanism gaussian_mog_hard");
  }
  detail::check_fit_input(data, components);
  detail::check_unit_box(data);
  const Eigen::Index dim = data.dim();
  const auto n_rows = static_cast<double>(data.size());

  FitResult out;
  out.trace.method = "dpmog_hard";
  out.trace.seed = rng.seed();
  out.trace.spec = spec;
  out.trace.noise = calibrate_sigma(spec, dim);
  out.trace.noise_overridden = options.sigma_override.has_value();
  const double sigma = options.sigma_override.value_or(out.trace.noise->sigma);

  RandomStream init_rng = rng.fork(0);
  RandomStream noise_rng = rng.fork(1);
  MixtureModel model = init ? *init : initial_model(components, dim, init_rng);
  if (model.components() != components || model.dim() != dim) {
    throw ConfigError("initial model does not match component count or dimension");
  }
  NoiseLog& log = out.trace.noise_log;
  const double floor = kCountFloorFraction * n_rows;

  for (int t = 0; t < spec.tau; ++t) {
    const std::vector<int> assign = detail::hard_assign(model, data.rows);
    const detail::HardStats stats = detail::hard_stats(data.rows, assign, components);

    RawMixture raw;
    raw.total = n_rows;
    raw.counts.resize(components);
    FitIteration it;
    for (Eigen::Index k = 0; k < components; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const double noisy_count =
          static_cast<double>(stats.sizes[kk]) + sample_gaussian(sigma, 1, noise_rng, &log)(0);
      const double divisor = std::max(noisy_count, floor);
      const Eigen::VectorXd mean = (stats.sums[kk] + sample_gaussian(sigma, dim, noise_rng, &log)) / divisor;
      const Eigen::MatrixXd scatter = detail::centered_scatter(data.rows, assign, static_cast<int>(k), mean) +
                                      sym_pack(sample_gaussian(sigma, dim * (dim + 1) / 2, noise_rng, &log), dim);
      raw.counts(k) = noisy_count;
      raw.means.push_back(mean);
      raw.covariances.push_back(scatter / divisor);
      it.cluster_sizes.push_back(stats.sizes[kk]);
      it.noisy_counts.push_back(noisy_count);
    }
    model = repair_model(raw, &it.repair, &model);
    if (options.record_assignments) it.assignments = assign;
    out.trace.iterations.push_back(std::move(it));
    out.trace.final_raw = std::move(raw);
  }
  out.model = std::move(model);
  return out;
}

/// Private Lloyd iterations with Laplace(sigma) noise on counts and sums,
/// followed by one Gaussian-noised covariance pass over the last partition.
inline FitResult fit_dplloyd_mog(const Dataset& data, Eigen::Index components,
                                 const PrivacySpec& spec, RandomStream& rng,
                                 const FitOptions& options = {}) {
  spec.validate();
  if (spec.mechanism != Mechanism::lloyd_mixed) {
    throw ConfigError("fit_dplloyd_mog needs mechanism lloyd_mixed");
  }
  detail::check_fit_input(data, components);
  detail::check_unit_box(data);
  const Eigen::Index dim = data.dim();
  const auto n_rows = static_cast<double>(data.size());

  FitResult out;
  out.trace.method = "dplloyd_mog";
  out.trace.seed = rng.seed();
  out.trace.spec = spec;
  out.trace.noise = calibrate_sigma(spec, dim);
  out.trace.noise_overridden = options.sigma_override.has_value();
  const double sigma = options.sigma_override.value_or(out.trace.noise->sigma);

  RandomStream init_rng = rng.fork(0);
  RandomStream noise_rng = rng.fork(1);
  std::vector<Eigen::VectorXd> centers = initial_model(components, dim, init_rng).means();
  NoiseLog& log = out.trace.noise_log;
  const double floor = kCountFloorFraction * n_rows;

  std::vector<int> assign;
  Eigen::VectorXd counts(components);
  for (int t = 0; t < spec.tau; ++t) {
    assign = detail::nearest_center(centers, data.rows);
    const detail::HardStats stats = detail::hard_stats(data.rows, assign, components);
    FitIteration it;
    for (Eigen::Index k = 0; k < components; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      counts(k) = static_cast<double>(stats.sizes[kk]) + sample_laplace(sigma, 1, noise_rng, &log)(0);
      const Eigen::VectorXd noisy_sum = stats.sums[kk] + sample_laplace(sigma, dim, noise_rng, &log);
      // A clamped count carries no usable mean; the center stays put.
      if (counts(k) > floor) centers[kk] = noisy_sum / counts(k);
      it.cluster_sizes.push_back(stats.sizes[kk]);
      it.noisy_counts.push_back(counts(k));
      if (counts(k) <= floor) ++it.repair.clamped_counts;
    }
    if (options.record_assignments) it.assignments = assign;
    out.trace.iterations.push_back(std::move(it));
  }

  RawMixture raw;
  raw.total = n_rows;
  raw.counts = counts;
  for (Eigen::Index k = 0; k < components; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const double divisor = std::max(counts(k), floor);
    const Eigen::MatrixXd scatter = detail::centered_scatter(data.rows, assign, static_cast<int>(k), centers[kk]) +
                                    sym_pack(sample_gaussian(sigma, dim * (dim + 1) / 2, noise_rng, &log), dim);
    raw.means.push_back(centers[kk]);
    raw.covariances.push_back(scatter / divisor);
  }
  std::vector<double> uniform(static_cast<std::size_t>(components), 1.0 / static_cast<double>(components));
  const MixtureModel fallback(uniform, centers,
                              std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(components),
                                                           kInitVariance * Eigen::MatrixXd::Identity(dim, dim)));
  RepairEvents final_repair;
  out.model = repair_model(raw, &final_repair, &fallback);
  if (!out.trace.iterations.empty()) {
    out.trace.iterations.back().repair.repaired_covariances = final_repair.repaired_covariances;
  }
  out.trace.final_raw = std::move(raw);
  return out;
}

namespace detail {

// k-means++ seeding: the first center uniform over rows, every later one
// drawn with probability proportional to the squared distance to the
// nearest center chosen so far.
inline std::vector<Eigen::VectorXd> kmeans_plus_plus(const Eigen::MatrixXd& rows, Eigen::Index components,
                                                     RandomStream& rng) {
  const Eigen::Index n = rows.rows();
  std::vector<Eigen::VectorXd> centers;
  auto pick_uniform = [&] {
    return std::min<Eigen::Index>(n - 1, static_cast<Eigen::Index>(rng.uniform(0.0, 1.0) * static_cast<double>(n)));
  };
  centers.push_back(rows.row(pick_uniform()).transpose());
  Eigen::VectorXd d2 = (rows.rowwise() - centers[0].transpose()).rowwise().squaredNorm();
  while (static_cast<Eigen::Index>(centers.size()) < components) {
    const double total = d2.sum();
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      const double u = rng.uniform(0.0, 1.0) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= u && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = pick_uniform();
    }
    centers.push_back(rows.row(pick).transpose());
    d2 = d2.cwiseMin((rows.rowwise() - centers.back().transpose()).rowwise().squaredNorm());
  }
  return centers;
}

// Lloyd iterations from `centers`; an empty cluster keeps its center.
inline std::vector<int> lloyd_iterations(const Eigen::MatrixXd& rows, std::vector<Eigen::VectorXd>& centers,
                                         int iterations) {
  std::vector<int> assign = nearest_center(centers, rows);
  for (int t = 0; t < iterations; ++t) {
    const HardStats stats = hard_stats(rows, assign, static_cast<Eigen::Index>(centers.size()));
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (stats.sizes[k] > 0) centers[k] = stats.sums[k] / static_cast<double>(stats.sizes[k]);
    }
    assign = nearest_center(centers, rows);
  }
  return assign;
}

// Mixture of the k-means partition: cluster shares, centers and repaired
// sample covariances.
inline MixtureModel kmeans_start(const Eigen::MatrixXd& rows, Eigen::Index components, RandomStream& rng) {
  std::vector<Eigen::VectorXd> centers = kmeans_plus_plus(rows, components, rng);
  const std::vector<int> assign = lloyd_iterations(rows, centers, kEmLloydIterations);
  const HardStats stats = hard_stats(rows, assign, components);
  const auto n_rows = static_cast<double>(rows.rows());
  RawMixture raw;
  raw.total = n_rows;
  raw.counts.resize(components);
  for (Eigen::Index k = 0; k < components; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const auto count = static_cast<double>(stats.sizes[kk]);
    raw.counts(k) = count;
    raw.means.push_back(centers[kk]);
    raw.covariances.push_back(centered_scatter(rows, assign, static_cast<int>(k), centers[kk]) /
                              std::max(count, kCountFloorFraction * n_rows));
  }
  std::vector<double> uniform(static_cast<std::size_t>(components), 1.0 / static_cast<double>(components));
  const MixtureModel fallback(uniform, centers,
                              std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(components),
                                                           kInitVariance * Eigen::MatrixXd::Identity(rows.cols(), rows.cols())));
  return repair_model(raw, nullptr, &fallback);
}

inline FitResult em_from(const Dataset& data, Eigen::Index components, int tau, bool hard,
                         std::uint64_t seed, MixtureModel model) {
  const Eigen::Index dim = data.dim();
  const Eigen::Index n = data.size();
  const auto n_rows = static_cast<double>(n);
  const double floor = kCountFloorFraction * n_rows;

  FitResult out;
  out.trace.method = hard ? "em_hard" : "em_soft";
  out.trace.seed = seed;

  for (int t = 0; t < tau; ++t) {
    FitIteration it;
    RawMixture raw;
    raw.total = n_rows;
    raw.counts.resize(components);
    if (hard) {
      const std::vector<int> assign = detail::hard_assign(model, data.rows);
      const detail::HardStats stats = detail::hard_stats(data.rows, assign, components);
      for (Eigen::Index k = 0; k < components; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        const auto count = static_cast<double>(stats.sizes[kk]);
        const double divisor = std::max(count, floor);
        const Eigen::VectorXd mean = stats.sums[kk] / divisor;
        raw.counts(k) = count;
        raw.means.push_back(mean);
        raw.covariances.push_back(detail::centered_scatter(data.rows, assign, static_cast<int>(k), mean) / divisor);
        it.cluster_sizes.push_back(stats.sizes[kk]);
        it.noisy_counts.push_back(count);
      }
    } else {
      it.log_likelihood = detail::log_likelihood(model, data.rows);
      Eigen::MatrixXd gamma(n, components);
      for (Eigen::Index i = 0; i < n; ++i) {
        gamma.row(i) = responsibilities(model, data.rows.row(i).transpose()).transpose();
      }
      std::vector<Eigen::Index> sizes(static_cast<std::size_t>(components), 0);
      for (Eigen::Index i = 0; i < n; ++i) {
        ++sizes[static_cast<std::size_t>(argmax_lowest(gamma.row(i).transpose()))];
      }
      for (Eigen::Index k = 0; k < components; ++k) {
        const double nk = gamma.col(k).sum();
        const double divisor = std::max(nk, floor);
        const Eigen::VectorXd mean = data.rows.transpose() * gamma.col(k) / divisor;
        Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(dim, dim);
        for (Eigen::Index i = 0; i < n; ++i) {
          const Eigen::VectorXd d = data.rows.row(i).transpose() - mean;
          scatter += gamma(i, k) * d * d.transpose();
        }
        raw.counts(k) = nk;
        raw.means.push_back(mean);
        raw.covariances.push_back(scatter / divisor);
        it.cluster_sizes.push_back(sizes[static_cast<std::size_t>(k)]);
        it.noisy_counts.push_back(nk);
      }
    }
    model = repair_model(raw, &it.repair, &model);
    out.trace.iterations.push_back(std::move(it));
    out.trace.final_raw = std::move(raw);
  }
  out.trace.final_log_likelihood = log_likelihood(model, data.rows);
  out.model = std::move(model);
  return out;
}

}  // namespace detail

/// Non-private EM baseline. With hard = true every row is assigned wholly to
/// its argmax component (hard EM); otherwise the usual soft responsibilities
/// are used. The same repair policy as the private fits applies. Given
/// `init`, one run starts there; otherwise each of `restarts` runs starts
/// from a k-means++ seeded k-means partition and the run with the highest
/// final log-likelihood wins (ties to the earliest).
inline FitResult fit_em(const Dataset& data, Eigen::Index components, int tau, bool hard,
                        std::uint64_t seed, const std::optional<MixtureModel>& init = std::nullopt,
                        int restarts = kEmRestarts) {
  detail::check_fit_input(data, components);
  if (tau < 1) throw ConfigError("tau must be >= 1");
  if (restarts < 1) throw ConfigError("restarts must be >= 1");
  if (components > 1 && detail::all_rows_identical(data.rows)) {
    throw NumericalError("degenerate fit: all rows are identical but K > 1");
  }
  if (init) {
    if (init->dim() != data.dim() || init->components() != components) {
      throw std::invalid_argument("initial model does not match K and D");
    }
    return detail::em_from(data, components, tau, hard, seed, *init);
  }
  const RandomStream root(seed);
  std::optional<FitResult> best;
  for (int r = 0; r < restarts; ++r) {
    RandomStream rng = root.fork(static_cast<std::uint64_t>(r));
    FitResult fr = detail::em_from(data, components, tau, hard, seed, detail::kmeans_start(data.rows, components, rng));
    fr.trace.restart = r;
    if (!best || fr.trace.final_log_likelihood > best->trace.final_log_likelihood) best = std::move(fr);
  }
  return std::move(*best);
}

/// Classical Lloyd iterations from initial_model's means, then the sample
/// covariance of each final cluster (repaired like every other fit).
inline FitResult fit_lloyd(const Dataset& data, Eigen::Index components, int tau,
                           std::uint64_t seed) {
  detail::check_fit_input(data, components);
  if (tau < 1) throw ConfigError("tau must be >= 1");
  const Eigen::Index dim = data.dim();
  const auto n_rows = static_cast<double>(data.size());
  RandomStream init_rng = RandomStream(seed).fork(0);
  std::vector<Eigen::VectorXd> centers = initial_model(components, dim, init_rng).means();

  FitResult out;
  out.trace.method = "lloyd";
  out.trace.seed = seed;
  std::vector<int> assign;
  std::vector<Eigen::Index> sizes;
  for (int t = 0; t < tau; ++t) {
    assign = detail::nearest_center(centers, data.rows);
    sizes.assign(static_cast<std::size_t>(components), 0);
    std::vector<Eigen::VectorXd> sums(static_cast<std::size_t>(components), Eigen::VectorXd::Zero(dim));
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      const auto k = static_cast<std::size_t>(assign[static_cast<std::size_t>(i)]);
      ++sizes[k];
      sums[k] += data.rows.row(i).transpose();
    }
    FitIteration it;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      if (sizes[k] > 0) centers[k] = sums[k] / static_cast<double>(sizes[k]);
      it.cluster_sizes.push_back(sizes[k]);
      it.noisy_counts.push_back(static_cast<double>(sizes[k]));
    }
    out.trace.iterations.push_back(std::move(it));
  }
  RawMixture raw;
  raw.total = n_rows;
  raw.counts.resize(components);
  for (Eigen::Index k = 0; k < components; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const auto count = static_cast<double>(sizes[kk]);
    raw.counts(k) = count;
    raw.means.push_back(centers[kk]);
    raw.covariances.push_back(detail::centered_scatter(data.rows, assign, static_cast<int>(k), centers[kk]) /
                              std::max(count, kCountFloorFraction * n_rows));
  }
  std::vector<double> uniform(static_cast<std::size_t>(components), 1.0 / static_cast<double>(components));
  const MixtureModel fallback(uniform, centers,
                              std::vector<Eigen::MatrixXd>(static_cast<std::size_t>(components),
                                                           kInitVariance * Eigen::MatrixXd::Identity(dim, dim)));
  out.model = repair_model(raw, nullptr, &fallback);
  out.trace.final_raw = std::move(raw);
  return out;
}

}  // namespace dpmorse
