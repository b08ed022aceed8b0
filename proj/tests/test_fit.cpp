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


#include <gtest/gtest.h>

#include "dpmorse/dataset.hpp"
#include "dpmorse/error.hpp"
#include "dpmorse/fit.hpp"
#include "dpmorse/metrics.hpp"

namespace dpmorse {
namespace {

const std::vector<Eigen::VectorXd> kBlobCenters{Eigen::Vector2d(-0.5, 0.0), Eigen::Vector2d(0.5, 0.0)};

double worst_center_error(const MixtureModel& m, const std::vector<Eigen::VectorXd>& truth) {
  double worst = 0.0;
  for (const auto& t : truth) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& mu : m.means()) best = std::min(best, (mu - t).norm());
    worst = std::max(worst, best);
  }
  return worst;
}

void expect_models_equal(const MixtureModel& a, const MixtureModel& b, double tol) {
  ASSERT_EQ(a.components(), b.components());
  for (Eigen::Index k = 0; k < a.components(); ++k) {
    EXPECT_NEAR(a.weight(k), b.weight(k), tol) << "component " << k;
    EXPECT_LE((a.mean(k) - b.mean(k)).cwiseAbs().maxCoeff(), tol) << "component " << k;
    EXPECT_LE((a.covariance(k) - b.covariance(k)).cwiseAbs().maxCoeff(), tol) << "component " << k;
  }
}

TEST(InitialModel, DataIndependentAndInBox) {
  RandomStream a(3);
  RandomStream b(3);
  const MixtureModel m = initial_model(5, 3, a);
  const MixtureModel n = initial_model(5, 3, b);
  for (Eigen::Index k = 0; k < 5; ++k) {
    EXPECT_EQ(m.mean(k), n.mean(k));
    EXPECT_LE(m.mean(k).cwiseAbs().maxCoeff(), 1.0);
    EXPECT_EQ(m.covariance(k), kInitVariance * Eigen::MatrixXd::Identity(3, 3));
    EXPECT_DOUBLE_EQ(m.weight(k), 0.2);
  }
}

TEST(DpMogHard, RecoversSeparatedBlobMeans) {
  const Dataset d = make_blobs(kBlobCenters, 0.03, 200, 21);
  // Uniform initialization leaves a component empty for many seeds; this seed
  // splits the blobs, as the non-private oracle from the same start confirms.
  RandomStream init_rng = RandomStream(8).fork(0);
  const FitResult oracle = fit_em(d, 2, 5, true, 0, initial_model(2, 2, init_rng));
  ASSERT_LT(worst_center_error(oracle.model, kBlobCenters), 0.1);
  RandomStream rng(8);
  const FitResult fr = fit_dpmog_hard(d, 2, {10.0, 1e-5, 5, Mechanism::gaussian_mog_hard}, std::nullopt, rng);
  EXPECT_LT(worst_center_error(fr.model, kBlobCenters), 0.1);
  EXPECT_EQ(fr.trace.iterations.size(), 5u);
  // Per iteration: one count, D sum entries and D(D+1)/2 moment entries per component.
  EXPECT_EQ(fr.trace.noise_log.gaussian_draws, 5 * 2 * (1 + 2 + 3));
}

TEST(DpMogHard, ZeroNoiseEqualsHardEm) {
  const Dataset d = make_blobs(kBlobCenters, 0.03, 200, 21);
  RandomStream init_rng(77);
  const MixtureModel init = initial_model(2, 2, init_rng);
  RandomStream rng(5);
  FitOptions opt;
  opt.sigma_override = 0.0;
  const FitResult dp = fit_dpmog_hard(d, 2, {10.0, 1e-5, 5, Mechanism::gaussian_mog_hard}, init, rng, opt);
  const FitResult em = fit_em(d, 2, 5, true, 0, init);
  EXPECT_TRUE(dp.trace.noise_overridden);
  expect_models_equal(dp.model, em.model, 0.0);
}

TEST(DpMogHard, SeededRunIsReproducible) {
  const Dataset d = make_two_moons(200, 0.05, 1);
  RandomStream a(9);
  RandomStream b(9);
  const PrivacySpec spec{1.0, 1e-5, 10, Mechanism::gaussian_mog_hard};
  expect_models_equal(fit_dpmog_hard(d, 4, spec, std::nullopt, a).model,
                      fit_dpmog_hard(d, 4, spec, std::nullopt, b).model, 0.0);
}

TEST(DpMogHard, InputChecks) {
  Dataset d = make_blobs(kBlobCenters, 0.03, 5, 1);
  RandomStream rng(1);
  const PrivacySpec spec{1.0, 1e-5, 3, Mechanism::gaussian_mog_hard};
  EXPECT_THROW(fit_dpmog_hard(d, 11, spec, std::nullopt, rng), ConfigError);
  EXPECT_THROW(fit_dpmog_hard(d, 2, {1.0, 1e-5, 3, Mechanism::lloyd_mixed}, std::nullopt, rng), ConfigError);
  d.rows(0, 0) = 3.0;
  EXPECT_THROW(fit_dpmog_hard(d, 2, spec, std::nullopt, rng), DataError);
}

TEST(DpLloyd, ZeroNoiseEqualsLloydPlusCovariance) {
  const Dataset d = make_two_moons(300, 0.05, 4);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    RandomStream rng(seed);
    FitOptions opt;
    opt.sigma_override = 0.0;
    const FitResult dp = fit_dplloyd_mog(d, 4, {1.0, 1e-5, 6, Mechanism::lloyd_mixed}, rng, opt);
    const FitResult plain = fit_lloyd(d, 4, 6, seed);
    expect_models_equal(dp.model, plain.model, 0.0);
  }
}

TEST(DpLloyd, SinglePointZeroNoise) {
  Dataset d;
  d.rows = Eigen::MatrixXd(1, 2);
  d.rows << 0.3, -0.2;
  RandomStream rng(0);
  FitOptions opt;
  opt.sigma_override = 0.0;
  const FitResult fr = fit_dplloyd_mog(d, 1, {1.0, 1e-5, 3, Mechanism::lloyd_mixed}, rng, opt);
  EXPECT_EQ(fr.model.mean(0), Eigen::Vector2d(0.3, -0.2));
  EXPECT_TRUE(fr.model.covariance(0).isApprox(kEigFloor * Eigen::Matrix2d::Identity(), 1e-12));
}

TEST(DpLloyd, RecoversBlobMeansInMostSeeds) {
  const Dataset d = make_blobs(kBlobCenters, 0.03, 200, 33);
  int good = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RandomStream rng(seed);
    const FitResult fr = fit_dplloyd_mog(d, 2, {10.0, 1e-5, 5, Mechanism::lloyd_mixed}, rng);
    if (worst_center_error(fr.model, kBlobCenters) < 0.15) ++good;
  }
  EXPECT_GE(good, 4);
}

TEST(Em, SingleComponentIsSampleMoments) {
  const Dataset d = make_two_moons(100, 0.05, 2);
  const FitResult fr = fit_em(d, 1, 3, false, 0);
  const Eigen::VectorXd mean = d.rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = d.rows.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(d.size());
  EXPECT_TRUE(fr.model.mean(0).isApprox(mean, 1e-12));
  EXPECT_TRUE(fr.model.covariance(0).isApprox(cov, 1e-12));
}

TEST(Em, HardEmSeparatesBlobs) {
  const Dataset d = make_blobs(kBlobCenters, 0.05, 100, 8);
  const FitResult fr = fit_em(d, 2, 10, true, 4);
  EXPECT_EQ(adjusted_rand_index(detail::hard_assign(fr.model, d.rows), *d.labels), 1.0);
}

TEST(Em, SoftLikelihoodNonDecreasing) {
  const Dataset d = make_two_moons(200, 0.1, 6);
  RandomStream rng(2);
  const FitResult fr = fit_em(d, 3, 15, false, 0, initial_model(3, 2, rng));
  for (std::size_t t = 1; t < fr.trace.iterations.size(); ++t) {
    EXPECT_GE(fr.trace.iterations[t].log_likelihood, fr.trace.iterations[t - 1].log_likelihood - 1e-9);
  }
}

TEST(Em, IdenticalRowsWithSeveralComponentsIsNumericalError) {
  Dataset d;
  d.rows = Eigen::MatrixXd::Constant(5, 2, 0.1);
  EXPECT_THROW(fit_em(d, 2, 3, true, 0), NumericalError);
}

TEST(Lloyd, Deterministic) {
  const Dataset d = make_two_moons(100, 0.05, 2);
  expect_models_equal(fit_lloyd(d, 3, 5, 11).model, fit_lloyd(d, 3, 5, 11).model, 0.0);
}

}  // namespace
}  // namespace dpmorse
