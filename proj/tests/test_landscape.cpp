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

#include "dpmorse/landscape.hpp"
#include "test_support.hpp"

namespace dpmorse {
namespace {

using testing::isotropic;

Landscape symmetric_pair() {
  return Landscape(isotropic({Eigen::Vector2d(-0.5, 0.0), Eigen::Vector2d(0.5, 0.0)}, 0.04));
}

Landscape line_pair_1d() {
  return Landscape(isotropic({Eigen::VectorXd::Constant(1, -2.0), Eigen::VectorXd::Constant(1, 2.0)}, 1.0));
}

TEST(Gradient, ZeroAtSingleMean) {
  const Landscape land(isotropic({Eigen::Vector2d(0.2, -0.1)}, 1.0));
  EXPECT_LT(grad_log_density(land, Eigen::Vector2d(0.2, -0.1)).norm(), 1e-15);
}

TEST(Gradient, SymmetricMidpointHasNoAxialComponent) {
  const Landscape land = symmetric_pair();
  EXPECT_EQ(grad_log_density(land, Eigen::Vector2d(0.0, 0.17))(0), 0.0);
}

TEST(Hessian, StandardGaussianIsMinusIdentity) {
  const Landscape land(isotropic({Eigen::Vector2d::Zero()}, 1.0));
  for (const Eigen::Vector2d& x : {Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(3.0, -2.0)}) {
    EXPECT_TRUE(hessian_log_density(land, x).isApprox(-Eigen::Matrix2d::Identity(), 1e-14));
  }
}

TEST(Derivatives, MatchFiniteDifferencesOnRandomModels) {
  RandomStream rng(2024);
  for (int c = 0; c < 200; ++c) {
    const Landscape land(testing::random_model(rng));
    const Eigen::VectorXd x = testing::random_point(rng, land.dim(), 1.2);
    EXPECT_LE(testing::relative_error(testing::fd_gradient(land, x), grad_log_density(land, x)), 1e-6)
        << "case " << c;
    EXPECT_LE(testing::relative_error(testing::fd_hessian(land, x), hessian_log_density(land, x)), 1e-5)
        << "case " << c;
  }
}

TEST(Increment, AgreesWithDirectDifference) {
  RandomStream rng(4);
  for (int c = 0; c < 100; ++c) {
    const Landscape land(testing::random_model(rng));
    const Eigen::VectorXd x = testing::random_point(rng, land.dim(), 1.0);
    const Eigen::VectorXd d = testing::random_point(rng, land.dim(), 1e-2);
    EXPECT_NEAR(log_density_increment(land, x, d), log_density(land, x + d) - log_density(land, x), 1e-10);
  }
}

TEST(Flow, StartAtModeReturnsImmediately) {
  const Landscape land(isotropic({Eigen::Vector2d(0.1, 0.2)}, 0.3));
  const FlowResult fr = flow_ascend(land, Eigen::Vector2d(0.1, 0.2));
  EXPECT_TRUE(fr.converged);
  EXPECT_EQ(fr.steps, 0);
  EXPECT_EQ(fr.endpoint, Eigen::Vector2d(0.1, 0.2));
}

// Oracle: bisection on d/dx ln p over [1, 3], where it changes sign once.
double positive_mode_by_bisection(const Landscape& land) {
  double lo = 1.0;
  double hi = 3.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (grad_log_density(land, Eigen::VectorXd::Constant(1, mid))(0) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

TEST(Flow, OneDimensionalPairReachesPositiveMode) {
  const Landscape land = line_pair_1d();
  const double root = positive_mode_by_bisection(land);
  for (FlowIntegrator integ : {FlowIntegrator::linearly_implicit, FlowIntegrator::forward_euler}) {
    FlowOptions opt;
    opt.integrator = integ;
    const FlowResult fr = flow_ascend(land, Eigen::VectorXd::Constant(1, 1.9), opt);
    ASSERT_TRUE(fr.converged);
    EXPECT_NEAR(fr.endpoint(0), root, 1e-8);
  }
}

TEST(Flow, MonotoneOnEveryAcceptedStep) {
  RandomStream rng(99);
  for (int c = 0; c < 100; ++c) {
    const Landscape land(testing::random_model(rng));
    const Eigen::VectorXd x0 = testing::random_point(rng, land.dim(), 1.5);
    for (FlowIntegrator integ : {FlowIntegrator::linearly_implicit, FlowIntegrator::forward_euler}) {
      FlowOptions opt;
      opt.integrator = integ;
      opt.record_trace = true;
      const FlowResult fr = flow_ascend(land, x0, opt);
      ASSERT_EQ(fr.increments.size(), static_cast<std::size_t>(fr.steps));
      for (std::size_t s = 0; s < fr.increments.size(); ++s) {
        EXPECT_GE(fr.increments[s], 0.0);
        const double a = fr.log_density_trace[s];
        const double b = fr.log_density_trace[s + 1];
        // Direct evaluations of ln p carry rounding of order eps times the
        // largest per-component log term; the accurate increment above is exact.
        const Eigen::VectorXd terms = land.model().weighted_log_densities(fr.endpoint);
        const double rounding = 32.0 * std::numeric_limits<double>::epsilon() * (1.0 + terms.cwiseAbs().maxCoeff());
        EXPECT_GE(b, a - rounding);
      }
    }
  }
}

TEST(Flow, RejectsBadOptions) {
  FlowOptions opt;
  opt.step = 0.0;
  EXPECT_THROW(flow_ascend(symmetric_pair(), Eigen::Vector2d::Zero(), opt), std::invalid_argument);
}

TEST(Classify, SymmetricPairCriticalPoints) {
  const Landscape land = symmetric_pair();
  const CriticalPoint saddle = classify_point(land, Eigen::Vector2d::Zero());
  EXPECT_EQ(saddle.index, 1);
  EXPECT_TRUE(saddle.hyperbolic);
  EXPECT_NEAR(saddle.f_value, -log_density(land, Eigen::Vector2d::Zero()), 1e-15);
}

TEST(Refine, ExactModeIsIndexZero) {
  const Landscape land(isotropic({Eigen::Vector2d(0.3, 0.3)}, 0.2));
  const CriticalPoint cp = refine_critical(land, Eigen::Vector2d(0.3, 0.3));
  EXPECT_TRUE(cp.converged);
  EXPECT_EQ(cp.index, 0);
  EXPECT_EQ(cp.location, Eigen::Vector2d(0.3, 0.3));
}

TEST(Refine, SymmetricSaddleFromPerpendicularOffset) {
  const Landscape land = symmetric_pair();
  for (bool follow : {false, true}) {
    RefineOptions ro;
    if (follow) ro.target_index = 1;
    const CriticalPoint cp = refine_critical(land, Eigen::Vector2d(0.0, 1e-3), ro);
    ASSERT_TRUE(cp.converged);
    EXPECT_EQ(cp.index, 1);
    EXPECT_LT(cp.location.norm(), 1e-8);
  }
}

TEST(Refine, TailStartNeverClaimsFalseConvergence) {
  const Landscape land = symmetric_pair();
  RandomStream rng(8);
  for (int c = 0; c < 30; ++c) {
    const Eigen::VectorXd x0 = testing::random_point(rng, 2, 6.0);
    const CriticalPoint cp = refine_critical(land, x0);
    if (cp.converged) {
      EXPECT_LE(cp.gradient_norm, RefineOptions{}.grad_tol);
    }
  }
}

TEST(Basin, CenterMapsToItself) {
  const Landscape land = symmetric_pair();
  const auto& c = land.model().means();
  for (Eigen::Index k = 0; k < 2; ++k) {
    const BasinAssignment b = assign_basin(land, c[static_cast<std::size_t>(k)], c, 0.25);
    EXPECT_EQ(b.center, k);
    EXPECT_FALSE(b.boundary);
    EXPECT_FALSE(b.low_confidence);
  }
}

TEST(Basin, SymmetryHyperplaneTiesLowAndFlagsBoundary) {
  const Landscape land = symmetric_pair();
  const BasinAssignment b = assign_basin(land, Eigen::Vector2d(0.0, 0.3), land.model().means(), 0.25);
  EXPECT_EQ(b.center, 0);
  EXPECT_TRUE(b.boundary);
}

TEST(Basin, NearestCenterTieRule) {
  const std::vector<Eigen::VectorXd> c{Eigen::Vector2d(-1, 0), Eigen::Vector2d(1, 0)};
  const auto [idx, tie] = nearest_center_index(c, Eigen::Vector2d(0, 5));
  EXPECT_EQ(idx, 0);
  EXPECT_TRUE(tie);
}

}  // namespace
}  // namespace dpmorse
