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

#include <cmath>
#include <numbers>
#include <sstream>

#include "dpmorse/dataset.hpp"
#include "dpmorse/error.hpp"

namespace dpmorse {
namespace {

Dataset parse(const std::string& text, bool header, std::optional<std::string> label = std::nullopt) {
  std::istringstream in(text);
  return parse_csv(in, header, label);
}

TEST(ParseCsv, PlainMatrix) {
  const Dataset d = parse("1,2\n3,4\n5,6\n", false);
  ASSERT_EQ(d.size(), 3);
  ASSERT_EQ(d.dim(), 2);
  EXPECT_EQ(d.rows(2, 1), 6.0);
  EXPECT_FALSE(d.labels.has_value());
}

TEST(ParseCsv, HeaderAndLabelColumn) {
  const Dataset d = parse("x,y,c\n0,0,0\n1,1,1\n", true, "c");
  ASSERT_EQ(d.size(), 2);
  ASSERT_EQ(d.dim(), 2);
  ASSERT_TRUE(d.labels.has_value());
  EXPECT_EQ(*d.labels, (std::vector<int>{0, 1}));
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"x", "y"}));
}

TEST(ParseCsv, StringLabelsFactorizeLexicographically) {
  const Dataset d = parse("b,1\na,2\nb,3\n", false, "0");
  EXPECT_EQ(*d.labels, (std::vector<int>{1, 0, 1}));
  EXPECT_EQ(d.dim(), 1);
}

TEST(ParseCsv, BadCellNamesRow) {
  try {
    parse("abc,1\n2,3\n", false);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
  }
}

TEST(ParseCsv, RaggedAndEmptyInputsAreDataErrors) {
  EXPECT_THROW(parse("1,2\n3\n", false), DataError);
  EXPECT_THROW(parse("", false), DataError);
  EXPECT_THROW(parse("x,y\n", true), DataError);
  EXPECT_THROW(parse("x,y\n1,2\n", true, "z"), DataError);
}

TEST(ParseCsv, NonFiniteCellsRejected) {
  EXPECT_THROW(parse("nan,1\n", false), DataError);
  EXPECT_THROW(parse("inf,1\n", false), DataError);
}

TEST(Rescale, EndpointsAndMidpoint) {
  Dataset d;
  d.rows = Eigen::MatrixXd(3, 1);
  d.rows << 0, 5, 10;
  const Dataset u = rescale_unit_box(d, std::vector<FeatureBounds>{{0.0, 10.0}});
  EXPECT_DOUBLE_EQ(u.rows(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(u.rows(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(u.rows(2, 0), 1.0);
  EXPECT_EQ(u.bounds_source, BoundsSource::user);
}

TEST(Rescale, ConstantColumnMapsToZero) {
  Dataset d;
  d.rows = Eigen::MatrixXd::Constant(4, 1, 7.0);
  const Dataset u = rescale_unit_box(d);
  EXPECT_TRUE(u.rows.isZero(0.0));
  EXPECT_EQ(u.bounds_source, BoundsSource::data);
}

TEST(Rescale, AffineFormula) {
  Dataset d;
  d.rows = Eigen::MatrixXd(2, 1);
  d.rows << 2, 3;
  const Dataset u = rescale_unit_box(d, std::vector<FeatureBounds>{{0.0, 10.0}});
  // 2(x - lo)/(hi - lo) - 1 by hand.
  EXPECT_NEAR(u.rows(0, 0), -0.6, 1e-15);
  EXPECT_NEAR(u.rows(1, 0), -0.4, 1e-15);
}

TEST(Rescale, ClipsOutsideUserBoundsAndCounts) {
  Dataset d;
  d.rows = Eigen::MatrixXd(3, 1);
  d.rows << -5, 5, 20;
  const Dataset u = rescale_unit_box(d, std::vector<FeatureBounds>{{0.0, 10.0}});
  EXPECT_EQ(u.clipped_values, 2u);
  EXPECT_TRUE(u.in_unit_box());
}

TEST(Rescale, InverseRoundTrip) {
  Dataset d;
  d.rows = Eigen::MatrixXd::Random(20, 3) * 7.0;
  const Dataset u = rescale_unit_box(d);
  EXPECT_TRUE(u.in_unit_box());
  EXPECT_TRUE(inverse_rescale(u.rows, u.bounds).isApprox(d.rows, 1e-12));
}

TEST(Rescale, BadBoundsRejected) {
  Dataset d;
  d.rows = Eigen::MatrixXd::Zero(2, 2);
  EXPECT_THROW(rescale_unit_box(d, std::vector<FeatureBounds>{{0.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(rescale_unit_box(d, std::vector<FeatureBounds>{{1.0, 1.0}, {0.0, 1.0}}), std::invalid_argument);
}

TEST(TwoMoons, NoiselessPointsLieOnArcs) {
  const Dataset d = make_two_moons(4, 0.0, 0);
  ASSERT_EQ(d.size(), 4);
  const Eigen::MatrixXd raw = inverse_rescale(d.rows, d.bounds);
  const std::vector<int>& lab = *d.labels;
  EXPECT_EQ(std::count(lab.begin(), lab.end(), 0), 2);
  EXPECT_EQ(std::count(lab.begin(), lab.end(), 1), 2);
  for (Eigen::Index i = 0; i < 4; ++i) {
    const Eigen::Vector2d c = lab[static_cast<std::size_t>(i)] == 0 ? Eigen::Vector2d(0.0, 0.0)
                                                                   : Eigen::Vector2d(1.0, 0.5);
    EXPECT_NEAR((raw.row(i).transpose() - c).norm(), 1.0, 1e-12);
  }
}

TEST(TwoMoons, DeterministicPerSeed) {
  const Dataset a = make_two_moons(200, 0.05, 7);
  const Dataset b = make_two_moons(200, 0.05, 7);
  const Dataset c = make_two_moons(200, 0.05, 8);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_NE(a.rows, c.rows);
  EXPECT_TRUE(a.in_unit_box());
  EXPECT_EQ(a.bounds_source, BoundsSource::generator);
}

TEST(ThreeArcs, ThreeBalancedLabels) {
  const Dataset d = make_three_arcs(301, 0.05, 3);
  const std::vector<int>& lab = *d.labels;
  EXPECT_EQ(std::count(lab.begin(), lab.end(), 0), 101);
  EXPECT_EQ(std::count(lab.begin(), lab.end(), 1), 100);
  EXPECT_EQ(std::count(lab.begin(), lab.end(), 2), 100);
  EXPECT_TRUE(d.in_unit_box());
}

TEST(Blobs, SeparatedBlobs) {
  const std::vector<Eigen::VectorXd> centers{Eigen::Vector2d(-0.5, 0.0), Eigen::Vector2d(0.5, 0.0)};
  const Dataset d = make_blobs(centers, 0.05, 50, 11);
  ASSERT_EQ(d.size(), 100);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const auto& c = centers[static_cast<std::size_t>((*d.labels)[static_cast<std::size_t>(i)])];
    EXPECT_LT((d.rows.row(i).transpose() - c).norm(), 0.35);
  }
}

TEST(Blobs, ZeroSigmaCopiesCenters) {
  const std::vector<Eigen::VectorXd> centers{Eigen::Vector2d(-0.5, 0.0), Eigen::Vector2d(0.5, 0.25)};
  const Dataset d = make_blobs(centers, 0.0, 5, 1);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    EXPECT_EQ(d.rows.row(i).transpose(), centers[static_cast<std::size_t>(i / 5)]);
  }
}

TEST(Blobs, RepeatableAndMarginChecked) {
  const std::vector<Eigen::VectorXd> centers{Eigen::Vector2d(0.0, 0.0)};
  EXPECT_EQ(make_blobs(centers, 0.1, 30, 4).rows, make_blobs(centers, 0.1, 30, 4).rows);
  const std::vector<Eigen::VectorXd> edge{Eigen::Vector2d(0.95, 0.0)};
  EXPECT_THROW(make_blobs(edge, 0.1, 3, 0), std::invalid_argument);
}

}  // namespace
}  // namespace dpmorse
