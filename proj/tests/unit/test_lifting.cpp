#include <gtest/gtest.h>

#include <random>

#include "orthoai/lifting.hpp"
#include "orthoai/pipeline.hpp"

using namespace orthoai;
using namespace orthoai::lifting;
using geometry::Vec3;

namespace {

void sample_ellipsoid(std::mt19937_64& rng, const Vec3& center, const std::array<double, 3>& axes, std::size_t n,
                      std::uint8_t label, std::vector<Vec3>& pts, std::vector<std::uint8_t>& labels, bool solid) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 d = geometry::normalized({g(rng), g(rng), g(rng)});
    if (solid) d = d * std::cbrt(u(rng));
    pts.push_back(center + Vec3{axes[0] * d.x, axes[1] * d.y, axes[2] * d.z});
    labels.push_back(label);
  }
}

}  // namespace

TEST(Lift, EllipsoidCentroid) {
  std::mt19937_64 rng(1);
  std::vector<Vec3> pts;
  std::vector<std::uint8_t> labels;
  const Vec3 center{10, -5, 2};
  sample_ellipsoid(rng, center, {4.0, 3.0, 5.0}, 500, 7, pts, labels, false);
  const auto r = lift(pts, labels, {});
  ASSERT_EQ(r.teeth.size(), 1u);
  EXPECT_LT(geometry::distance(r.teeth[0].centroid, center), 0.2);
  EXPECT_EQ(r.teeth[0].label.class_index(), 7);
  EXPECT_EQ(r.teeth[0].support, 500u);
  EXPECT_DOUBLE_EQ(r.teeth[0].confidence, 1.0);
  EXPECT_NEAR(std::abs(r.teeth[0].axes.e3.z), 1.0, 1e-2);
  EXPECT_NEAR(r.teeth[0].axes.determinant(), 1.0, 1e-9);
}

TEST(Lift, SurfaceSemiAxes) {
  // p = c + A xi with xi uniform on the sphere has variance a^2 / 3 per axis
  std::mt19937_64 rng(2);
  std::vector<Vec3> pts;
  std::vector<std::uint8_t> labels;
  sample_ellipsoid(rng, {0, 20, 0}, {4.0, 3.0, 5.0}, 20000, 3, pts, labels, false);
  const auto r = lift(pts, labels, {});
  ASSERT_EQ(r.teeth.size(), 1u);
  // e3 is the up axis (5 mm), the others follow the arch tangent
  EXPECT_NEAR(r.teeth[0].semi_axes[2], 5.0, 0.1);
  EXPECT_NEAR(std::max(r.teeth[0].semi_axes[0], r.teeth[0].semi_axes[1]), 4.0, 0.1);
}

TEST(Lift, MinimumSupportBoundary) {
  std::vector<Vec3> pts;
  std::vector<std::uint8_t> labels;
  for (int i = 0; i < 9; ++i) {
    pts.push_back({static_cast<double>(i), static_cast<double>(i % 3), static_cast<double>(i % 2)});
    labels.push_back(4);
  }
  auto r = lift(pts, labels, {});
  EXPECT_TRUE(r.teeth.empty());
  ASSERT_EQ(r.dropped.size(), 1u);
  EXPECT_EQ(r.dropped[0].class_index, 4);
  EXPECT_EQ(r.dropped[0].support, 9u);

  pts.push_back({0.5, 2.5, 1});
  labels.push_back(4);
  r = lift(pts, labels, {});
  EXPECT_EQ(r.teeth.size(), 1u);
  EXPECT_TRUE(r.dropped.empty());
}

TEST(Lift, TwoClustersExactMeans) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<Vec3> pts;
  std::vector<std::uint8_t> labels;
  std::vector<double> conf;
  Vec3 sum_a, sum_b;
  for (int i = 0; i < 40; ++i) {
    const Vec3 a{-10 + g(rng), g(rng), g(rng)}, b{10 + g(rng), g(rng), 0.5 * g(rng)};
    pts.push_back(a);
    labels.push_back(1);
    conf.push_back(0.5);
    sum_a += a;
    pts.push_back(b);
    labels.push_back(9);
    conf.push_back(1.0);
    sum_b += b;
    pts.push_back({0, 0, 0});  // gingiva is ignored
    labels.push_back(0);
    conf.push_back(1.0);
  }
  const auto r = lift(pts, labels, conf);
  ASSERT_EQ(r.teeth.size(), 2u);
  EXPECT_LT(geometry::distance(r.teeth[0].centroid, sum_a / 40.0), 1e-12);
  EXPECT_LT(geometry::distance(r.teeth[1].centroid, sum_b / 40.0), 1e-12);
  EXPECT_DOUBLE_EQ(r.teeth[0].confidence, 0.5);
  EXPECT_EQ(r.find(21)->label.class_index(), 9);
  EXPECT_EQ(r.find(48), nullptr);
}

TEST(Lift, FrameEquivariantUnderVerticalRotation) {
  std::mt19937_64 rng(5);
  std::vector<Vec3> pts;
  std::vector<std::uint8_t> labels;
  sample_ellipsoid(rng, {-8, 4, 0}, {4.0, 2.5, 5.0}, 800, 2, pts, labels, true);
  sample_ellipsoid(rng, {8, 4, 0}, {4.0, 2.5, 5.0}, 800, 10, pts, labels, true);
  const auto base = lift(pts, labels, {});
  const auto R = geometry::Rotation::about_axis({0, 0, 1}, 0.7);
  std::vector<Vec3> rotated;
  for (const auto& p : pts) rotated.push_back(R.apply(p));
  const auto moved = lift(rotated, labels, {});
  ASSERT_EQ(moved.teeth.size(), 2u);
  for (std::size_t t = 0; t < 2; ++t) {
    EXPECT_LT(geometry::distance(moved.teeth[t].centroid, R.apply(base.teeth[t].centroid)), 1e-9);
    EXPECT_LT(geometry::max_axis_angle(moved.teeth[t].axes, R.apply(base.teeth[t].axes)), 1e-6);
  }
}

TEST(Lift, RecordsUseCaseLeverArm) {
  const auto c = cases::generate_synthetic_case(0);
  const auto g = cases::ArchGeometry::from_case(c);
  ToothEstimate e;
  e.label = c.teeth[0].tooth;
  e.semi_axes = {1, 2, 3};
  ToothEstimate missing;
  missing.label = cases::FdiLabel::from_code(48);
  missing.semi_axes = {1, 2, 3};
  const std::vector<ToothEstimate> est{e, missing};
  const auto recs = pipeline::records_from_estimates(est, g);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_DOUBLE_EQ(*recs[0].lever_arm_mm, g.crowns[0].semi_axes[2]);
  EXPECT_DOUBLE_EQ(*recs[1].lever_arm_mm, 3.0);
}
