#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <random>

#include "oracles.hpp"
#include "orthoai/errors.hpp"
#include "orthoai/geometry.hpp"

using namespace orthoai;
using namespace orthoai::geometry;

namespace {

void expect_vec(const Vec3& a, const Vec3& b, double tol) {
  EXPECT_NEAR(a.x, b.x, tol);
  EXPECT_NEAR(a.y, b.y, tol);
  EXPECT_NEAR(a.z, b.z, tol);
}

std::vector<Vec3> random_points(std::mt19937_64& rng, std::size_t n, double scale = 10.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

}  // namespace

TEST(ToothFrame, AxisAligned) {
  const auto f = build_tooth_frame({0, 0, 0}, {10, 0, 0}, {5, -3, 0}, {5, 3, 0});
  expect_vec(f.e1, {1, 0, 0}, 1e-15);
  expect_vec(f.e2, {0, 1, 0}, 1e-15);
  expect_vec(f.e3, {0, 0, 1}, 1e-15);
  expect_vec(f.origin, {5, 0, 0}, 1e-15);
}

TEST(ToothFrame, ZeroLengthAxisIsDegenerate) {
  try {
    build_tooth_frame({0, 0, 0}, {0, 0, 0}, {5, -3, 0}, {5, 3, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateLandmarks);
  }
}

TEST(ToothFrame, ParallelDirectionsAreDegenerate) {
  EXPECT_THROW(build_tooth_frame({0, 0, 0}, {10, 0, 0}, {0, 0, 0}, {4, 0, 0}), Error);
}

TEST(ToothFrame, Rotated30DegreesAboutZ) {
  const auto R = Rotation::about_axis({0, 0, 1}, M_PI / 6);
  const auto f = build_tooth_frame(R.apply({0, 0, 0}), R.apply({10, 0, 0}), R.apply({5, -3, 0}), R.apply({5, 3, 0}));
  const double c = std::cos(M_PI / 6), s = std::sin(M_PI / 6);
  expect_vec(f.e1, {c, s, 0}, 1e-9);
  expect_vec(f.e2, {-s, c, 0}, 1e-9);
  expect_vec(f.e3, {0, 0, 1}, 1e-9);
}

TEST(ToothFrame, OrthonormalRightHandedAndEquivariant) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 200; ++t) {
    const Vec3 m{g(rng), g(rng), g(rng)}, d = m + Vec3{8 + g(rng), g(rng), g(rng)};
    const Vec3 l{4 + g(rng), -3 + g(rng), g(rng)}, b{4 + g(rng), 3 + g(rng), g(rng)};
    const auto f = build_tooth_frame(m, d, l, b);
    EXPECT_NEAR(norm(f.e1), 1, 1e-9);
    EXPECT_NEAR(norm(f.e2), 1, 1e-9);
    EXPECT_NEAR(norm(f.e3), 1, 1e-9);
    EXPECT_NEAR(dot(f.e1, f.e2), 0, 1e-9);
    EXPECT_NEAR(dot(f.e1, f.e3), 0, 1e-9);
    EXPECT_NEAR(f.determinant(), 1, 1e-9);
    const auto R = Rotation::about_axis(normalized({g(rng), g(rng), g(rng)}), g(rng));
    const auto fr = build_tooth_frame(R.apply(m), R.apply(d), R.apply(l), R.apply(b));
    EXPECT_LE(max_axis_angle(fr, R.apply(f)), 1e-7);
  }
}

TEST(Knn, CollinearExample) {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {2, 0, 0}, {10, 0, 0}};
  const auto t = knn(pts, 1);
  EXPECT_EQ(t.index, (std::vector<std::int32_t>{1, 0, 1, 2}));
}

TEST(Knn, TooFewPoints) {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}};
  EXPECT_THROW(knn(pts, 2), Error);
}

TEST(Knn, FullNeighbourhoodIsPermutation) {
  std::mt19937_64 rng(5);
  const auto pts = random_points(rng, 12);
  const auto t = knn(pts, 11);
  for (std::size_t i = 0; i < 12; ++i) {
    std::vector<int> row(t.row(i).begin(), t.row(i).end());
    std::sort(row.begin(), row.end());
    std::vector<int> expect;
    for (int j = 0; j < 12; ++j) {
      if (j != static_cast<int>(i)) expect.push_back(j);
    }
    EXPECT_EQ(row, expect);
  }
}

TEST(Knn, MatchesBruteForce) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> nd(22, 500), kd(1, 20), dd(1, 8);
  for (int trial = 0; trial < 40; ++trial) {
    const auto n = static_cast<std::size_t>(nd(rng));
    const auto k = static_cast<std::size_t>(kd(rng));
    const auto dim = static_cast<std::size_t>(dd(rng));
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> data(n * dim);
    for (auto& v : data) v = u(rng);
    if (trial % 4 == 0) {
      // quantized coordinates force distance ties
      for (auto& v : data) v = std::round(v * 2) / 2;
    }
    const auto t = knn(data, dim, k);
    const auto ref = oracle::brute_knn(data, dim, k);
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_EQ(std::vector<int>(t.row(i).begin(), t.row(i).end()), ref[i]) << "trial " << trial << " row " << i;
    }
  }
}

TEST(Fps, SquareDiagonal) {
  const std::vector<Vec3> sq{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  const auto idx = farthest_point_sample(sq, 2, 0);
  EXPECT_EQ(idx, (std::vector<std::size_t>{0, 3}));
}

TEST(Fps, AllPointsDeterministic) {
  std::mt19937_64 rng(2);
  const auto pts = random_points(rng, 30);
  const auto a = farthest_point_sample(pts, 30);
  const auto b = farthest_point_sample(pts, 30);
  EXPECT_EQ(a, b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> all(30);
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(sorted, all);
  EXPECT_THROW(farthest_point_sample(pts, 31), Error);
}

TEST(Fps, SpreadsBetterThanRandomSubsets) {
  std::mt19937_64 rng(9);
  auto min_pairwise = [](const std::vector<Vec3>& p, const std::vector<std::size_t>& idx) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = a + 1; b < idx.size(); ++b) best = std::min(best, distance(p[idx[a]], p[idx[b]]));
    }
    return best;
  };
  for (int trial = 0; trial < 20; ++trial) {
    const auto pts = random_points(rng, 200);
    const double fps = min_pairwise(pts, farthest_point_sample(pts, 50));
    std::vector<std::size_t> perm(200);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    perm.resize(50);
    EXPECT_GE(fps, min_pairwise(pts, perm));
  }
}

TEST(Pca, SegmentIsRankOne) {
  std::vector<Vec3> pts;
  for (int i = 0; i <= 10; ++i) pts.push_back({i / 10.0, 0, 0});
  const auto pa = principal_axes(pts);
  EXPECT_NEAR(std::abs(pa.frame.e1.x), 1.0, 1e-12);
  EXPECT_NEAR(pa.eigenvalues[1], 0.0, 1e-15);
  EXPECT_NEAR(pa.eigenvalues[2], 0.0, 1e-15);
}

TEST(Pca, RepeatedPointIsDegenerate) {
  const std::vector<Vec3> pts(5, Vec3{1, 2, 3});
  try {
    principal_axes(pts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateCloud);
  }
}

TEST(Pca, EllipsoidAgainstIndependentSolver) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::vector<Vec3> pts;
  for (int i = 0; i < 2000; ++i) {
    Vec3 d{g(rng), g(rng), g(rng)};
    d = normalized(d);
    pts.push_back({4 * d.x, 2 * d.y, 1 * d.z});
  }
  const auto pa = principal_axes(pts, Vec3{1, 0, 0});
  EXPECT_LE(std::acos(std::min(1.0, std::abs(pa.frame.e1.x))), 10 * M_PI / 180);

  // oracle: Eigen's general (non-symmetric) eigen-solver on the covariance
  Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
  const Vec3 mu = centroid(pts);
  for (const auto& p : pts) {
    const Eigen::Vector3d d(p.x - mu.x, p.y - mu.y, p.z - mu.z);
    C += d * d.transpose();
  }
  C /= static_cast<double>(pts.size());
  Eigen::EigenSolver<Eigen::Matrix3d> es(C);
  std::vector<double> ev{es.eigenvalues()[0].real(), es.eigenvalues()[1].real(), es.eigenvalues()[2].real()};
  std::sort(ev.rbegin(), ev.rend());
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(pa.eigenvalues[static_cast<std::size_t>(i)], ev[static_cast<std::size_t>(i)], 1e-9);
}

TEST(Pca, ReconstructsCovariance) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto pts = random_points(rng, 40, 3.0);
    const auto pa = principal_axes(pts);
    EXPECT_GE(pa.eigenvalues[2], 0.0);
    EXPECT_GE(pa.eigenvalues[0], pa.eigenvalues[1]);
    EXPECT_GE(pa.eigenvalues[1], pa.eigenvalues[2]);
    EXPECT_NEAR(pa.frame.determinant(), 1.0, 1e-9);
    Eigen::Matrix3d C = Eigen::Matrix3d::Zero(), R = Eigen::Matrix3d::Zero();
    const Vec3 mu = centroid(pts);
    for (const auto& p : pts) {
      const Eigen::Vector3d d(p.x - mu.x, p.y - mu.y, p.z - mu.z);
      C += d * d.transpose();
    }
    C /= static_cast<double>(pts.size());
    for (std::size_t i = 0; i < 3; ++i) {
      const auto& e = pa.frame.axis(i);
      const Eigen::Vector3d v(e.x, e.y, e.z);
      R += pa.eigenvalues[i] * v * v.transpose();
    }
    EXPECT_LE((R - C).norm() / C.norm(), 1e-8);
  }
}

TEST(Pca, SignFollowsReference) {
  std::mt19937_64 rng(8);
  const auto pts = random_points(rng, 50);
  const Vec3 ref{0.3, -0.2, 0.9};
  const auto pa = principal_axes(pts, ref);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_GE(dot(pa.frame.axis(i), ref), 0.0);
  EXPECT_NEAR(pa.frame.determinant(), 1.0, 1e-9);
}
