#include "orthoai/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <limits>
#include <string>

#include "orthoai/errors.hpp"

namespace orthoai::geometry {

namespace {

constexpr double kMinLandmarkSpan = 1e-6;
constexpr double kParallelTolerance = 1e-6;
constexpr double kSignTieTolerance = 1e-12;

void fix_sign(Vec3& axis, const std::optional<Vec3>& reference) {
  if (reference) {
    const double d = dot(axis, *reference);
    if (std::abs(d) > kSignTieTolerance) {
      if (d < 0) axis = -axis;
      return;
    }
  }
  // tie: largest-magnitude component positive (first one wins on equal magnitude)
  std::size_t best = 0;
  for (std::size_t i = 1; i < 3; ++i) {
    if (std::abs(axis[i]) > std::abs(axis[best])) best = i;
  }
  if (axis[best] < 0) axis = -axis;
}

}  // namespace

Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  return a / n;
}

Rotation Rotation::about_axis(const Vec3& axis, double radians) {
  const Vec3 u = normalized(axis);
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  const double t = 1.0 - c;
  Rotation r;
  r.m = {t * u.x * u.x + c,       t * u.x * u.y - s * u.z, t * u.x * u.z + s * u.y,
         t * u.x * u.y + s * u.z, t * u.y * u.y + c,       t * u.y * u.z - s * u.x,
         t * u.x * u.z - s * u.y, t * u.y * u.z + s * u.x, t * u.z * u.z + c};
  return r;
}

Rotation Rotation::operator*(const Rotation& o) const {
  Rotation r;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += m[i * 3 + k] * o.m[k * 3 + j];
      r.m[i * 3 + j] = acc;
    }
  }
  return r;
}

Frame3 build_tooth_frame(const Vec3& mesial, const Vec3& distal, const Vec3& lingual,
                         const Vec3& buccal) {
  const Vec3 md = distal - mesial;
  const Vec3 bl = buccal - lingual;
  const double md_len = norm(md);
  const double bl_len = norm(bl);
  if (!(md_len > kMinLandmarkSpan)) {
    throw Error(Errc::DegenerateLandmarks, "mesial and distal landmarks coincide");
  }
  if (!(bl_len > kMinLandmarkSpan)) {
    throw Error(Errc::DegenerateLandmarks, "buccal and lingual landmarks coincide");
  }
  Frame3 f;
  f.e1 = md / md_len;
  const Vec3 u2 = bl / bl_len;
  const Vec3 ortho = u2 - f.e1 * dot(u2, f.e1);
  const double ortho_len = norm(ortho);
  if (!(ortho_len > kParallelTolerance)) {
    throw Error(Errc::DegenerateLandmarks, "mesiodistal and buccolingual directions are parallel");
  }
  f.e2 = ortho / ortho_len;
  f.e3 = normalized(cross(f.e1, f.e2));
  f.origin = (mesial + distal + lingual + buccal) * 0.25;
  return f;
}

NeighborTable knn(std::span<const double> data, std::size_t dim, std::size_t k) {
  if (k == 0) throw Error(Errc::InvalidConfig, "k must be positive");
  if (dim == 0 || data.size() % dim != 0) {
    throw Error(Errc::ShapeMismatch, "data size is not a multiple of the row dimension");
  }
  const std::size_t n = data.size() / dim;
  if (n <= k) {
    throw Error(Errc::TooFewPoints,
                "knn needs more than k=" + std::to_string(k) + " points, got " + std::to_string(n));
  }
  NeighborTable table{n, k, std::vector<std::int32_t>(n * k)};
  std::vector<double> best_d(k);
  std::vector<std::int32_t> best_i(k);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = data.data() + i * dim;
    std::size_t filled = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double* xj = data.data() + j * dim;
      double d = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = xi[c] - xj[c];
        d += diff * diff;
      }
      if (filled == k && !(d < best_d[k - 1])) continue;
      // insertion after any equal distances keeps the lower index first
      std::size_t pos = filled == k ? k - 1 : filled;
      while (pos > 0 && d < best_d[pos - 1]) {
        best_d[pos] = best_d[pos - 1];
        best_i[pos] = best_i[pos - 1];
        --pos;
      }
      best_d[pos] = d;
      best_i[pos] = static_cast<std::int32_t>(j);
      if (filled < k) ++filled;
    }
    std::copy(best_i.begin(), best_i.end(), table.index.begin() + static_cast<std::ptrdiff_t>(i * k));
  }
  return table;
}

NeighborTable knn(std::span<const Vec3> points, std::size_t k) {
  std::vector<double> flat;
  flat.reserve(points.size() * 3);
  for (const auto& p : points) {
    flat.push_back(p.x);
    flat.push_back(p.y);
    flat.push_back(p.z);
  }
  return knn(flat, 3, k);
}

Vec3 centroid(std::span<const Vec3> points) {
  Vec3 acc;
  for (const auto& p : points) acc += p;
  return points.empty() ? acc : acc / static_cast<double>(points.size());
}

std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> points, std::size_t m,
                                               std::optional<std::size_t> seed_index) {
  const std::size_t n = points.size();
  if (m > n) {
    throw Error(Errc::TooFewPoints,
                "cannot sample " + std::to_string(m) + " of " + std::to_string(n) + " points");
  }
  std::vector<std::size_t> out;
  if (m == 0) return out;
  std::size_t seed = 0;
  if (seed_index) {
    if (*seed_index >= n) throw Error(Errc::InvalidConfig, "seed index out of range");
    seed = *seed_index;
  } else {
    const Vec3 c = centroid(points);
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 d = points[i] - c;
      const double d2 = dot(d, d);
      if (d2 > best) {
        best = d2;
        seed = i;
      }
    }
  }
  out.reserve(m);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::size_t current = seed;
  for (std::size_t s = 0; s < m; ++s) {
    out.push_back(current);
    min_d[current] = -1.0;
    std::size_t next = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (min_d[i] < 0) continue;
      const Vec3 d = points[i] - points[current];
      const double d2 = dot(d, d);
      if (d2 < min_d[i]) min_d[i] = d2;
      if (min_d[i] > best) {
        best = min_d[i];
        next = i;
      }
    }
    current = next;
  }
  return out;
}

PrincipalAxes principal_axes(std::span<const Vec3> points, std::optional<Vec3> reference) {
  if (points.size() < 2) {
    throw Error(Errc::DegenerateCloud, "principal axes need at least two points");
  }
  const Vec3 mu = centroid(points);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d(p.x - mu.x, p.y - mu.y, p.z - mu.z);
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(points.size());

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const Eigen::Vector3d& values = solver.eigenvalues();  // ascending
  const double scale = 1.0 + dot(mu, mu);
  if (!(values(2) > 1e-20 * scale)) {
    throw Error(Errc::DegenerateCloud, "covariance has rank zero");
  }
  PrincipalAxes out;
  out.frame.origin = mu;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector3d v = solver.eigenvectors().col(2 - i);
    Vec3 axis{v(0), v(1), v(2)};
    fix_sign(axis, reference);
    out.frame.axis(static_cast<std::size_t>(i)) = axis;
    out.eigenvalues[static_cast<std::size_t>(i)] = std::max(0.0, values(2 - i));
  }
  if (out.frame.determinant() < 0) out.frame.e3 = -out.frame.e3;
  return out;
}

double max_axis_angle(const Frame3& estimate, const Frame3& reference) {
  double worst = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const Vec3& a = estimate.axis(i);
    const Vec3& b = reference.axis(i);
    const double angle = std::atan2(norm(cross(a, b)), std::abs(dot(a, b)));
    worst = std::max(worst, angle);
  }
  return worst;
}

}  // namespace orthoai::geometry
