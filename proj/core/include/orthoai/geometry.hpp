#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace orthoai::geometry {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }

  constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

  friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend constexpr Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }
  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }
inline bool is_finite(const Vec3& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}
Vec3 normalized(const Vec3& a);

/// Right-handed orthonormal frame with an origin. e1, e2, e3 are the axes.
struct Frame3 {
  Vec3 e1{1, 0, 0};
  Vec3 e2{0, 1, 0};
  Vec3 e3{0, 0, 1};
  Vec3 origin{};

  const Vec3& axis(std::size_t i) const { return i == 0 ? e1 : (i == 1 ? e2 : e3); }
  Vec3& axis(std::size_t i) { return i == 0 ? e1 : (i == 1 ? e2 : e3); }
  double determinant() const { return dot(e1, cross(e2, e3)); }
};

/// 3x3 rotation, row-major.
struct Rotation {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Rotation about_axis(const Vec3& axis, double radians);
  Vec3 apply(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Frame3 apply(const Frame3& f) const { return {apply(f.e1), apply(f.e2), apply(f.e3), apply(f.origin)}; }
  Rotation operator*(const Rotation& o) const;
};

/// Local crown frame from four landmarks: e1 mesial->distal, e2 lingual->buccal
/// orthogonalized against e1, e3 = e1 x e2. Origin is the landmark centroid.
Frame3 build_tooth_frame(const Vec3& mesial, const Vec3& distal, const Vec3& lingual,
                         const Vec3& buccal);

/// Row-major table of neighbour indices, `k` entries per point.
struct NeighborTable {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<std::int32_t> index;

  std::span<const std::int32_t> row(std::size_t i) const { return {index.data() + i * k, k}; }
};

/// Exact k nearest neighbours under the Euclidean metric in whatever space the
/// rows of `data` live in (`dim` values per row). A point is never its own
/// neighbour; equal distances resolve to the lower index.
NeighborTable knn(std::span<const double> data, std::size_t dim, std::size_t k);
NeighborTable knn(std::span<const Vec3> points, std::size_t k);

/// Greedy farthest point sampling. Without a seed the walk starts at the point
/// farthest from the centroid.
std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> points, std::size_t m,
                                               std::optional<std::size_t> seed_index = {});

struct PrincipalAxes {
  Frame3 frame;
  std::array<double, 3> eigenvalues{};  // descending
};

/// PCA of a point set. Axis signs follow `reference` (nonnegative dot product),
/// falling back to "largest-magnitude component positive" when the dot is zero.
PrincipalAxes principal_axes(std::span<const Vec3> points,
                             std::optional<Vec3> reference = {});

Vec3 centroid(std::span<const Vec3> points);

/// Largest angle (radians) between matched axes after choosing the sign of each
/// estimated axis that best aligns with the reference.
double max_axis_angle(const Frame3& estimate, const Frame3& reference);

}  // namespace orthoai::geometry
