#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "orthoai/case_model.hpp"
#include "orthoai/geometry.hpp"

namespace orthoai::lifting {

using cases::FdiLabel;
using geometry::Frame3;
using geometry::Vec3;

struct ToothEstimate {
  FdiLabel label = FdiLabel::from_code(11);
  Vec3 centroid;
  Frame3 axes;                      // e1 along the arch tangent, e3 occlusal (+z)
  std::array<double, 3> semi_axes{};  // sqrt(3 * eigenvalue) per axis
  std::size_t support = 0;
  double confidence = 0.0;
};

struct DroppedClass {
  int class_index = 0;
  std::size_t support = 0;
  std::string reason;
};

struct LiftConfig {
  std::size_t min_support = 10;
  Vec3 up{0, 0, 1};
};

struct LiftResult {
  std::vector<ToothEstimate> teeth;  // ascending FDI class index
  std::vector<DroppedClass> dropped;

  const ToothEstimate* find(int fdi) const;
};

/// Turn per-point labels into tooth estimates. `confidences` holds the
/// probability of each point's assigned class and may be empty (treated as 1).
LiftResult lift(std::span<const Vec3> positions, std::span<const std::uint8_t> labels,
                std::span<const double> confidences, const LiftConfig& cfg = {});

/// Re-orders principal axes into the canonical tooth frame: e3 is the axis most
/// aligned with `up`, e1 the remaining axis most aligned with `tangent`.
Frame3 canonical_frame(const geometry::PrincipalAxes& pa, const Vec3& up, const Vec3& tangent,
                       std::array<double, 3>* eigenvalues_out = nullptr);

}  // namespace orthoai::lifting
