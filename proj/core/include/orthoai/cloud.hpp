#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orthoai/case_model.hpp"
#include "orthoai/geometry.hpp"

namespace orthoai::synth {

using geometry::Vec3;

inline constexpr std::size_t kFeatureDim = 6;

struct SynthConfig {
  double surface_noise_sigma = 0.3;  // mm, on positions
  double cusp_variance = 0.1;        // mm^2, isotropic
  double cusp_fraction = 0.2;        // share of a tooth's budget drawn around cusps
  double gingiva_margin = 1.5;       // mm from every tooth centroid
  double gingiva_box_padding = 3.0;  // mm added to the tooth-point bounding box
  int target_points_raw = 3000;
  double gingiva_fraction = 0.30;
  int fps_points = 1000;
  bool stratified_fps = true;  // per-label quotas keep the label mix of the raw cloud

  void validate() const;
  std::string to_json() const;
  static SynthConfig from_json(std::string_view bytes);
  std::string digest() const;
};

struct LabeledCloud {
  std::string case_id;
  std::vector<Vec3> positions;
  std::vector<std::uint8_t> labels;  // 0 gingiva, else FDI class index
  std::vector<double> features;      // row-major N x 6
  Vec3 arch_centroid;
  double arch_scale = 1.0;

  std::size_t size() const { return positions.size(); }
  double feature(std::size_t i, std::size_t j) const { return features[i * kFeatureDim + j]; }
  double gingiva_fraction() const;

  /// Throws ShapeMismatch on inconsistent sizes or labels outside 0..32.
  void validate() const;
};

/// Per-point features: normalized offset p~ = (p - c)/r, |p~|, p~_z, radial sqrt(x^2+y^2).
std::vector<double> compute_features(std::span<const Vec3> positions, const Vec3& arch_centroid,
                                     double arch_scale);

/// Ellipsoid surface area, Thomsen's approximation (p = 1.6075).
double ellipsoid_area(double a, double b, double c);

/// Largest-remainder apportionment of `total` proportional to `weights`.
std::vector<int> apportion(std::span<const double> weights, int total);

LabeledCloud synthesize_cloud(const cases::ArchCase& arch_case, const SynthConfig& cfg, std::uint64_t seed);

struct AugmentConfig {
  double noise_sigma = 0.05;  // in normalized units, i.e. times arch_scale in mm
  bool rotate = true;
  std::optional<double> fixed_angle;  // radians; random U(0, 2pi) otherwise
  double max_drop = 0.2;
};

LabeledCloud augment(const LabeledCloud& cloud, std::uint64_t seed, const AugmentConfig& cfg = {});

// ASCII PLY -------------------------------------------------------------------

struct PlyMetadata {
  std::uint64_t seed = 0;
  std::string config_hash;
};

std::string write_ply(const LabeledCloud& cloud, const PlyMetadata& meta = {});
/// Values pass through 32-bit floats, so round trips hold to float precision.
LabeledCloud read_ply(std::string_view bytes, PlyMetadata* meta = nullptr);

}  // namespace orthoai::synth
