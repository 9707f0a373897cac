#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "orthoai/case_model.hpp"
#include "orthoai/geometry.hpp"
#include "orthoai/lifting.hpp"

namespace orthoai::metrics {

inline constexpr int kClasses = cases::FdiLabel::kNumClasses;

using Labels = std::span<const std::uint8_t>;

class ConfusionMatrix {
 public:
  void add(Labels pred, Labels gt);  // LengthMismatch on unequal lengths
  std::uint64_t at(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt * kClasses + pred)]; }
  std::uint64_t total() const;
  std::uint64_t correct() const;
  /// nullopt when the class has an empty union.
  std::optional<double> iou(int c) const;
  std::optional<double> mean_iou(bool teeth_only) const;

 private:
  std::array<std::uint64_t, kClasses * kClasses> counts_{};
};

struct TirConfig {
  double fraction = 0.10;  // share of a tooth's own points that must be correct
  std::size_t floor = 5;   // and never fewer than this
};

struct ToothIdentification {
  std::size_t identified = 0;
  std::size_t total = 0;
};

ToothIdentification identify_teeth(Labels pred, Labels gt, const TirConfig& cfg = {});

/// Identified / total GT teeth of one scan; nullopt when the scan has no teeth.
std::optional<double> tooth_identification_rate(Labels pred, Labels gt, const TirConfig& cfg = {});

enum class Averaging { Pooled, PerScan };

struct MetricReport {
  Averaging mode = Averaging::Pooled;
  double miou = 0.0;
  double tiou = 0.0;
  double acc = 0.0;
  double tir = 0.0;
  std::array<std::optional<double>, kClasses> class_iou{};
  std::uint64_t total_points = 0;
  std::uint64_t correct_points = 0;
  std::size_t teeth_identified = 0;
  std::size_t teeth_total = 0;
  std::size_t scans = 0;
  std::size_t scans_without_teeth = 0;
  TirConfig tir_config;

  std::string to_json() const;
};

MetricReport segmentation_metrics(std::span<const std::vector<std::uint8_t>> preds,
                                  std::span<const std::vector<std::uint8_t>> gts,
                                  Averaging mode = Averaging::Pooled, const TirConfig& cfg = {});
MetricReport segmentation_metrics(Labels pred, Labels gt, const TirConfig& cfg = {});

struct GroundTruthTooth {
  cases::FdiLabel label = cases::FdiLabel::from_code(11);
  geometry::Vec3 centroid;
  geometry::Frame3 frame;
};

struct SufficiencyThresholds {
  double centroid_mm = 2.0;
  double axis_deg = 10.0;
};

struct Sufficiency {
  bool sufficient = false;
  double centroid_error_mm = 0.0;
  double axis_error_deg = 0.0;
  std::vector<std::string> reasons;  // "label", "centroid", "axes"
};

Sufficiency clinical_sufficiency(const lifting::ToothEstimate& est, const GroundTruthTooth& gt,
                                 const SufficiencyThresholds& th = {});

}  // namespace orthoai::metrics
