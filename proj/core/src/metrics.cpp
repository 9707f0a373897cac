#include "orthoai/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "orthoai/errors.hpp"

namespace orthoai::metrics {

namespace {

void check_lengths(Labels pred, Labels gt) {
  if (pred.size() != gt.size()) {
    throw Error(Errc::LengthMismatch, "prediction has " + std::to_string(pred.size()) + " labels, ground truth " +
                                          std::to_string(gt.size()));
  }
}

}  // namespace

void ConfusionMatrix::add(Labels pred, Labels gt) {
  check_lengths(pred, gt);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= kClasses || gt[i] >= kClasses) throw Error(Errc::ShapeMismatch, "label outside 0..32");
    ++counts_[static_cast<std::size_t>(gt[i]) * kClasses + pred[i]];
  }
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::uint64_t ConfusionMatrix::correct() const {
  std::uint64_t t = 0;
  for (int c = 0; c < kClasses; ++c) t += at(c, c);
  return t;
}

std::optional<double> ConfusionMatrix::iou(int c) const {
  std::uint64_t row = 0, col = 0;
  for (int j = 0; j < kClasses; ++j) {
    row += at(c, j);
    col += at(j, c);
  }
  const std::uint64_t tp = at(c, c);
  const std::uint64_t uni = row + col - tp;
  if (uni == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(uni);
}

std::optional<double> ConfusionMatrix::mean_iou(bool teeth_only) const {
  double sum = 0.0;
  int n = 0;
  for (int c = teeth_only ? 1 : 0; c < kClasses; ++c) {
    if (auto v = iou(c)) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

ToothIdentification identify_teeth(Labels pred, Labels gt, const TirConfig& cfg) {
  check_lengths(pred, gt);
  std::array<std::size_t, kClasses> size{}, hit{};
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == 0) continue;
    ++size[gt[i]];
    if (pred[i] == gt[i]) ++hit[gt[i]];
  }
  ToothIdentification out;
  for (int c = 1; c < kClasses; ++c) {
    if (size[c] == 0) continue;
    ++out.total;
    const double need = std::max(static_cast<double>(cfg.floor), cfg.fraction * static_cast<double>(size[c]));
    if (static_cast<double>(hit[c]) >= need) ++out.identified;
  }
  return out;
}

std::optional<double> tooth_identification_rate(Labels pred, Labels gt, const TirConfig& cfg) {
  const auto t = identify_teeth(pred, gt, cfg);
  if (t.total == 0) return std::nullopt;
  return static_cast<double>(t.identified) / static_cast<double>(t.total);
}

MetricReport segmentation_metrics(std::span<const std::vector<std::uint8_t>> preds,
                                  std::span<const std::vector<std::uint8_t>> gts, Averaging mode,
                                  const TirConfig& cfg) {
  if (preds.size() != gts.size()) throw Error(Errc::LengthMismatch, "scan counts differ");
  MetricReport r;
  r.mode = mode;
  r.tir_config = cfg;
  r.scans = preds.size();
  ConfusionMatrix pooled;
  double tir_sum = 0.0, miou_sum = 0.0, tiou_sum = 0.0, acc_sum = 0.0;
  std::size_t tir_n = 0, miou_n = 0, tiou_n = 0, acc_n = 0;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    ConfusionMatrix cm;
    cm.add(preds[s], gts[s]);
    pooled.add(preds[s], gts[s]);
    const auto ti = identify_teeth(preds[s], gts[s], cfg);
    r.teeth_identified += ti.identified;
    r.teeth_total += ti.total;
    if (ti.total == 0) {
      ++r.scans_without_teeth;
    } else {
      tir_sum += static_cast<double>(ti.identified) / static_cast<double>(ti.total);
      ++tir_n;
    }
    if (mode == Averaging::PerScan) {
      if (auto m = cm.mean_iou(false)) miou_sum += *m, ++miou_n;
      if (auto t = cm.mean_iou(true)) tiou_sum += *t, ++tiou_n;
      if (cm.total() > 0) acc_sum += static_cast<double>(cm.correct()) / static_cast<double>(cm.total()), ++acc_n;
    }
  }
  for (int c = 0; c < kClasses; ++c) r.class_iou[static_cast<std::size_t>(c)] = pooled.iou(c);
  r.total_points = pooled.total();
  r.correct_points = pooled.correct();
  if (mode == Averaging::Pooled) {
    r.miou = pooled.mean_iou(false).value_or(0.0);
    r.tiou = pooled.mean_iou(true).value_or(0.0);
    r.acc = r.total_points ? static_cast<double>(r.correct_points) / static_cast<double>(r.total_points) : 0.0;
  } else {
    r.miou = miou_n ? miou_sum / static_cast<double>(miou_n) : 0.0;
    r.tiou = tiou_n ? tiou_sum / static_cast<double>(tiou_n) : 0.0;
    r.acc = acc_n ? acc_sum / static_cast<double>(acc_n) : 0.0;
  }
  r.tir = tir_n ? tir_sum / static_cast<double>(tir_n) : 0.0;
  return r;
}

MetricReport segmentation_metrics(Labels pred, Labels gt, const TirConfig& cfg) {
  std::vector<std::vector<std::uint8_t>> p{std::vector<std::uint8_t>(pred.begin(), pred.end())};
  std::vector<std::vector<std::uint8_t>> g{std::vector<std::uint8_t>(gt.begin(), gt.end())};
  return segmentation_metrics(p, g, Averaging::Pooled, cfg);
}

std::string MetricReport::to_json() const {
  nlohmann::json ious = nlohmann::json::object();
  for (int c = 0; c < kClasses; ++c) {
    const auto& v = class_iou[static_cast<std::size_t>(c)];
    if (v) ious[std::to_string(c)] = *v;
  }
  nlohmann::json j{{"mode", mode == Averaging::Pooled ? "pooled" : "per_scan"},
                   {"miou", miou},
                   {"tiou", tiou},
                   {"acc", acc},
                   {"tir", tir},
                   {"tir_fraction", tir_config.fraction},
                   {"tir_floor", tir_config.floor},
                   {"class_iou", ious},
                   {"total_points", total_points},
                   {"correct_points", correct_points},
                   {"teeth_identified", teeth_identified},
                   {"teeth_total", teeth_total},
                   {"scans", scans},
                   {"scans_without_teeth", scans_without_teeth}};
  return j.dump(1) + "\n";
}

Sufficiency clinical_sufficiency(const lifting::ToothEstimate& est, const GroundTruthTooth& gt,
                                 const SufficiencyThresholds& th) {
  Sufficiency s;
  s.centroid_error_mm = geometry::distance(est.centroid, gt.centroid);
  s.axis_error_deg = geometry::max_axis_angle(est.axes, gt.frame) * 180.0 / std::numbers::pi;
  if (est.label != gt.label) s.reasons.emplace_back("label");
  if (!(s.centroid_error_mm < th.centroid_mm)) s.reasons.emplace_back("centroid");
  if (!(s.axis_error_deg < th.axis_deg)) s.reasons.emplace_back("axes");
  s.sufficient = s.reasons.empty();
  return s;
}

}  // namespace orthoai::metrics
