#include "orthoai/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "orthoai/errors.hpp"

namespace orthoai::pipeline {

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<csp::ToothRecord> records_from_estimates(std::span<const lifting::ToothEstimate> teeth,
                                                     const cases::ArchGeometry& geometry) {
  std::vector<csp::ToothRecord> out;
  out.reserve(teeth.size());
  for (const auto& t : teeth) {
    csp::ToothRecord r;
    r.tooth = t.label;
    r.centroid = t.centroid;
    r.axes = t.axes;
    if (const auto* crown = geometry.find(t.label.code())) {
      r.lever_arm_mm = crown->semi_axes[2];
    } else {
      r.lever_arm_mm = t.semi_axes[2];
    }
    out.push_back(r);
  }
  return out;
}

AnalyzeResult analyze(const cases::ArchCase& arch_case, const synth::LabeledCloud& cloud, const segnet::SegModel* model,
                      const cases::MovementPlan& plan, const csp::KnowledgeBase& kb, const AnalyzeOptions& options) {
  AnalyzeResult res;
  auto t0 = std::chrono::steady_clock::now();
  segnet::Prediction pred;
  if (model) {
    pred = segnet::predict(*model, cloud, options.feature_mask);
  } else {
    pred.labels = cloud.labels;
    pred.confidence.assign(cloud.size(), 1.0);
  }
  res.timings.inference_ms = ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  res.lifted = lifting::lift(cloud.positions, pred.labels, pred.confidence, options.lift);
  res.timings.lifting_ms = ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  const auto geometry = cases::ArchGeometry::from_case(arch_case);
  auto records = records_from_estimates(res.lifted.teeth, geometry);
  std::vector<std::string> warnings;
  for (const auto& d : res.lifted.dropped) {
    warnings.push_back("class " + std::to_string(d.class_index) + " dropped: " + d.reason);
  }
  const auto fallback = csp::records_from_geometry(geometry);
  for (const auto& m : plan.movements) {
    const bool lifted = std::any_of(records.begin(), records.end(), [&](const auto& r) { return r.tooth == m.tooth; });
    if (lifted) continue;
    const auto it = std::find_if(fallback.begin(), fallback.end(), [&](const auto& r) { return r.tooth == m.tooth; });
    if (it == fallback.end()) continue;  // evaluate_plan reports it as unmatched
    records.push_back(*it);
    warnings.push_back("tooth " + std::to_string(m.tooth.code()) + " not segmented; using landmark geometry");
  }
  res.assessment = mcda::assess(arch_case, records, plan, kb, options.assess);
  res.assessment.warnings.insert(res.assessment.warnings.end(), warnings.begin(), warnings.end());
  res.timings.reasoning_ms = ms_since(t0);
  return res;
}

cases::MovementPlan apply_overrides(const cases::MovementPlan& plan,
                                    const std::vector<std::pair<int, std::vector<std::pair<std::string, double>>>>& overrides) {
  cases::MovementPlan out = plan;
  for (const auto& [fdi, comps] : overrides) {
    auto it = std::find_if(out.movements.begin(), out.movements.end(),
                           [fdi = fdi](const cases::ToothMovement& m) { return m.tooth.code() == fdi; });
    if (it == out.movements.end()) {
      throw Error(Errc::InvalidOverride, "tooth " + std::to_string(fdi) + " is not in the plan");
    }
    for (const auto& [name, value] : comps) {
      if (!std::isfinite(value)) throw Error(Errc::InvalidOverride, "non-finite value for " + name);
      static const char* kNames[] = {"t_x", "t_y", "t_z", "r_x", "r_y", "r_z"};
      const auto pos = std::find(std::begin(kNames), std::end(kNames), name);
      if (pos == std::end(kNames)) throw Error(Errc::InvalidOverride, "unknown component '" + name + "'");
      const auto idx = static_cast<std::size_t>(pos - std::begin(kNames));
      (idx < 3 ? it->t[idx] : it->r[idx - 3]) = value;
    }
  }
  return out;
}

}  // namespace orthoai::pipeline
