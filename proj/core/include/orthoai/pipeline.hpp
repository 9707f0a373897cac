#pragma once

#include <optional>
#include <string>
#include <vector>

#include "orthoai/case_model.hpp"
#include "orthoai/cloud.hpp"
#include "orthoai/csp.hpp"
#include "orthoai/lifting.hpp"
#include "orthoai/mcda.hpp"
#include "orthoai/segnet.hpp"

namespace orthoai::pipeline {

struct AnalyzeOptions {
  mcda::AssessOptions assess;
  lifting::LiftConfig lift;
  std::vector<int> feature_mask;  // must match what the model was trained on
};

struct StageTimings {
  double inference_ms = 0.0;
  double lifting_ms = 0.0;
  double reasoning_ms = 0.0;  // CSP + MCDA
};

struct AnalyzeResult {
  mcda::Assessment assessment;
  lifting::LiftResult lifted;
  StageTimings timings;
};

/// Lifted teeth become reasoning records. The lever arm comes from the case's
/// crown geometry when the tooth has landmarks, else from the lifted semi-axis.
std::vector<csp::ToothRecord> records_from_estimates(std::span<const lifting::ToothEstimate> teeth,
                                                     const cases::ArchGeometry& geometry);

/// segment (or take the cloud's own labels when model is null) -> lift -> CSP -> MCDA.
/// Plan teeth the lifter missed are filled from landmark geometry, with a warning.
AnalyzeResult analyze(const cases::ArchCase& arch_case, const synth::LabeledCloud& cloud, const segnet::SegModel* model,
                      const cases::MovementPlan& plan, const csp::KnowledgeBase& kb, const AnalyzeOptions& options = {});

/// Merge sparse per-tooth overrides into a copy of the plan. `overrides` maps
/// FDI code to component name (t_x, t_y, t_z, r_x, r_y, r_z) to value.
/// InvalidOverride for unknown teeth/components or non-finite values.
cases::MovementPlan apply_overrides(const cases::MovementPlan& plan,
                                    const std::vector<std::pair<int, std::vector<std::pair<std::string, double>>>>& overrides);

}  // namespace orthoai::pipeline
