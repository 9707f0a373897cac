#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orthoai/case_model.hpp"
#include "orthoai/csp.hpp"

namespace orthoai::mcda {

enum class Criterion { Bio, Pred, Stag, Att, Ipr, Sym };
inline constexpr std::size_t kCriteria = 6;
inline constexpr std::array<Criterion, kCriteria> kAllCriteria{Criterion::Bio, Criterion::Pred, Criterion::Stag,
                                                               Criterion::Att, Criterion::Ipr,  Criterion::Sym};
std::string_view criterion_name(Criterion c);
Criterion parse_criterion(std::string_view name);

struct SubScores {
  double s_bio = 1.0;
  double p_bar = 1.0;
  double s_stag = 1.0;
  double s_att = 1.0;
  double s_ipr = 1.0;
  double s_sym = 1.0;

  std::array<double, kCriteria> values() const { return {s_bio, p_bar, s_stag, s_att, s_ipr, s_sym}; }
  static SubScores from_values(const std::array<double, kCriteria>& v);
  friend bool operator==(const SubScores&, const SubScores&) = default;
};

using ValueFunction = std::function<double(double)>;

/// Named marginal value functions; "identity" is always present.
const ValueFunction& value_function(std::string_view name);
void register_value_function(std::string name, ValueFunction fn);

struct WavfConfig {
  std::array<double, kCriteria> weights{0.30, 0.20, 0.15, 0.15, 0.10, 0.10};
  std::array<std::string, kCriteria> value_functions{"identity", "identity", "identity",
                                                     "identity", "identity", "identity"};
  std::array<double, 4> thresholds{90, 75, 60, 40};  // A, B, C, D lower bounds

  /// WeightSumError unless weights are nonnegative and sum to 1; InvalidConfig
  /// unless thresholds strictly decrease.
  void validate() const;
  std::string to_json() const;
  static WavfConfig from_json(std::string_view bytes);
  std::string digest() const;
};

struct Score {
  double value = 0.0;  // 0..100
  char grade = 'F';
};

char grade_for(double score, const std::array<double, 4>& thresholds = {90, 75, 60, 40});
Score wavf_score(const SubScores& s, const WavfConfig& cfg = {});

struct SubscoreConfig {
  double ipr_indicated_mm = 0.25;
  double ipr_tolerance_mm = 0.5;
  double symmetry_tolerance_mm = 2.0;
  double attachment_rotation_deg = 1.5;
  int days_per_stage = 14;
  double days_per_month = 30.4;
};

/// max over teeth and components of ceil(total movement / per-stage limit).
int minimal_stages(const cases::MovementPlan& plan, std::span<const csp::ToothRecord> teeth,
                   const csp::KnowledgeBase& kb, const csp::EvaluateOptions& options = {});

int estimate_duration(const cases::MovementPlan& plan, std::span<const csp::ToothRecord> teeth,
                      const csp::KnowledgeBase& kb, const SubscoreConfig& cfg = {},
                      const csp::EvaluateOptions& options = {});

/// Attachment-indicated teeth: any rotation above the threshold or any extrusion.
std::vector<int> attachment_indicated(const cases::MovementPlan& plan, const SubscoreConfig& cfg = {});

double symmetry_score(const cases::ArchGeometry& geometry, const SubscoreConfig& cfg = {});
double ipr_score(const cases::MovementPlan& plan, const cases::ArchGeometry& geometry, const SubscoreConfig& cfg = {});

SubScores compute_subscores(const csp::PlanEvaluation& eval, const cases::MovementPlan& plan,
                            std::span<const csp::ToothRecord> teeth, const cases::ArchGeometry& geometry,
                            const csp::KnowledgeBase& kb, const SubscoreConfig& cfg = {},
                            const csp::EvaluateOptions& options = {});

struct SensitivityEntry {
  Criterion criterion = Criterion::Bio;
  double delta_minus = 0.0;  // S(w_i * (1 - p)) - S
  double delta_plus = 0.0;   // S(w_i * (1 + p)) - S
  double max_abs = 0.0;
};

/// Perturbed weight vector: w_i scaled by (1 + factor), others rescaled
/// proportionally so the vector still sums to one.
std::array<double, kCriteria> perturbed_weights(const std::array<double, kCriteria>& w, std::size_t i, double factor);

std::vector<SensitivityEntry> sensitivity(const SubScores& s, const WavfConfig& cfg = {}, double perturbation = 0.5);

// Assessment ------------------------------------------------------------------

struct Assessment {
  std::string case_id;
  std::string kb_version;
  std::string config_digest;
  SubScores subscores;
  WavfConfig wavf;
  Score score;
  int minimal_stages = 0;
  int duration_months = 0;
  std::vector<csp::ConstraintEval> evaluations;
  std::vector<csp::ToothPredictability> predictability;
  std::vector<SensitivityEntry> sensitivity;
  std::vector<csp::ToothRecord> teeth;
  cases::MovementPlan plan;
  std::vector<std::string> warnings;

  std::vector<const csp::ConstraintEval*> alerts() const;
  std::string to_json() const;
  static Assessment from_json(std::string_view bytes, const csp::KnowledgeBase& kb);
};

struct AssessOptions {
  WavfConfig wavf;
  SubscoreConfig subscores;
  csp::EvaluateOptions evaluate;
  double sensitivity_perturbation = 0.5;
};

/// evaluate_plan -> compute_subscores -> wavf_score -> sensitivity/duration.
Assessment assess(const cases::ArchCase& arch_case, std::span<const csp::ToothRecord> teeth,
                  const cases::MovementPlan& plan, const csp::KnowledgeBase& kb, const AssessOptions& options = {});

/// Digest over the KB and every scoring setting, so clients can detect staleness.
std::string config_digest(const csp::KnowledgeBase& kb, const AssessOptions& options);

}  // namespace orthoai::mcda
