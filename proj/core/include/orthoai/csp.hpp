#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "orthoai/case_model.hpp"
#include "orthoai/geometry.hpp"

namespace orthoai::csp {

using cases::FdiLabel;
using cases::ToothType;

/// Movement components a rule can constrain. Vertical translation is split by
/// direction because extrusion and intrusion carry different limits.
enum class Component { Tx, Ty, Extrusion, Intrusion, Rx, Ry, Rz };
inline constexpr std::array<Component, 7> kAllComponents{Component::Tx,        Component::Ty,
                                                         Component::Extrusion, Component::Intrusion,
                                                         Component::Rx,        Component::Ry,
                                                         Component::Rz};

std::string_view component_name(Component c);
Component parse_component(std::string_view name);

enum class ToothClass { All, Anterior, Posterior, Incisor, Canine, Premolar, Molar };
std::string_view tooth_class_name(ToothClass c);
ToothClass parse_tooth_class(std::string_view name);
bool tooth_class_contains(ToothClass c, ToothType type);

enum class RuleKind { Hard, Soft };
enum class Unit { Mm, Degrees };

struct ConstraintRule {
  std::string id;
  std::string movement;  // human-readable movement name
  std::vector<Component> components;
  ToothClass teeth = ToothClass::All;
  double limit = 0.0;  // per stage, in `unit`
  Unit unit = Unit::Mm;
  RuleKind kind = RuleKind::Soft;
  double alpha = 1.5;  // hard-violation multiplier
  std::string source;

  bool covers(Component c) const;
};

class KnowledgeBase {
 public:
  /// Validates limits (NonPositiveLimit), multipliers and totality (MissingRule).
  KnowledgeBase(std::string version, double alpha, std::vector<ConstraintRule> rules);

  const std::string& version() const { return version_; }
  double alpha() const { return alpha_; }
  const std::vector<ConstraintRule>& rules() const { return rules_; }

  /// Indices of the rules constraining `component` on teeth of `type`.
  std::vector<std::size_t> rules_for(ToothType type, Component component) const;
  /// Tightest applicable limit.
  double limit_for(ToothType type, Component component) const;

  /// Every (tooth type, component) pair is covered by at least one rule.
  void check_totality() const;

  std::string to_json() const;
  static KnowledgeBase from_json(std::string_view bytes);

 private:
  std::string version_;
  double alpha_;
  std::vector<ConstraintRule> rules_;
};

KnowledgeBase default_knowledge_base();

/// Graded satisfaction: 1 within the limit, 0 beyond alpha times the limit,
/// linear 1 - (|v| - limit)/limit in between.
double satisfaction(double observed, double limit, double alpha);

enum class AlertLevel { None, Warning, Critical };
std::string_view alert_name(AlertLevel level);

AlertLevel alert_for(RuleKind kind, double sigma);

struct ConstraintEval {
  FdiLabel tooth = FdiLabel::from_code(11);
  std::size_t rule_index = 0;
  std::string rule_id;
  Component component = Component::Tx;
  RuleKind kind = RuleKind::Soft;
  double observed = 0.0;
  double limit = 0.0;
  Unit unit = Unit::Mm;
  double sigma = 1.0;
  AlertLevel alert = AlertLevel::None;
};

/// What the reasoning layer needs to know about a tooth.
struct ToothRecord {
  FdiLabel tooth = FdiLabel::from_code(11);
  geometry::Vec3 centroid;
  geometry::Frame3 axes;
  std::optional<double> lever_arm_mm;  // occluso-gingival semi-axis, for tip conversion
};

std::vector<ToothRecord> records_from_geometry(const cases::ArchGeometry& geometry);

enum class MovementClass {
  Extrusion,
  Rotation,
  BodilyTranslation,
  Intrusion,
  Torque,
  MesiodistalTip,
  LabiolingualTip,
};
std::string_view movement_class_name(MovementClass c);
MovementClass movement_class_of(Component c);

struct PredictabilityTable {
  // indexed by MovementClass
  std::array<double, 7> values{0.30, 0.36, 0.42, 0.45, 0.46, 0.50, 0.56};

  double operator[](MovementClass c) const { return values[static_cast<std::size_t>(c)]; }
};

struct ToothPredictability {
  FdiLabel tooth = FdiLabel::from_code(11);
  bool moving = false;
  MovementClass dominant = MovementClass::BodilyTranslation;
  double normalized_magnitude = 0.0;  // |v| / limit of the dominant component
  double score = 1.0;
};

struct EvaluateOptions {
  double default_lever_arm_mm = 8.0;
  bool plan_is_total = false;  // divide components by stage_count first
  PredictabilityTable predictability;
};

struct PlanEvaluation {
  std::vector<ConstraintEval> evals;
  std::vector<ToothPredictability> predictability;

  std::size_t count(AlertLevel level) const;
};

/// Per-stage magnitude of one component in the unit of its rule; tip (r_y) is
/// converted to crown displacement sin(r_y) * lever arm.
double observed_magnitude(const cases::ToothMovement& move, Component c, double lever_arm_mm);

PlanEvaluation evaluate_plan(std::span<const ToothRecord> teeth, const cases::MovementPlan& plan,
                             const KnowledgeBase& kb, const EvaluateOptions& options = {});

}  // namespace orthoai::csp
