#include "orthoai/csp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

#include "orthoai/errors.hpp"

namespace orthoai::csp {

using json = nlohmann::json;

std::string_view component_name(Component c) {
  switch (c) {
    case Component::Tx: return "t_x";
    case Component::Ty: return "t_y";
    case Component::Extrusion: return "t_z+";
    case Component::Intrusion: return "t_z-";
    case Component::Rx: return "r_x";
    case Component::Ry: return "r_y";
    case Component::Rz: return "r_z";
  }
  return "?";
}

Component parse_component(std::string_view name) {
  for (Component c : kAllComponents) {
    if (component_name(c) == name) return c;
  }
  throw Error(Errc::SchemaError, "unknown movement component '" + std::string(name) + "'");
}

std::string_view tooth_class_name(ToothClass c) {
  switch (c) {
    case ToothClass::All: return "all";
    case ToothClass::Anterior: return "anterior";
    case ToothClass::Posterior: return "posterior";
    case ToothClass::Incisor: return "incisor";
    case ToothClass::Canine: return "canine";
    case ToothClass::Premolar: return "premolar";
    case ToothClass::Molar: return "molar";
  }
  return "?";
}

ToothClass parse_tooth_class(std::string_view name) {
  for (ToothClass c : {ToothClass::All, ToothClass::Anterior, ToothClass::Posterior, ToothClass::Incisor,
                       ToothClass::Canine, ToothClass::Premolar, ToothClass::Molar}) {
    if (tooth_class_name(c) == name) return c;
  }
  throw Error(Errc::SchemaError, "unknown tooth class '" + std::string(name) + "'");
}

bool tooth_class_contains(ToothClass c, ToothType type) {
  switch (c) {
    case ToothClass::All: return true;
    case ToothClass::Anterior: return type == ToothType::Incisor || type == ToothType::Canine;
    case ToothClass::Posterior: return type == ToothType::Premolar || type == ToothType::Molar;
    case ToothClass::Incisor: return type == ToothType::Incisor;
    case ToothClass::Canine: return type == ToothType::Canine;
    case ToothClass::Premolar: return type == ToothType::Premolar;
    case ToothClass::Molar: return type == ToothType::Molar;
  }
  return false;
}

bool ConstraintRule::covers(Component c) const {
  return std::find(components.begin(), components.end(), c) != components.end();
}

KnowledgeBase::KnowledgeBase(std::string version, double alpha, std::vector<ConstraintRule> rules)
    : version_(std::move(version)), alpha_(alpha), rules_(std::move(rules)) {
  if (!(alpha_ > 1.0) || !std::isfinite(alpha_)) {
    throw Error(Errc::InvalidConfig, "hard-violation multiplier must exceed 1");
  }
  for (const auto& r : rules_) {
    if (!(r.limit > 0.0) || !std::isfinite(r.limit)) {
      throw Error(Errc::NonPositiveLimit, "rule '" + r.id + "' has a non-positive limit");
    }
    if (!(r.alpha > 1.0) || !std::isfinite(r.alpha)) {
      throw Error(Errc::InvalidConfig, "rule '" + r.id + "' multiplier must exceed 1");
    }
    if (r.components.empty()) throw Error(Errc::SchemaError, "rule '" + r.id + "' constrains nothing");
  }
  check_totality();
}

std::vector<std::size_t> KnowledgeBase::rules_for(ToothType type, Component component) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    if (rules_[i].covers(component) && tooth_class_contains(rules_[i].teeth, type)) out.push_back(i);
  }
  return out;
}

double KnowledgeBase::limit_for(ToothType type, Component component) const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i : rules_for(type, component)) best = std::min(best, rules_[i].limit);
  if (!std::isfinite(best)) {
    throw Error(Errc::MissingRule, "no rule for " + std::string(component_name(component)) + " on " +
                                       std::string(cases::tooth_type_name(type)));
  }
  return best;
}

void KnowledgeBase::check_totality() const {
  for (ToothType t : {ToothType::Incisor, ToothType::Canine, ToothType::Premolar, ToothType::Molar}) {
    for (Component c : kAllComponents) {
      if (rules_for(t, c).empty()) {
        throw Error(Errc::MissingRule, "knowledge base has no rule for " + std::string(component_name(c)) +
                                           " on " + std::string(cases::tooth_type_name(t)));
      }
    }
  }
}

std::string KnowledgeBase::to_json() const {
  json rules = json::array();
  for (const auto& r : rules_) {
    json comps = json::array();
    for (Component c : r.components) comps.push_back(component_name(c));
    rules.push_back({{"id", r.id},
                     {"movement", r.movement},
                     {"components", comps},
                     {"teeth", tooth_class_name(r.teeth)},
                     {"limit", r.limit},
                     {"unit", r.unit == Unit::Mm ? "mm" : "deg"},
                     {"kind", r.kind == RuleKind::Hard ? "hard" : "soft"},
                     {"alpha", r.alpha},
                     {"source", r.source}});
  }
  json root{{"version", version_}, {"alpha", alpha_}, {"rules", rules}};
  return root.dump(1) + "\n";
}

KnowledgeBase KnowledgeBase::from_json(std::string_view bytes) {
  json root;
  try {
    root = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw Error(Errc::SchemaError, std::string("malformed knowledge base: ") + e.what());
  }
  try {
    const double alpha = root.value("alpha", 1.5);
    std::vector<ConstraintRule> rules;
    for (const auto& rj : root.at("rules")) {
      ConstraintRule r;
      r.id = rj.at("id").get<std::string>();
      r.movement = rj.value("movement", r.id);
      for (const auto& c : rj.at("components")) r.components.push_back(parse_component(c.get<std::string>()));
      r.teeth = parse_tooth_class(rj.at("teeth").get<std::string>());
      r.limit = rj.at("limit").get<double>();
      const std::string unit = rj.value("unit", "mm");
      if (unit != "mm" && unit != "deg") throw Error(Errc::SchemaError, "unit must be mm or deg");
      r.unit = unit == "mm" ? Unit::Mm : Unit::Degrees;
      const std::string kind = rj.at("kind").get<std::string>();
      if (kind != "hard" && kind != "soft") throw Error(Errc::SchemaError, "kind must be hard or soft");
      r.kind = kind == "hard" ? RuleKind::Hard : RuleKind::Soft;
      r.alpha = rj.value("alpha", alpha);
      r.source = rj.value("source", "");
      rules.push_back(std::move(r));
    }
    return KnowledgeBase(root.at("version").get<std::string>(), alpha, std::move(rules));
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("knowledge base schema: ") + e.what());
  }
}

KnowledgeBase default_knowledge_base() {
  using C = Component;
  auto rule = [](std::string id, std::string movement, std::vector<Component> comps, ToothClass teeth,
                 double limit, Unit unit, RuleKind kind, std::string source) {
    return ConstraintRule{std::move(id), std::move(movement), std::move(comps), teeth, limit, unit, kind, 1.5,
                          std::move(source)};
  };
  std::vector<ConstraintRule> rules{
      rule("bodily_translation", "Bodily translation", {C::Tx, C::Ty}, ToothClass::All, 0.25, Unit::Mm,
           RuleKind::Soft, "lombardo2017"),
      rule("intrusion", "Intrusion", {C::Intrusion}, ToothClass::All, 0.25, Unit::Mm, RuleKind::Soft,
           "simon2014"),
      rule("extrusion_posterior", "Extrusion", {C::Extrusion}, ToothClass::Posterior, 0.20, Unit::Mm,
           RuleKind::Hard, "kravitz2009"),
      rule("extrusion_anterior", "Extrusion", {C::Extrusion}, ToothClass::Anterior, 0.15, Unit::Mm,
           RuleKind::Hard, "kravitz2009"),
      rule("mesiodistal_tip", "Mesiodistal tip", {C::Ry}, ToothClass::All, 0.25, Unit::Mm, RuleKind::Soft,
           "lombardo2017"),
      rule("rotation_canine", "Axial rotation", {C::Rz}, ToothClass::Canine, 2.0, Unit::Degrees, RuleKind::Soft,
           "simon2014"),
      rule("rotation_premolar", "Axial rotation", {C::Rz}, ToothClass::Premolar, 2.0, Unit::Degrees,
           RuleKind::Soft, "lombardo2017"),
      rule("rotation_molar", "Axial rotation", {C::Rz}, ToothClass::Molar, 1.5, Unit::Degrees, RuleKind::Hard,
           "houle2017"),
      rule("rotation_incisor", "Axial rotation", {C::Rz}, ToothClass::Incisor, 1.5, Unit::Degrees,
           RuleKind::Soft, "kravitz2009"),
      rule("torque", "Torque", {C::Rx}, ToothClass::All, 2.0, Unit::Degrees, RuleKind::Soft, "kravitz2009"),
  };
  return KnowledgeBase("table1-v1", 1.5, std::move(rules));
}

double satisfaction(double observed, double limit, double alpha) {
  if (!(limit > 0.0)) throw Error(Errc::NonPositiveLimit, "limit must be positive");
  const double v = std::abs(observed);
  if (v <= limit) return 1.0;
  if (v > alpha * limit) return 0.0;
  return 1.0 - (v - limit) / limit;
}

std::string_view alert_name(AlertLevel level) {
  switch (level) {
    case AlertLevel::None: return "none";
    case AlertLevel::Warning: return "warning";
    case AlertLevel::Critical: return "critical";
  }
  return "?";
}

AlertLevel alert_for(RuleKind kind, double sigma) {
  if (sigma >= 1.0) return AlertLevel::None;
  if (kind == RuleKind::Hard || sigma <= 0.0) return AlertLevel::Critical;
  return AlertLevel::Warning;
}

std::vector<ToothRecord> records_from_geometry(const cases::ArchGeometry& geometry) {
  std::vector<ToothRecord> out;
  out.reserve(geometry.crowns.size());
  for (const auto& c : geometry.crowns) {
    out.push_back({c.tooth, c.frame.origin, c.frame, c.semi_axes[2]});
  }
  return out;
}

std::string_view movement_class_name(MovementClass c) {
  switch (c) {
    case MovementClass::Extrusion: return "extrusion";
    case MovementClass::Rotation: return "rotation";
    case MovementClass::BodilyTranslation: return "bodily_translation";
    case MovementClass::Intrusion: return "intrusion";
    case MovementClass::Torque: return "torque";
    case MovementClass::MesiodistalTip: return "mesiodistal_tip";
    case MovementClass::LabiolingualTip: return "labiolingual_tip";
  }
  return "?";
}

MovementClass movement_class_of(Component c) {
  switch (c) {
    case Component::Tx:
    case Component::Ty: return MovementClass::BodilyTranslation;
    case Component::Extrusion: return MovementClass::Extrusion;
    case Component::Intrusion: return MovementClass::Intrusion;
    case Component::Rx: return MovementClass::Torque;
    case Component::Ry: return MovementClass::MesiodistalTip;
    case Component::Rz: return MovementClass::Rotation;
  }
  return MovementClass::BodilyTranslation;
}

std::size_t PlanEvaluation::count(AlertLevel level) const {
  return static_cast<std::size_t>(
      std::count_if(evals.begin(), evals.end(), [level](const ConstraintEval& e) { return e.alert == level; }));
}

double observed_magnitude(const cases::ToothMovement& move, Component c, double lever_arm_mm) {
  switch (c) {
    case Component::Tx: return std::abs(move.t[0]);
    case Component::Ty: return std::abs(move.t[1]);
    case Component::Extrusion: return std::max(move.t[2], 0.0);
    case Component::Intrusion: return std::max(-move.t[2], 0.0);
    case Component::Rx: return std::abs(move.r[0]);
    case Component::Ry: return std::abs(std::sin(move.r[1] * std::numbers::pi / 180.0)) * lever_arm_mm;
    case Component::Rz: return std::abs(move.r[2]);
  }
  return 0.0;
}

PlanEvaluation evaluate_plan(std::span<const ToothRecord> teeth, const cases::MovementPlan& plan,
                             const KnowledgeBase& kb, const EvaluateOptions& options) {
  if (plan.stage_count < 1) throw Error(Errc::SchemaError, "stage_count must be >= 1");
  PlanEvaluation out;
  for (const auto& planned : plan.movements) {
    const ToothRecord* record = nullptr;
    for (const auto& t : teeth) {
      if (t.tooth == planned.tooth) {
        record = &t;
        break;
      }
    }
    if (record == nullptr) {
      throw Error(Errc::UnmatchedTooth,
                  "plan moves tooth " + std::to_string(planned.tooth.code()) + " which was not identified");
    }
    cases::ToothMovement move = planned;
    if (options.plan_is_total) {
      for (double& v : move.t) v /= plan.stage_count;
      for (double& v : move.r) v /= plan.stage_count;
    }
    const double lever = record->lever_arm_mm.value_or(options.default_lever_arm_mm);
    const ToothType type = planned.tooth.type();

    ToothPredictability pred;
    pred.tooth = planned.tooth;
    for (Component c : kAllComponents) {
      const auto rule_indices = kb.rules_for(type, c);
      if (rule_indices.empty()) {
        throw Error(Errc::MissingRule, "no rule for " + std::string(component_name(c)) + " on " +
                                           std::string(cases::tooth_type_name(type)));
      }
      const double observed = observed_magnitude(move, c, lever);
      for (std::size_t ri : rule_indices) {
        const ConstraintRule& rule = kb.rules()[ri];
        ConstraintEval e;
        e.tooth = planned.tooth;
        e.rule_index = ri;
        e.rule_id = rule.id;
        e.component = c;
        e.kind = rule.kind;
        e.observed = observed;
        e.limit = rule.limit;
        e.unit = rule.unit;
        e.sigma = satisfaction(observed, rule.limit, rule.alpha);
        e.alert = alert_for(rule.kind, e.sigma);
        out.evals.push_back(std::move(e));
      }
      const double normalized = observed / kb.limit_for(type, c);
      if (normalized > pred.normalized_magnitude) {
        pred.normalized_magnitude = normalized;
        pred.dominant = movement_class_of(c);
        pred.moving = true;
      }
    }
    pred.score = pred.moving ? options.predictability[pred.dominant] : 1.0;
    out.predictability.push_back(pred);
  }
  return out;
}

}  // namespace orthoai::csp
