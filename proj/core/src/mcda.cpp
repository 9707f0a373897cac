#include "orthoai/mcda.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numeric>

#include <nlohmann/json.hpp>

#include "orthoai/errors.hpp"
#include "orthoai/hashing.hpp"

namespace orthoai::mcda {

using json = nlohmann::json;

std::string_view criterion_name(Criterion c) {
  switch (c) {
    case Criterion::Bio: return "bio";
    case Criterion::Pred: return "pred";
    case Criterion::Stag: return "stag";
    case Criterion::Att: return "att";
    case Criterion::Ipr: return "ipr";
    case Criterion::Sym: return "sym";
  }
  return "?";
}

Criterion parse_criterion(std::string_view name) {
  for (Criterion c : kAllCriteria) {
    if (criterion_name(c) == name) return c;
  }
  throw Error(Errc::InvalidConfig, "unknown criterion '" + std::string(name) + "'");
}

SubScores SubScores::from_values(const std::array<double, kCriteria>& v) {
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

namespace {

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, ValueFunction, std::less<>>& registry() {
  static std::map<std::string, ValueFunction, std::less<>> r{{"identity", [](double s) { return s; }}};
  return r;
}

}  // namespace

const ValueFunction& value_function(std::string_view name) {
  std::lock_guard lock(registry_mutex());
  const auto it = registry().find(name);
  if (it == registry().end()) throw Error(Errc::InvalidConfig, "unknown value function '" + std::string(name) + "'");
  return it->second;
}

void register_value_function(std::string name, ValueFunction fn) {
  std::lock_guard lock(registry_mutex());
  registry()[std::move(name)] = std::move(fn);
}

void WavfConfig::validate() const {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0) || !std::isfinite(w)) throw Error(Errc::WeightSumError, "weights must be nonnegative and finite");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw Error(Errc::WeightSumError, "weights sum to " + std::to_string(sum) + ", expected 1");
  }
  for (std::size_t i = 0; i + 1 < thresholds.size(); ++i) {
    if (!(thresholds[i] > thresholds[i + 1])) throw Error(Errc::InvalidConfig, "grade thresholds must decrease");
  }
  for (const auto& f : value_functions) value_function(f);
}

std::string WavfConfig::to_json() const {
  json w = json::object(), v = json::object();
  for (std::size_t i = 0; i < kCriteria; ++i) {
    w[std::string(criterion_name(kAllCriteria[i]))] = weights[i];
    v[std::string(criterion_name(kAllCriteria[i]))] = value_functions[i];
  }
  return json{{"weights", w}, {"value_functions", v}, {"thresholds", thresholds}}.dump();
}

WavfConfig WavfConfig::from_json(std::string_view bytes) {
  WavfConfig c;
  try {
    const json j = json::parse(bytes.begin(), bytes.end());
    if (j.contains("weights")) {
      for (const auto& [k, val] : j.at("weights").items()) {
        c.weights[static_cast<std::size_t>(parse_criterion(k))] = val.get<double>();
      }
    }
    if (j.contains("value_functions")) {
      for (const auto& [k, val] : j.at("value_functions").items()) {
        c.value_functions[static_cast<std::size_t>(parse_criterion(k))] = val.get<std::string>();
      }
    }
    if (j.contains("thresholds")) c.thresholds = j.at("thresholds").get<std::array<double, 4>>();
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("wavf config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string WavfConfig::digest() const { return short_digest(to_json()); }

char grade_for(double score, const std::array<double, 4>& t) {
  if (score >= t[0]) return 'A';
  if (score >= t[1]) return 'B';
  if (score >= t[2]) return 'C';
  if (score >= t[3]) return 'D';
  return 'F';
}

Score wavf_score(const SubScores& s, const WavfConfig& cfg) {
  cfg.validate();
  const auto v = s.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < kCriteria; ++i) acc += cfg.weights[i] * value_function(cfg.value_functions[i])(v[i]);
  const double score = 100.0 * acc;
  return {score, grade_for(score, cfg.thresholds)};
}

// Sub-scores ------------------------------------------------------------------

namespace {

const csp::ToothRecord* find_record(std::span<const csp::ToothRecord> teeth, const cases::FdiLabel& tooth) {
  for (const auto& t : teeth) {
    if (t.tooth == tooth) return &t;
  }
  return nullptr;
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

int minimal_stages(const cases::MovementPlan& plan, std::span<const csp::ToothRecord> teeth,
                   const csp::KnowledgeBase& kb, const csp::EvaluateOptions& options) {
  int stages = 0;
  for (const auto& m : plan.movements) {
    const auto* rec = find_record(teeth, m.tooth);
    const double lever = rec && rec->lever_arm_mm ? *rec->lever_arm_mm : options.default_lever_arm_mm;
    cases::ToothMovement per_stage = m;
    if (options.plan_is_total) {
      for (double& x : per_stage.t) x /= plan.stage_count;
      for (double& x : per_stage.r) x /= plan.stage_count;
    }
    for (csp::Component c : csp::kAllComponents) {
      const double total = csp::observed_magnitude(per_stage, c, lever) * plan.stage_count;
      const double ratio = total / kb.limit_for(m.tooth.type(), c);
      // absorb rounding so an exact multiple of the limit is not bumped up a stage
      stages = std::max(stages, static_cast<int>(std::ceil(ratio - 1e-9)));
    }
  }
  return stages;
}

int estimate_duration(const cases::MovementPlan& plan, std::span<const csp::ToothRecord> teeth,
                      const csp::KnowledgeBase& kb, const SubscoreConfig& cfg, const csp::EvaluateOptions& options) {
  const int stages = minimal_stages(plan, teeth, kb, options);
  return static_cast<int>(std::ceil(stages * cfg.days_per_stage / cfg.days_per_month - 1e-9));
}

std::vector<int> attachment_indicated(const cases::MovementPlan& plan, const SubscoreConfig& cfg) {
  std::vector<int> out;
  for (const auto& m : plan.movements) {
    const bool rotation =
        std::any_of(m.r.begin(), m.r.end(), [&](double v) { return std::abs(v) > cfg.attachment_rotation_deg; });
    if (rotation || m.t[2] > 0.0) out.push_back(m.tooth.code());
  }
  return out;
}

double symmetry_score(const cases::ArchGeometry& geometry, const SubscoreConfig& cfg) {
  if (geometry.crowns.empty()) return 1.0;
  geometry::Vec3 center;
  for (const auto& c : geometry.crowns) center += c.frame.origin;
  center = center / static_cast<double>(geometry.crowns.size());
  double sq = 0.0;
  int pairs = 0;
  for (const auto& c : geometry.crowns) {
    if (c.tooth.quadrant() != 1 && c.tooth.quadrant() != 4) continue;  // each pair once
    const auto* other = geometry.find(c.tooth.contralateral().code());
    if (!other) continue;
    const double d = geometry::distance(c.frame.origin, center) - geometry::distance(other->frame.origin, center);
    sq += d * d;
    ++pairs;
  }
  if (pairs == 0) return 1.0;
  return 1.0 - clamp01(std::sqrt(sq / pairs) / cfg.symmetry_tolerance_mm);
}

double ipr_score(const cases::MovementPlan& plan, const cases::ArchGeometry& geometry, const SubscoreConfig& cfg) {
  double dev = 0.0;
  int crowded = 0;
  for (const auto& contact : cases::adjacent_contacts(geometry)) {
    if (!(contact.overlap_mm > 0.0)) continue;
    dev += std::abs(plan.ipr_for(contact.fdi_a, contact.fdi_b) - cfg.ipr_indicated_mm);
    ++crowded;
  }
  if (crowded == 0) return 1.0;
  return 1.0 - clamp01(dev / crowded / cfg.ipr_tolerance_mm);
}

SubScores compute_subscores(const csp::PlanEvaluation& eval, const cases::MovementPlan& plan,
                            std::span<const csp::ToothRecord> teeth, const cases::ArchGeometry& geometry,
                            const csp::KnowledgeBase& kb, const SubscoreConfig& cfg,
                            const csp::EvaluateOptions& options) {
  SubScores s;
  if (!eval.evals.empty()) {
    double acc = 0.0;
    for (const auto& e : eval.evals) acc += e.sigma;
    s.s_bio = acc / static_cast<double>(eval.evals.size());
  }
  double pred = 0.0;
  int moving = 0;
  for (const auto& p : eval.predictability) {
    if (!p.moving) continue;
    pred += p.score;
    ++moving;
  }
  s.p_bar = moving ? pred / moving : 1.0;
  const int minimal = minimal_stages(plan, teeth, kb, options);
  s.s_stag = minimal == 0 ? 1.0 : std::min(1.0, static_cast<double>(minimal) / plan.stage_count);
  const auto indicated = attachment_indicated(plan, cfg);
  if (!indicated.empty()) {
    const auto covered = std::count_if(indicated.begin(), indicated.end(), [&](int fdi) { return plan.has_attachment(fdi); });
    s.s_att = static_cast<double>(covered) / static_cast<double>(indicated.size());
  }
  s.s_ipr = ipr_score(plan, geometry, cfg);
  s.s_sym = symmetry_score(geometry, cfg);
  return s;
}

// Sensitivity -----------------------------------------------------------------

std::array<double, kCriteria> perturbed_weights(const std::array<double, kCriteria>& w, std::size_t i, double factor) {
  std::array<double, kCriteria> out = w;
  const double rest = 1.0 - w[i];
  const double wi = std::clamp(w[i] * (1.0 + factor), 0.0, 1.0);
  out[i] = wi;
  if (rest <= 0.0) return w;  // nothing to rescale against
  for (std::size_t j = 0; j < kCriteria; ++j) {
    if (j != i) out[j] = w[j] * (1.0 - wi) / rest;
  }
  return out;
}

std::vector<SensitivityEntry> sensitivity(const SubScores& s, const WavfConfig& cfg, double perturbation) {
  cfg.validate();
  const auto v = s.values();
  std::array<double, kCriteria> mapped{};
  for (std::size_t i = 0; i < kCriteria; ++i) mapped[i] = value_function(cfg.value_functions[i])(v[i]);
  // dS = 100 * sum_j (w'_j - w_j) * (v_j - v_i): the weight changes sum to zero,
  // so measuring against v_i is exact and gives exactly 0 when all values agree
  auto delta = [&](std::size_t i, const std::array<double, kCriteria>& w) {
    double acc = 0.0;
    for (std::size_t j = 0; j < kCriteria; ++j) acc += (w[j] - cfg.weights[j]) * (mapped[j] - mapped[i]);
    return 100.0 * acc;
  };
  std::vector<SensitivityEntry> out;
  for (std::size_t i = 0; i < kCriteria; ++i) {
    SensitivityEntry e;
    e.criterion = kAllCriteria[i];
    e.delta_minus = delta(i, perturbed_weights(cfg.weights, i, -perturbation));
    e.delta_plus = delta(i, perturbed_weights(cfg.weights, i, perturbation));
    e.max_abs = std::max(std::abs(e.delta_minus), std::abs(e.delta_plus));
    out.push_back(e);
  }
  return out;
}

// Assessment ------------------------------------------------------------------

std::vector<const csp::ConstraintEval*> Assessment::alerts() const {
  std::vector<const csp::ConstraintEval*> out;
  for (const auto& e : evaluations) {
    if (e.alert != csp::AlertLevel::None) out.push_back(&e);
  }
  return out;
}

std::string config_digest(const csp::KnowledgeBase& kb, const AssessOptions& o) {
  json j{{"kb", kb.to_json()},
         {"wavf", o.wavf.to_json()},
         {"ipr_indicated_mm", o.subscores.ipr_indicated_mm},
         {"ipr_tolerance_mm", o.subscores.ipr_tolerance_mm},
         {"symmetry_tolerance_mm", o.subscores.symmetry_tolerance_mm},
         {"attachment_rotation_deg", o.subscores.attachment_rotation_deg},
         {"days_per_stage", o.subscores.days_per_stage},
         {"days_per_month", o.subscores.days_per_month},
         {"default_lever_arm_mm", o.evaluate.default_lever_arm_mm},
         {"plan_is_total", o.evaluate.plan_is_total},
         {"predictability", o.evaluate.predictability.values},
         {"sensitivity_perturbation", o.sensitivity_perturbation}};
  return short_digest(j.dump());
}

Assessment assess(const cases::ArchCase& arch_case, std::span<const csp::ToothRecord> teeth,
                  const cases::MovementPlan& plan, const csp::KnowledgeBase& kb, const AssessOptions& options) {
  options.wavf.validate();
  Assessment a;
  a.case_id = arch_case.case_id;
  a.kb_version = kb.version();
  a.config_digest = config_digest(kb, options);
  a.wavf = options.wavf;
  a.plan = plan;
  a.teeth.assign(teeth.begin(), teeth.end());
  const auto geometry = cases::ArchGeometry::from_case(arch_case);
  auto eval = csp::evaluate_plan(teeth, plan, kb, options.evaluate);
  a.subscores = compute_subscores(eval, plan, teeth, geometry, kb, options.subscores, options.evaluate);
  a.score = wavf_score(a.subscores, options.wavf);
  a.minimal_stages = minimal_stages(plan, teeth, kb, options.evaluate);
  a.duration_months = estimate_duration(plan, teeth, kb, options.subscores, options.evaluate);
  a.sensitivity = sensitivity(a.subscores, options.wavf, options.sensitivity_perturbation);
  a.evaluations = std::move(eval.evals);
  a.predictability = std::move(eval.predictability);
  return a;
}

namespace {

json frame_json(const geometry::Frame3& f) {
  auto v = [](const geometry::Vec3& p) { return json::array({p.x, p.y, p.z}); };
  return {{"e1", v(f.e1)}, {"e2", v(f.e2)}, {"e3", v(f.e3)}, {"origin", v(f.origin)}};
}

geometry::Vec3 vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

geometry::Frame3 frame_from(const json& j) {
  return {vec_from(j.at("e1")), vec_from(j.at("e2")), vec_from(j.at("e3")), vec_from(j.at("origin"))};
}

csp::AlertLevel parse_alert(std::string_view s) {
  for (auto a : {csp::AlertLevel::None, csp::AlertLevel::Warning, csp::AlertLevel::Critical}) {
    if (csp::alert_name(a) == s) return a;
  }
  throw Error(Errc::SchemaError, "unknown alert level '" + std::string(s) + "'");
}

csp::MovementClass parse_movement_class(std::string_view s) {
  for (int i = 0; i < 7; ++i) {
    const auto c = static_cast<csp::MovementClass>(i);
    if (csp::movement_class_name(c) == s) return c;
  }
  throw Error(Errc::SchemaError, "unknown movement class '" + std::string(s) + "'");
}

json eval_json(const csp::ConstraintEval& e) {
  return {{"tooth", e.tooth.code()},
          {"rule", e.rule_id},
          {"component", csp::component_name(e.component)},
          {"kind", e.kind == csp::RuleKind::Hard ? "hard" : "soft"},
          {"observed", e.observed},
          {"limit", e.limit},
          {"unit", e.unit == csp::Unit::Mm ? "mm" : "deg"},
          {"sigma", e.sigma},
          {"severity", csp::alert_name(e.alert)}};
}

}  // namespace

std::string Assessment::to_json() const {
  json j;
  j["case_id"] = case_id;
  j["kb_version"] = kb_version;
  j["config_digest"] = config_digest;
  j["subscores"] = {{"bio", subscores.s_bio}, {"pred", subscores.p_bar}, {"stag", subscores.s_stag},
                    {"att", subscores.s_att}, {"ipr", subscores.s_ipr},  {"sym", subscores.s_sym}};
  j["weights"] = json::parse(wavf.to_json()).at("weights");
  j["wavf"] = json::parse(wavf.to_json());
  j["score"] = score.value;
  j["grade"] = std::string(1, score.grade);
  j["minimal_stages"] = minimal_stages;
  j["duration_months"] = duration_months;
  json alerts_j = json::array(), evals_j = json::array();
  for (const auto& e : evaluations) {
    evals_j.push_back(eval_json(e));
    if (e.alert != csp::AlertLevel::None) alerts_j.push_back(eval_json(e));
  }
  j["alerts"] = alerts_j;
  j["evaluations"] = evals_j;
  json pred = json::array();
  for (const auto& p : predictability) {
    pred.push_back({{"tooth", p.tooth.code()},
                    {"moving", p.moving},
                    {"dominant", csp::movement_class_name(p.dominant)},
                    {"normalized_magnitude", p.normalized_magnitude},
                    {"score", p.score}});
  }
  j["predictability"] = pred;
  json sens = json::object();
  for (const auto& s : sensitivity) {
    sens[std::string(criterion_name(s.criterion))] = {
        {"minus", s.delta_minus}, {"plus", s.delta_plus}, {"max_abs", s.max_abs}};
  }
  j["sensitivity"] = sens;
  json teeth_j = json::array();
  for (const auto& t : teeth) {
    json tj{{"fdi", t.tooth.code()}, {"centroid", {t.centroid.x, t.centroid.y, t.centroid.z}}, {"axes", frame_json(t.axes)}};
    tj["lever_arm_mm"] = t.lever_arm_mm ? json(*t.lever_arm_mm) : json(nullptr);
    teeth_j.push_back(tj);
  }
  j["teeth"] = teeth_j;
  j["plan"] = json::parse(cases::serialize_plan(plan));
  j["warnings"] = warnings;
  return j.dump(1) + "\n";
}

Assessment Assessment::from_json(std::string_view bytes, const csp::KnowledgeBase& kb) {
  Assessment a;
  try {
    const json j = json::parse(bytes.begin(), bytes.end());
    a.case_id = j.at("case_id").get<std::string>();
    a.kb_version = j.at("kb_version").get<std::string>();
    a.config_digest = j.at("config_digest").get<std::string>();
    const auto& s = j.at("subscores");
    a.subscores = {s.at("bio").get<double>(), s.at("pred").get<double>(), s.at("stag").get<double>(),
                   s.at("att").get<double>(), s.at("ipr").get<double>(),  s.at("sym").get<double>()};
    a.wavf = WavfConfig::from_json(j.at("wavf").dump());
    a.score.value = j.at("score").get<double>();
    a.score.grade = j.at("grade").get<std::string>().at(0);
    a.minimal_stages = j.at("minimal_stages").get<int>();
    a.duration_months = j.at("duration_months").get<int>();
    for (const auto& e : j.at("evaluations")) {
      csp::ConstraintEval ev;
      ev.tooth = cases::FdiLabel::from_code(e.at("tooth").get<int>());
      ev.rule_id = e.at("rule").get<std::string>();
      ev.component = csp::parse_component(e.at("component").get<std::string>());
      ev.kind = e.at("kind").get<std::string>() == "hard" ? csp::RuleKind::Hard : csp::RuleKind::Soft;
      ev.observed = e.at("observed").get<double>();
      ev.limit = e.at("limit").get<double>();
      ev.unit = e.at("unit").get<std::string>() == "mm" ? csp::Unit::Mm : csp::Unit::Degrees;
      ev.sigma = e.at("sigma").get<double>();
      ev.alert = parse_alert(e.at("severity").get<std::string>());
      for (std::size_t r = 0; r < kb.rules().size(); ++r) {
        if (kb.rules()[r].id == ev.rule_id) ev.rule_index = r;
      }
      a.evaluations.push_back(std::move(ev));
    }
    for (const auto& p : j.at("predictability")) {
      csp::ToothPredictability tp;
      tp.tooth = cases::FdiLabel::from_code(p.at("tooth").get<int>());
      tp.moving = p.at("moving").get<bool>();
      tp.dominant = parse_movement_class(p.at("dominant").get<std::string>());
      tp.normalized_magnitude = p.at("normalized_magnitude").get<double>();
      tp.score = p.at("score").get<double>();
      a.predictability.push_back(tp);
    }
    for (const auto& [k, v] : j.at("sensitivity").items()) {
      a.sensitivity.push_back(
          {parse_criterion(k), v.at("minus").get<double>(), v.at("plus").get<double>(), v.at("max_abs").get<double>()});
    }
    std::sort(a.sensitivity.begin(), a.sensitivity.end(),
              [](const auto& x, const auto& y) { return x.criterion < y.criterion; });
    for (const auto& t : j.at("teeth")) {
      csp::ToothRecord r;
      r.tooth = cases::FdiLabel::from_code(t.at("fdi").get<int>());
      r.centroid = vec_from(t.at("centroid"));
      r.axes = frame_from(t.at("axes"));
      if (!t.at("lever_arm_mm").is_null()) r.lever_arm_mm = t.at("lever_arm_mm").get<double>();
      a.teeth.push_back(r);
    }
    a.plan = cases::parse_plan_file(j.at("plan").dump());
    a.warnings = j.value("warnings", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("assessment: ") + e.what());
  }
  return a;
}

}  // namespace orthoai::mcda
