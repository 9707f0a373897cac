#include <gtest/gtest.h>

#include <random>
#include <set>

#include "orthoai/case_model.hpp"
#include "orthoai/csp.hpp"
#include "orthoai/errors.hpp"

using namespace orthoai;
using namespace orthoai::csp;
using cases::FdiLabel;

namespace {

cases::MovementPlan single_move(int fdi, std::array<double, 3> t, std::array<double, 3> r) {
  cases::MovementPlan p;
  p.case_id = "x";
  p.stage_count = 10;
  p.movements.push_back({FdiLabel::from_code(fdi), t, r});
  return p;
}

std::vector<ToothRecord> records_for(std::initializer_list<int> codes) {
  std::vector<ToothRecord> out;
  for (int c : codes) out.push_back({FdiLabel::from_code(c), {}, {}, 8.0});
  return out;
}

const ConstraintEval* find_eval(const PlanEvaluation& ev, int fdi, Component c) {
  for (const auto& e : ev.evals) {
    if (e.tooth.code() == fdi && e.component == c) return &e;
  }
  return nullptr;
}

}  // namespace

TEST(Satisfaction, Examples) {
  EXPECT_EQ(satisfaction(1.0, 2.0, 1.5), 1.0);
  EXPECT_EQ(satisfaction(2.5, 2.0, 1.5), 0.75);
  EXPECT_EQ(satisfaction(3.01, 2.0, 1.5), 0.0);
  EXPECT_EQ(satisfaction(-2.5, 2.0, 1.5), 0.75);
  // boundaries: v = limit satisfied, v = alpha * limit still graded
  EXPECT_EQ(satisfaction(2.0, 2.0, 1.5), 1.0);
  EXPECT_EQ(satisfaction(3.0, 2.0, 1.5), 0.5);
  EXPECT_THROW(satisfaction(1.0, 0.0, 1.5), Error);
}

TEST(Satisfaction, MonotoneNonIncreasing) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 5);
  for (int i = 0; i < 5000; ++i) {
    const double a = u(rng), b = u(rng), lim = 0.1 + u(rng);
    const double lo = std::min(a, b), hi = std::max(a, b);
    ASSERT_GE(satisfaction(lo, lim, 1.5), satisfaction(hi, lim, 1.5));
  }
}

TEST(Alerts, Levels) {
  EXPECT_EQ(alert_for(RuleKind::Soft, 1.0), AlertLevel::None);
  EXPECT_EQ(alert_for(RuleKind::Soft, 0.5), AlertLevel::Warning);
  EXPECT_EQ(alert_for(RuleKind::Soft, 0.0), AlertLevel::Critical);
  EXPECT_EQ(alert_for(RuleKind::Hard, 0.99), AlertLevel::Critical);
  EXPECT_EQ(alert_for(RuleKind::Hard, 1.0), AlertLevel::None);
}

TEST(KnowledgeBase, TableLimits) {
  const auto kb = default_knowledge_base();
  EXPECT_EQ(kb.version(), "table1-v1");
  EXPECT_EQ(kb.limit_for(cases::ToothType::Molar, Component::Rz), 1.5);
  const auto& molar = kb.rules()[kb.rules_for(cases::ToothType::Molar, Component::Rz).front()];
  EXPECT_EQ(molar.kind, RuleKind::Hard);
  for (auto t : {cases::ToothType::Incisor, cases::ToothType::Canine}) {
    EXPECT_EQ(kb.limit_for(t, Component::Extrusion), 0.15);
    EXPECT_EQ(kb.rules()[kb.rules_for(t, Component::Extrusion).front()].kind, RuleKind::Hard);
  }
  EXPECT_EQ(kb.limit_for(cases::ToothType::Canine, Component::Rz), 2.0);
  EXPECT_EQ(kb.limit_for(cases::ToothType::Premolar, Component::Tx), 0.25);
}

TEST(KnowledgeBase, Totality) {
  const auto kb = default_knowledge_base();
  EXPECT_NO_THROW(kb.check_totality());
  for (auto t : {cases::ToothType::Incisor, cases::ToothType::Canine, cases::ToothType::Premolar,
                 cases::ToothType::Molar}) {
    for (auto c : kAllComponents) EXPECT_FALSE(kb.rules_for(t, c).empty());
  }
  auto rules = kb.rules();
  rules.erase(rules.begin() + 5);  // canine rotation
  try {
    KnowledgeBase("broken", 1.5, rules);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingRule);
  }
  rules = kb.rules();
  rules[0].limit = 0.0;
  EXPECT_THROW(KnowledgeBase("bad", 1.5, rules), Error);
}

TEST(KnowledgeBase, JsonRoundTrip) {
  const auto kb = default_knowledge_base();
  const auto back = KnowledgeBase::from_json(kb.to_json());
  EXPECT_EQ(back.to_json(), kb.to_json());
  EXPECT_EQ(back.rules().size(), kb.rules().size());
}

TEST(Evaluate, MolarRotationJustOverLimit) {
  const auto kb = default_knowledge_base();
  const auto ev = evaluate_plan(records_for({16}), single_move(16, {0, 0, 0}, {0, 0, 1.6}), kb);
  const auto* e = find_eval(ev, 16, Component::Rz);
  ASSERT_NE(e, nullptr);
  EXPECT_NEAR(e->sigma, 1.0 - 0.1 / 1.5, 1e-12);
  EXPECT_EQ(e->alert, AlertLevel::Critical);
  EXPECT_EQ(ev.count(AlertLevel::Critical), 1u);
}

TEST(Evaluate, SoftWarningAndCritical) {
  const auto kb = default_knowledge_base();
  auto ev = evaluate_plan(records_for({13}), single_move(13, {0, 0, 0}, {0, 0, 2.5}), kb);
  EXPECT_EQ(find_eval(ev, 13, Component::Rz)->alert, AlertLevel::Warning);
  EXPECT_EQ(find_eval(ev, 13, Component::Rz)->sigma, 0.75);
  ev = evaluate_plan(records_for({13}), single_move(13, {0, 0, 0}, {0, 0, 3.5}), kb);
  EXPECT_EQ(find_eval(ev, 13, Component::Rz)->alert, AlertLevel::Critical);
}

TEST(Evaluate, EveryToothTimesEveryComponent) {
  const auto kb = default_knowledge_base();
  const auto c = cases::generate_synthetic_case(0);
  const auto recs = records_from_geometry(cases::ArchGeometry::from_case(c));
  const auto plan = cases::generate_synthetic_plan(c, 0, cases::Severity::Compliant, kb);
  const auto ev = evaluate_plan(recs, plan, kb);
  std::set<std::pair<int, int>> seen;
  for (const auto& e : ev.evals) seen.insert({e.tooth.code(), static_cast<int>(e.component)});
  EXPECT_EQ(seen.size(), plan.movements.size() * kAllComponents.size());
}

TEST(Evaluate, TipUsesLeverArm) {
  const cases::ToothMovement m{FdiLabel::from_code(11), {0, 0, 0}, {0, 2.0, 0}};
  EXPECT_NEAR(observed_magnitude(m, Component::Ry, 8.0), std::sin(2.0 * M_PI / 180) * 8.0, 1e-15);
  const cases::ToothMovement up{FdiLabel::from_code(11), {0, 0, 0.1}, {0, 0, 0}};
  EXPECT_EQ(observed_magnitude(up, Component::Extrusion, 8.0), 0.1);
  EXPECT_EQ(observed_magnitude(up, Component::Intrusion, 8.0), 0.0);
}

TEST(Evaluate, UnknownToothRecord) {
  const auto kb = default_knowledge_base();
  try {
    evaluate_plan(records_for({11}), single_move(16, {0.1, 0, 0}, {0, 0, 0}), kb);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnmatchedTooth);
  }
}

TEST(Evaluate, PlanIsTotalDividesByStages) {
  const auto kb = default_knowledge_base();
  EvaluateOptions opt;
  opt.plan_is_total = true;
  // 10 stages, total 2.0 mm -> 0.2 mm per stage: within the 0.25 mm limit
  const auto ev = evaluate_plan(records_for({21}), single_move(21, {2.0, 0, 0}, {0, 0, 0}), kb, opt);
  EXPECT_EQ(find_eval(ev, 21, Component::Tx)->sigma, 1.0);
  EXPECT_NEAR(find_eval(ev, 21, Component::Tx)->observed, 0.2, 1e-15);
}

TEST(Predictability, DominantMovement) {
  const auto kb = default_knowledge_base();
  auto ev = evaluate_plan(records_for({11}), single_move(11, {0.05, 0, 0.1}, {0, 0, 0.2}), kb);
  ASSERT_EQ(ev.predictability.size(), 1u);
  EXPECT_EQ(ev.predictability[0].dominant, MovementClass::Extrusion);
  EXPECT_EQ(ev.predictability[0].score, 0.30);
  ev = evaluate_plan(records_for({16}), single_move(16, {0, 0, 0}, {0, 0, 1.0}), kb);
  EXPECT_EQ(ev.predictability[0].dominant, MovementClass::Rotation);
  EXPECT_EQ(ev.predictability[0].score, 0.36);
  ev = evaluate_plan(records_for({16}), single_move(16, {0, 0, 0}, {0, 0, 0}), kb);
  EXPECT_FALSE(ev.predictability[0].moving);
}

TEST(Monotonicity, ScalingAComponentNeverRaisesSigma) {
  const auto kb = default_knowledge_base();
  const auto c = cases::generate_synthetic_case(1);
  const auto recs = records_from_geometry(cases::ArchGeometry::from_case(c));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(1.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto plan = cases::generate_synthetic_plan(c, static_cast<std::uint64_t>(trial), cases::Severity::Borderline, kb);
    auto bigger = plan;
    auto& m = bigger.movements[rng() % bigger.movements.size()];
    const auto comp = rng() % 6;
    const double f = u(rng);
    if (comp < 3) m.t[comp] *= f;
    else m.r[comp - 3] *= f;
    const auto a = evaluate_plan(recs, plan, kb), b = evaluate_plan(recs, bigger, kb);
    ASSERT_EQ(a.evals.size(), b.evals.size());
    for (std::size_t i = 0; i < a.evals.size(); ++i) {
      ASSERT_LE(b.evals[i].sigma, a.evals[i].sigma);
      ASSERT_GE(static_cast<int>(b.evals[i].alert), static_cast<int>(a.evals[i].alert));
    }
  }
}
