#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "orthoai/case_model.hpp"
#include "orthoai/csp.hpp"
#include "orthoai/errors.hpp"

namespace orthoai::cases {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

// Write a component magnitude (in its rule unit) into the raw movement.
void set_component(ToothMovement& m, csp::Component c, double magnitude, double sign, double lever_mm) {
  switch (c) {
    case csp::Component::Tx: m.t[0] = sign * magnitude; break;
    case csp::Component::Ty: m.t[1] = sign * magnitude; break;
    case csp::Component::Extrusion: m.t[2] = magnitude; break;
    case csp::Component::Intrusion: m.t[2] = -magnitude; break;
    case csp::Component::Rx: m.r[0] = sign * magnitude; break;
    case csp::Component::Ry: m.r[1] = sign * std::asin(std::min(1.0, magnitude / lever_mm)) * kDeg; break;
    case csp::Component::Rz: m.r[2] = sign * magnitude; break;
  }
}

}  // namespace

MovementPlan generate_synthetic_plan(const ArchCase& arch_case, std::uint64_t seed, Severity severity,
                                     const csp::KnowledgeBase& kb) {
  if (arch_case.teeth.empty()) throw Error(Errc::SchemaError, "case has no teeth");
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  auto coin = [&](double p) { return unit(rng) < p; };
  auto sign = [&] { return coin(0.5) ? 1.0 : -1.0; };

  const ArchGeometry geometry = ArchGeometry::from_case(arch_case);

  MovementPlan plan;
  plan.case_id = arch_case.case_id;
  plan.stage_count = 15 + static_cast<int>(rng() % 16);

  // compliant base: each raw component moves with probability 1/2, within 0.8x
  for (std::size_t i = 0; i < arch_case.teeth.size(); ++i) {
    const FdiLabel tooth = arch_case.teeth[i].tooth;
    const ToothType type = tooth.type();
    const double lever = geometry.crowns[i].semi_axes[2];
    ToothMovement m;
    m.tooth = tooth;
    using C = csp::Component;
    for (C c : {C::Tx, C::Ty, C::Rx, C::Ry, C::Rz}) {
      if (coin(0.5)) set_component(m, c, uniform(0.05, 0.8) * kb.limit_for(type, c), sign(), lever);
    }
    if (coin(0.5)) {
      const C vertical = coin(0.5) ? C::Extrusion : C::Intrusion;
      set_component(m, vertical, uniform(0.05, 0.8) * kb.limit_for(type, vertical), 1.0, lever);
    }
    plan.movements.push_back(m);
  }

  auto push_component = [&](std::size_t tooth_index, double lo, double hi) {
    const auto c = csp::kAllComponents[rng() % csp::kAllComponents.size()];
    ToothMovement& m = plan.movements[tooth_index];
    set_component(m, c, uniform(lo, hi) * kb.limit_for(m.tooth.type(), c), sign(),
                  geometry.crowns[tooth_index].semi_axes[2]);
  };

  if (severity == Severity::Borderline) {
    for (std::size_t i = 0; i < plan.movements.size(); ++i) {
      if (coin(0.3)) push_component(i, 1.02, 1.48);
    }
  } else if (severity == Severity::Violating) {
    const int count = 1 + static_cast<int>(rng() % 2);
    for (int n = 0; n < count; ++n) push_component(rng() % plan.movements.size(), 1.55, 2.5);
  }

  // attachments wherever a rotation above 1.5 degrees or an extrusion is planned
  for (const auto& m : plan.movements) {
    const bool rotation = std::any_of(m.r.begin(), m.r.end(), [](double v) { return std::abs(v) > 1.5; });
    if (rotation || m.t[2] > 0.0) plan.attachments.push_back(m.tooth.code());
  }
  std::sort(plan.attachments.begin(), plan.attachments.end());

  for (const auto& contact : adjacent_contacts(geometry)) {
    if (contact.overlap_mm > 0.0) {
      plan.ipr.push_back({contact.fdi_a, contact.fdi_b, std::round(uniform(0.15, 0.35) * 100.0) / 100.0});
    }
  }
  return plan;
}

}  // namespace orthoai::cases
