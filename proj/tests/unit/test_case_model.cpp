#include <gtest/gtest.h>

#include <map>
#include <set>

#include "orthoai/case_model.hpp"
#include "orthoai/csp.hpp"
#include "orthoai/errors.hpp"

using namespace orthoai;
using namespace orthoai::cases;

namespace {

const char* kOneTooth = R"({
  "case_id": "mini",
  "arch": "upper",
  "teeth": [{"fdi": 11, "landmarks": [
    {"category": "mesial", "position": [0, 0, 0]},
    {"category": "distal", "position": [8, 0, 0]},
    {"category": "lingual", "position": [4, -3, 0]},
    {"category": "buccal", "position": [4, 3, 0]},
    {"category": "facial", "position": [4, 3.2, 2]},
    {"category": "cusp", "position": [4, 0, 4]}
  ]}]
})";

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Io;
}

}  // namespace

TEST(Fdi, BijectionWithClassIndices) {
  std::set<int> seen;
  for (int q = 1; q <= 4; ++q) {
    for (int p = 1; p <= 8; ++p) {
      const auto l = FdiLabel::from_code(q * 10 + p);
      EXPECT_GE(l.class_index(), 1);
      EXPECT_LE(l.class_index(), 32);
      EXPECT_TRUE(seen.insert(l.class_index()).second);
      EXPECT_EQ(FdiLabel::from_class_index(l.class_index()), l);
    }
  }
  EXPECT_EQ(seen.size(), 32u);
}

TEST(Fdi, RejectsInvalidCodes) {
  for (int code : {0, 10, 19, 29, 39, 49, 50, 51, 9, -11, 100}) {
    EXPECT_FALSE(FdiLabel::is_valid_code(code)) << code;
    EXPECT_EQ(code_of([&] { FdiLabel::from_code(code); }), Errc::InvalidFdi) << code;
  }
  EXPECT_THROW(FdiLabel::from_class_index(0), Error);
  EXPECT_THROW(FdiLabel::from_class_index(33), Error);
}

TEST(Fdi, TypesAndContralateral) {
  const std::map<int, ToothType> expect{{1, ToothType::Incisor},  {2, ToothType::Incisor},  {3, ToothType::Canine},
                                        {4, ToothType::Premolar}, {5, ToothType::Premolar}, {6, ToothType::Molar},
                                        {7, ToothType::Molar},    {8, ToothType::Molar}};
  for (const auto& [pos, type] : expect) {
    for (int q = 1; q <= 4; ++q) {
      const auto l = FdiLabel::from_code(q * 10 + pos);
      EXPECT_EQ(l.type(), type);
      EXPECT_EQ(l.anterior(), pos <= 3);
    }
  }
  EXPECT_EQ(FdiLabel::from_code(16).contralateral().code(), 26);
  EXPECT_EQ(FdiLabel::from_code(26).contralateral().code(), 16);
  EXPECT_EQ(FdiLabel::from_code(33).contralateral().code(), 43);
  EXPECT_TRUE(FdiLabel::from_code(27).upper());
  EXPECT_FALSE(FdiLabel::from_code(37).upper());
}

TEST(LandmarkFile, MinimalValid) {
  const auto c = parse_landmark_file(kOneTooth);
  ASSERT_EQ(c.teeth.size(), 1u);
  EXPECT_EQ(c.teeth[0].tooth.code(), 11);
  EXPECT_EQ(c.teeth[0].tooth.type(), ToothType::Incisor);
  EXPECT_EQ(c.teeth[0].cusps.size(), 1u);
  EXPECT_TRUE(c.warnings.empty());
}

TEST(LandmarkFile, Errors) {
  std::string bad = kOneTooth;
  bad.replace(bad.find("\"fdi\": 11"), 9, "\"fdi\": 19");
  EXPECT_EQ(code_of([&] { parse_landmark_file(bad); }), Errc::InvalidFdi);

  EXPECT_EQ(code_of([] { parse_landmark_file("{not json"); }), Errc::SchemaError);
  EXPECT_EQ(code_of([] { parse_landmark_file(R"({"case_id":"x","arch":"upper"})"); }), Errc::SchemaError);

  std::string missing = kOneTooth;
  missing.erase(missing.find("{\"category\": \"facial\""), std::string(R"({"category": "facial", "position": [4, 3.2, 2]},)").size());
  EXPECT_EQ(code_of([&] { parse_landmark_file(missing); }), Errc::SchemaError);

  std::string dup = R"({"case_id":"d","arch":"upper","teeth":[)";
  const std::string tooth = R"({"fdi": 11, "landmarks": [
    {"category": "mesial", "position": [0, 0, 0]}, {"category": "distal", "position": [8, 0, 0]},
    {"category": "lingual", "position": [4, -3, 0]}, {"category": "buccal", "position": [4, 3, 0]},
    {"category": "facial", "position": [4, 3.2, 2]}]})";
  dup += tooth + "," + tooth + "]}";
  EXPECT_EQ(code_of([&] { parse_landmark_file(dup); }), Errc::DuplicateTooth);

  std::string degenerate = kOneTooth;
  degenerate.replace(degenerate.find("[8, 0, 0]"), 9, "[0, 0, 0]");
  EXPECT_EQ(code_of([&] { parse_landmark_file(degenerate); }), Errc::DegenerateLandmarks);
}

TEST(LandmarkFile, UnknownCategoryIsWarning) {
  std::string s = kOneTooth;
  s.replace(s.find("{\"category\": \"cusp\""), 0, R"({"category": "bracket", "position": [1, 1, 1]}, )");
  const auto c = parse_landmark_file(s);
  ASSERT_EQ(c.warnings.size(), 1u);
  EXPECT_NE(c.warnings[0].find("bracket"), std::string::npos);
}

TEST(LandmarkFile, RoundTrip) {
  for (std::uint64_t seed : {0u, 1u, 42u}) {
    const auto c = generate_synthetic_case(seed);
    const auto back = parse_landmark_file(serialize_landmark_file(c));
    EXPECT_EQ(back.case_id, c.case_id);
    EXPECT_EQ(back.arch, c.arch);
    EXPECT_EQ(back.teeth, c.teeth);
  }
}

TEST(PlanFile, RoundTrip) {
  const auto kb = csp::default_knowledge_base();
  const auto c = generate_synthetic_case(3);
  for (auto sev : {Severity::Compliant, Severity::Borderline, Severity::Violating}) {
    const auto plan = generate_synthetic_plan(c, 5, sev, kb);
    EXPECT_EQ(parse_plan_file(serialize_plan(plan)), plan);
  }
}

TEST(Generator, ZeroJitterWidthsExact) {
  GeneratorConfig cfg;
  cfg.jitter_mm = 0.0;
  const auto c = generate_synthetic_case(7, cfg);
  ASSERT_EQ(c.teeth.size(), 14u);
  for (const auto& t : c.teeth) {
    EXPECT_NEAR(geometry::distance(t.mesial, t.distal), cfg.dims(t.tooth.type()).mesiodistal, 1e-9)
        << t.tooth.code();
  }
}

TEST(Generator, Deterministic) {
  EXPECT_EQ(serialize_landmark_file(generate_synthetic_case(11)), serialize_landmark_file(generate_synthetic_case(11)));
  EXPECT_NE(serialize_landmark_file(generate_synthetic_case(11)), serialize_landmark_file(generate_synthetic_case(12)));
}

TEST(Generator, HundredCasesMeanWidths) {
  const GeneratorConfig cfg;
  std::map<ToothType, std::pair<double, int>> acc;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto c = generate_synthetic_case(seed, cfg);
    EXPECT_NO_THROW(c.validate());
    for (const auto& t : c.teeth) {
      auto& [sum, n] = acc[t.tooth.type()];
      sum += geometry::distance(t.mesial, t.distal);
      ++n;
    }
  }
  for (const auto& [type, sn] : acc) {
    const double mean = sn.first / sn.second;
    EXPECT_NEAR(mean, cfg.dims(type).mesiodistal, 0.1 * cfg.dims(type).mesiodistal);
  }
}

TEST(Generator, LowerArchUsesLowerQuadrants) {
  GeneratorConfig cfg;
  cfg.arch = Arch::Lower;
  const auto c = generate_synthetic_case(1, cfg);
  for (const auto& t : c.teeth) EXPECT_FALSE(t.tooth.upper());
}

TEST(Generator, RejectsBadConfig) {
  GeneratorConfig cfg;
  cfg.tooth_count = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

class PlanSeverity : public ::testing::Test {
 protected:
  csp::KnowledgeBase kb = csp::default_knowledge_base();

  csp::PlanEvaluation eval(const ArchCase& c, const MovementPlan& p) {
    const auto records = csp::records_from_geometry(ArchGeometry::from_case(c));
    return csp::evaluate_plan(records, p, kb);
  }
};

TEST_F(PlanSeverity, CompliantHasNoAlerts) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto c = generate_synthetic_case(s);
    const auto ev = eval(c, generate_synthetic_plan(c, s, Severity::Compliant, kb));
    EXPECT_EQ(ev.count(csp::AlertLevel::Warning) + ev.count(csp::AlertLevel::Critical), 0u);
    for (const auto& e : ev.evals) EXPECT_EQ(e.sigma, 1.0);
  }
}

TEST_F(PlanSeverity, ViolatingHasCritical) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto c = generate_synthetic_case(s);
    const auto ev = eval(c, generate_synthetic_plan(c, s, Severity::Violating, kb));
    EXPECT_GE(ev.count(csp::AlertLevel::Critical), 1u);
  }
}

TEST_F(PlanSeverity, BorderlineAlertFrequency) {
  std::size_t flagged = 0, teeth = 0;
  const auto c = generate_synthetic_case(0);
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const auto ev = eval(c, generate_synthetic_plan(c, s, Severity::Borderline, kb));
    std::set<int> alerting;
    for (const auto& e : ev.evals) {
      if (e.alert != csp::AlertLevel::None) alerting.insert(e.tooth.code());
    }
    flagged += alerting.size();
    teeth += c.teeth.size();
  }
  EXPECT_NEAR(static_cast<double>(flagged) / static_cast<double>(teeth), 0.3, 0.05);
}

TEST(Severity, Names) {
  EXPECT_EQ(parse_severity("borderline"), Severity::Borderline);
  EXPECT_EQ(severity_name(Severity::Violating), "violating");
  EXPECT_THROW(parse_severity("mild"), Error);
}

TEST(CrownGeometry, EllipsoidAndContacts) {
  const auto c = parse_landmark_file(kOneTooth);
  const auto e = crown_ellipsoid(c.teeth[0]);
  EXPECT_NEAR(e.semi_axes[0], 4.0, 1e-12);
  EXPECT_NEAR(e.semi_axes[1], 3.0, 1e-12);
  EXPECT_NEAR(e.semi_axes[2], 4.0, 1e-12);

  const auto g = ArchGeometry::from_case(generate_synthetic_case(2));
  const auto contacts = adjacent_contacts(g);
  // 14 teeth on one arch: 6 neighbours per side plus the midline pair
  EXPECT_EQ(contacts.size(), 13u);
}
