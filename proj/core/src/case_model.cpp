#include "orthoai/case_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "orthoai/errors.hpp"

namespace orthoai::cases {

using json = nlohmann::json;
using geometry::dot;
using geometry::norm;

std::string_view tooth_type_name(ToothType type) {
  switch (type) {
    case ToothType::Incisor: return "incisor";
    case ToothType::Canine: return "canine";
    case ToothType::Premolar: return "premolar";
    case ToothType::Molar: return "molar";
  }
  return "unknown";
}

bool FdiLabel::is_valid_code(int code) {
  const int q = code / 10;
  const int p = code % 10;
  return code >= 11 && code <= 48 && q >= 1 && q <= 4 && p >= 1 && p <= 8;
}

FdiLabel FdiLabel::from_code(int code) {
  if (!is_valid_code(code)) throw Error(Errc::InvalidFdi, "FDI code " + std::to_string(code));
  return FdiLabel(code);
}

FdiLabel FdiLabel::from_class_index(int class_index) {
  if (class_index < 1 || class_index > 32) {
    throw Error(Errc::InvalidFdi, "class index " + std::to_string(class_index));
  }
  const int q = (class_index - 1) / 8 + 1;
  const int p = (class_index - 1) % 8 + 1;
  return FdiLabel(q * 10 + p);
}

ToothType FdiLabel::type() const {
  const int p = position();
  if (p <= 2) return ToothType::Incisor;
  if (p == 3) return ToothType::Canine;
  if (p <= 5) return ToothType::Premolar;
  return ToothType::Molar;
}

FdiLabel FdiLabel::contralateral() const {
  static constexpr int kMirror[5] = {0, 2, 1, 4, 3};
  return FdiLabel(kMirror[quadrant()] * 10 + position());
}

std::string_view arch_name(Arch arch) { return arch == Arch::Upper ? "upper" : "lower"; }

bool ToothMovement::any_nonzero() const {
  return std::any_of(t.begin(), t.end(), [](double v) { return v != 0.0; }) ||
         std::any_of(r.begin(), r.end(), [](double v) { return v != 0.0; });
}

const ToothMovement* MovementPlan::find(int fdi) const {
  for (const auto& m : movements) {
    if (m.tooth.code() == fdi) return &m;
  }
  return nullptr;
}

bool MovementPlan::has_attachment(int fdi) const {
  return std::find(attachments.begin(), attachments.end(), fdi) != attachments.end();
}

double MovementPlan::ipr_for(int fdi_a, int fdi_b) const {
  for (const auto& c : ipr) {
    if ((c.fdi_a == fdi_a && c.fdi_b == fdi_b) || (c.fdi_a == fdi_b && c.fdi_b == fdi_a)) return c.mm;
  }
  return 0.0;
}

const LandmarkSet* ArchCase::find(int fdi) const {
  for (const auto& t : teeth) {
    if (t.tooth.code() == fdi) return &t;
  }
  return nullptr;
}

void ArchCase::validate() const {
  if (case_id.empty()) throw Error(Errc::SchemaError, "case_id is empty");
  if (case_id.find_first_of("/\\.") != std::string::npos) {
    throw Error(Errc::SchemaError, "case_id must not contain '/', '\\' or '.'");
  }
  std::set<int> seen;
  for (const auto& t : teeth) {
    if (!seen.insert(t.tooth.code()).second) {
      throw Error(Errc::DuplicateTooth, "tooth " + std::to_string(t.tooth.code()) + " listed twice");
    }
    if (t.tooth.upper() != (arch == Arch::Upper)) {
      throw Error(Errc::SchemaError, "tooth " + std::to_string(t.tooth.code()) + " is not in the " +
                                         std::string(arch_name(arch)) + " arch");
    }
    for (const Vec3* p : {&t.mesial, &t.distal, &t.buccal, &t.lingual, &t.facial}) {
      if (!geometry::is_finite(*p)) throw Error(Errc::SchemaError, "non-finite landmark coordinate");
    }
    if (geometry::distance(t.mesial, t.distal) <= 1e-6 || geometry::distance(t.buccal, t.lingual) <= 1e-6) {
      throw Error(Errc::DegenerateLandmarks,
                  "tooth " + std::to_string(t.tooth.code()) + " has coincident landmarks");
    }
  }
  if (plan) {
    if (plan->stage_count < 1) throw Error(Errc::SchemaError, "stage_count must be >= 1");
  }
}

// JSON ---------------------------------------------------------------------

namespace {

Vec3 parse_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(Errc::SchemaError, std::string(what) + " must be a 3-element array");
  }
  for (const auto& v : j) {
    if (!v.is_number()) throw Error(Errc::SchemaError, std::string(what) + " must be numeric");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

const json& require(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(Errc::SchemaError, std::string("missing required field '") + key + "'");
  }
  return obj.at(key);
}

// Accepted landmark category spellings, including the 3DTeethLand-style
// inner/outer names.
std::optional<std::string> canonical_category(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  static const std::map<std::string, std::string> kAliases = {
      {"mesial", "mesial"}, {"distal", "distal"}, {"buccal", "buccal"}, {"outer", "buccal"},
      {"lingual", "lingual"}, {"inner", "lingual"}, {"facial", "facial"}, {"facialpoint", "facial"},
      {"cusp", "cusp"}, {"cusp_tip", "cusp"}, {"cusptip", "cusp"}};
  auto it = kAliases.find(name);
  if (it == kAliases.end()) return std::nullopt;
  return it->second;
}

json parse_json(std::string_view bytes) {
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw Error(Errc::SchemaError, std::string("malformed JSON: ") + e.what());
  }
}

int require_int(const json& j, const char* what) {
  if (!j.is_number_integer()) throw Error(Errc::SchemaError, std::string(what) + " must be an integer");
  return j.get<int>();
}

}  // namespace

ArchCase parse_landmark_file(std::string_view bytes) {
  const json root = parse_json(bytes);
  ArchCase out;
  const json& id = require(root, "case_id");
  if (!id.is_string()) throw Error(Errc::SchemaError, "case_id must be a string");
  out.case_id = id.get<std::string>();
  const json& arch = require(root, "arch");
  if (arch == "upper") {
    out.arch = Arch::Upper;
  } else if (arch == "lower") {
    out.arch = Arch::Lower;
  } else {
    throw Error(Errc::SchemaError, "arch must be \"upper\" or \"lower\"");
  }
  const json& teeth = require(root, "teeth");
  if (!teeth.is_array()) throw Error(Errc::SchemaError, "teeth must be an array");
  std::set<int> seen;
  for (const auto& tj : teeth) {
    const int code = require_int(require(tj, "fdi"), "fdi");
    LandmarkSet lm;
    lm.tooth = FdiLabel::from_code(code);
    if (!seen.insert(code).second) {
      throw Error(Errc::DuplicateTooth, "tooth " + std::to_string(code) + " listed twice");
    }
    const json& landmarks = require(tj, "landmarks");
    if (!landmarks.is_array()) throw Error(Errc::SchemaError, "landmarks must be an array");
    std::set<std::string> found;
    for (const auto& lj : landmarks) {
      const json* cat = nullptr;
      for (const char* key : {"category", "class", "label"}) {
        if (lj.is_object() && lj.contains(key)) {
          cat = &lj.at(key);
          break;
        }
      }
      if (cat == nullptr || !cat->is_string()) {
        throw Error(Errc::SchemaError, "landmark of tooth " + std::to_string(code) + " has no category");
      }
      const json* pos = nullptr;
      for (const char* key : {"position", "coord"}) {
        if (lj.contains(key)) {
          pos = &lj.at(key);
          break;
        }
      }
      if (pos == nullptr) {
        throw Error(Errc::SchemaError, "landmark of tooth " + std::to_string(code) + " has no position");
      }
      const auto category = canonical_category(cat->get<std::string>());
      if (!category) {
        out.warnings.push_back("tooth " + std::to_string(code) + ": ignored unknown landmark category '" +
                               cat->get<std::string>() + "'");
        continue;
      }
      const Vec3 p = parse_vec3(*pos, "position");
      if (*category == "cusp") {
        lm.cusps.push_back(p);
        continue;
      }
      if (!found.insert(*category).second) {
        out.warnings.push_back("tooth " + std::to_string(code) + ": duplicate '" + *category +
                               "' landmark ignored");
        continue;
      }
      if (*category == "mesial") lm.mesial = p;
      else if (*category == "distal") lm.distal = p;
      else if (*category == "buccal") lm.buccal = p;
      else if (*category == "lingual") lm.lingual = p;
      else lm.facial = p;
    }
    for (const char* needed : {"mesial", "distal", "buccal", "lingual", "facial"}) {
      if (!found.count(needed)) {
        throw Error(Errc::SchemaError,
                    "tooth " + std::to_string(code) + " lacks the '" + needed + "' landmark");
      }
    }
    out.teeth.push_back(std::move(lm));
  }
  out.validate();
  return out;
}

std::string serialize_landmark_file(const ArchCase& arch_case) {
  json root;
  root["case_id"] = arch_case.case_id;
  root["arch"] = std::string(arch_name(arch_case.arch));
  json teeth = json::array();
  for (const auto& t : arch_case.teeth) {
    json lms = json::array();
    const std::pair<const char*, const Vec3*> named[] = {{"mesial", &t.mesial}, {"distal", &t.distal},
                                                         {"buccal", &t.buccal}, {"lingual", &t.lingual},
                                                         {"facial", &t.facial}};
    for (const auto& [name, p] : named) lms.push_back({{"category", name}, {"position", vec3_json(*p)}});
    for (const auto& c : t.cusps) lms.push_back({{"category", "cusp"}, {"position", vec3_json(c)}});
    teeth.push_back({{"fdi", t.tooth.code()}, {"landmarks", std::move(lms)}});
  }
  root["teeth"] = std::move(teeth);
  return root.dump(1) + "\n";
}

MovementPlan parse_plan_file(std::string_view bytes) {
  const json root = parse_json(bytes);
  MovementPlan plan;
  const json& id = require(root, "case_id");
  if (!id.is_string()) throw Error(Errc::SchemaError, "case_id must be a string");
  plan.case_id = id.get<std::string>();
  plan.stage_count = require_int(require(root, "stage_count"), "stage_count");
  if (plan.stage_count < 1) throw Error(Errc::SchemaError, "stage_count must be >= 1");
  std::set<int> seen;
  for (const auto& mj : require(root, "movements")) {
    ToothMovement m;
    m.tooth = FdiLabel::from_code(require_int(require(mj, "fdi"), "fdi"));
    if (!seen.insert(m.tooth.code()).second) {
      throw Error(Errc::DuplicateTooth, "movement for tooth " + std::to_string(m.tooth.code()) + " repeated");
    }
    const Vec3 t = parse_vec3(require(mj, "t"), "t");
    const Vec3 r = parse_vec3(require(mj, "r"), "r");
    m.t = {t.x, t.y, t.z};
    m.r = {r.x, r.y, r.z};
    for (double v : m.t) if (!std::isfinite(v)) throw Error(Errc::SchemaError, "non-finite movement");
    for (double v : m.r) if (!std::isfinite(v)) throw Error(Errc::SchemaError, "non-finite movement");
    plan.movements.push_back(m);
  }
  if (root.contains("attachments")) {
    for (const auto& a : root.at("attachments")) {
      plan.attachments.push_back(FdiLabel::from_code(require_int(a, "attachment")).code());
    }
    std::sort(plan.attachments.begin(), plan.attachments.end());
    plan.attachments.erase(std::unique(plan.attachments.begin(), plan.attachments.end()), plan.attachments.end());
  }
  if (root.contains("ipr_mm")) {
    for (const auto& cj : root.at("ipr_mm")) {
      const json& contact = require(cj, "contact");
      if (!contact.is_array() || contact.size() != 2) {
        throw Error(Errc::SchemaError, "ipr contact must list two FDI codes");
      }
      IprContact c;
      c.fdi_a = FdiLabel::from_code(require_int(contact[0], "contact")).code();
      c.fdi_b = FdiLabel::from_code(require_int(contact[1], "contact")).code();
      const json& mm = require(cj, "mm");
      if (!mm.is_number() || mm.get<double>() < 0 || !std::isfinite(mm.get<double>())) {
        throw Error(Errc::SchemaError, "ipr mm must be a nonnegative number");
      }
      c.mm = mm.get<double>();
      plan.ipr.push_back(c);
    }
  }
  return plan;
}

std::string serialize_plan(const MovementPlan& plan) {
  json root;
  root["case_id"] = plan.case_id;
  root["stage_count"] = plan.stage_count;
  json moves = json::array();
  for (const auto& m : plan.movements) {
    moves.push_back({{"fdi", m.tooth.code()}, {"t", m.t}, {"r", m.r}});
  }
  root["movements"] = std::move(moves);
  root["attachments"] = plan.attachments;
  json ipr = json::array();
  for (const auto& c : plan.ipr) ipr.push_back({{"contact", {c.fdi_a, c.fdi_b}}, {"mm", c.mm}});
  root["ipr_mm"] = std::move(ipr);
  return root.dump(1) + "\n";
}

// Crown geometry -------------------------------------------------------------

CrownEllipsoid crown_ellipsoid(const LandmarkSet& lm) {
  CrownEllipsoid out;
  out.tooth = lm.tooth;
  out.frame = geometry::build_tooth_frame(lm.mesial, lm.distal, lm.lingual, lm.buccal);
  const double a1 = geometry::distance(lm.distal, lm.mesial) / 2.0;
  const double a2 = geometry::distance(lm.buccal, lm.lingual) / 2.0;
  double a3 = 0.0;
  for (const auto& c : lm.cusps) a3 = std::max(a3, std::abs(dot(c - out.frame.origin, out.frame.e3)));
  if (lm.cusps.empty() || a3 <= 1e-6) a3 = 0.8 * std::max(a1, a2);
  out.semi_axes = {a1, a2, a3};
  return out;
}

ArchGeometry ArchGeometry::from_case(const ArchCase& arch_case) {
  ArchGeometry g;
  g.crowns.reserve(arch_case.teeth.size());
  for (const auto& t : arch_case.teeth) g.crowns.push_back(crown_ellipsoid(t));
  return g;
}

const CrownEllipsoid* ArchGeometry::find(int fdi) const {
  for (const auto& c : crowns) {
    if (c.tooth.code() == fdi) return &c;
  }
  return nullptr;
}

namespace {

double support_extent(const CrownEllipsoid& c, const Vec3& u) {
  double acc = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    const double s = c.semi_axes[j] * dot(u, c.frame.axis(j));
    acc += s * s;
  }
  return std::sqrt(acc);
}

}  // namespace

std::vector<Contact> adjacent_contacts(const ArchGeometry& geometry) {
  std::vector<std::pair<int, int>> pairs;
  for (const auto& c : geometry.crowns) {
    const int code = c.tooth.code();
    const int q = code / 10;
    const int p = code % 10;
    if (p < 8 && geometry.find(q * 10 + p + 1)) pairs.emplace_back(code, q * 10 + p + 1);
  }
  for (const auto& [a, b] : {std::pair{11, 21}, std::pair{41, 31}}) {
    if (geometry.find(a) && geometry.find(b)) pairs.emplace_back(a, b);
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<Contact> out;
  for (const auto& [a, b] : pairs) {
    const CrownEllipsoid& ca = *geometry.find(a);
    const CrownEllipsoid& cb = *geometry.find(b);
    const Vec3 d = cb.frame.origin - ca.frame.origin;
    const double len = norm(d);
    double overlap = 0.0;
    if (len > 0) {
      const Vec3 u = d / len;
      overlap = support_extent(ca, u) + support_extent(cb, u) - len;
    }
    out.push_back({a, b, overlap});
  }
  return out;
}

// Synthetic cases ------------------------------------------------------------

void GeneratorConfig::validate() const {
  if (tooth_count < 1 || tooth_count > 16) throw Error(Errc::InvalidConfig, "tooth_count must be in 1..16");
  if (!(arch_radius_mm > 0)) throw Error(Errc::InvalidConfig, "arch_radius_mm must be positive");
  if (!(jitter_mm >= 0) || !(arch_variation >= 0) || !(interproximal_gap_mm >= 0) || !(crowding_mm >= 0)) {
    throw Error(Errc::InvalidConfig, "generator scales must be nonnegative");
  }
  for (const auto& c : crowns) {
    if (!(c.mesiodistal > 0 && c.buccolingual > 0 && c.height > 0)) {
      throw Error(Errc::InvalidConfig, "crown dimensions must be positive");
    }
  }
}

std::string synthetic_case_id(std::uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "synth-%04llu", static_cast<unsigned long long>(seed));
  return buf;
}

namespace {

// Arch curve y = -x^2 / (2R) in the occlusal plane, parameterised by arc length
// from the midline on the x >= 0 side.
struct ArchCurve {
  double radius;

  double arc_length(double x) const {
    const double u = x / radius;
    return radius * 0.5 * (u * std::sqrt(1 + u * u) + std::asinh(u));
  }
  double x_at(double s) const {
    double lo = 0.0;
    double hi = 1.0;
    while (arc_length(hi) < s) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (arc_length(mid) < s ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }
};

}  // namespace

ArchCase generate_synthetic_case(std::uint64_t seed, const GeneratorConfig& config) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  ArchCase out;
  out.case_id = synthetic_case_id(seed);
  out.arch = config.arch;

  const double radius = config.arch_radius_mm * std::max(0.5, 1.0 + config.arch_variation * gauss(rng));
  const ArchCurve curve{radius};
  const int right_count = (config.tooth_count + 1) / 2;
  const int left_count = config.tooth_count / 2;
  const bool upper = config.arch == Arch::Upper;
  // occlusal direction: upper crowns point down toward the occlusal plane z = 0
  const double occlusal = upper ? -1.0 : 1.0;

  for (int side = 0; side < 2; ++side) {
    const int count = side == 0 ? right_count : left_count;
    const double mirror = side == 0 ? -1.0 : 1.0;  // patient's right at x < 0
    const int quadrant = upper ? (side == 0 ? 1 : 2) : (side == 0 ? 4 : 3);
    double s = config.interproximal_gap_mm / 2.0;
    for (int pos = 1; pos <= count; ++pos) {
      const FdiLabel label = FdiLabel::from_code(quadrant * 10 + pos);
      const CrownDims& dims = config.dims(label.type());
      if (pos > 1 && pos <= 4 && config.crowding_mm > 0) s -= config.crowding_mm * unit(rng);
      const double s_center = s + dims.mesiodistal / 2.0;
      s += dims.mesiodistal + config.interproximal_gap_mm;

      const double x = curve.x_at(s_center);
      const double slope = -x / radius;
      const Vec3 tangent = geometry::normalized(Vec3{mirror, slope, 0.0});  // distal direction
      const Vec3 outward = geometry::normalized(Vec3{mirror * x / radius, 1.0, 0.0});
      const Vec3 center{mirror * x, -x * x / (2 * radius), -occlusal * dims.height / 2.0};
      const Vec3 up{0, 0, occlusal};

      LandmarkSet lm;
      lm.tooth = label;
      lm.mesial = center - tangent * (dims.mesiodistal / 2.0);
      lm.distal = center + tangent * (dims.mesiodistal / 2.0);
      lm.buccal = center + outward * (dims.buccolingual / 2.0);
      lm.lingual = center - outward * (dims.buccolingual / 2.0);
      lm.facial = center + outward * (0.45 * dims.buccolingual) - up * (dims.height / 6.0);
      const Vec3 tip = center + up * (dims.height / 2.0);
      const double md = dims.mesiodistal;
      const double bl = dims.buccolingual;
      switch (label.type()) {
        case ToothType::Incisor:
        case ToothType::Canine:
          lm.cusps = {tip};
          break;
        case ToothType::Premolar:
          lm.cusps = {tip + outward * (0.25 * bl), tip - outward * (0.25 * bl)};
          break;
        case ToothType::Molar:
          lm.cusps = {tip + outward * (0.25 * bl) - tangent * (0.25 * md),
                      tip + outward * (0.25 * bl) + tangent * (0.25 * md),
                      tip - outward * (0.25 * bl) - tangent * (0.25 * md),
                      tip - outward * (0.25 * bl) + tangent * (0.25 * md)};
          if (!upper && pos == 6) lm.cusps.push_back(tip + outward * (0.3 * bl) + tangent * (0.4 * md));
          break;
      }
      if (config.jitter_mm > 0) {
        auto jitter = [&](Vec3& p) {
          p += Vec3{gauss(rng), gauss(rng), gauss(rng)} * config.jitter_mm;
        };
        jitter(lm.mesial);
        jitter(lm.distal);
        jitter(lm.buccal);
        jitter(lm.lingual);
        jitter(lm.facial);
        for (auto& c : lm.cusps) jitter(c);
      }
      out.teeth.push_back(std::move(lm));
    }
  }
  std::sort(out.teeth.begin(), out.teeth.end(),
            [](const LandmarkSet& a, const LandmarkSet& b) { return a.tooth < b.tooth; });
  out.validate();
  return out;
}

std::string_view severity_name(Severity severity) {
  switch (severity) {
    case Severity::Compliant: return "compliant";
    case Severity::Borderline: return "borderline";
    case Severity::Violating: return "violating";
  }
  return "unknown";
}

Severity parse_severity(std::string_view name) {
  if (name == "compliant") return Severity::Compliant;
  if (name == "borderline") return Severity::Borderline;
  if (name == "violating") return Severity::Violating;
  throw Error(Errc::InvalidConfig, "unknown severity '" + std::string(name) + "'");
}

}  // namespace orthoai::cases
