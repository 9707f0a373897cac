#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "orthoai/geometry.hpp"

namespace orthoai::csp {
class KnowledgeBase;
}

namespace orthoai::cases {

using geometry::Vec3;

enum class ToothType { Incisor, Canine, Premolar, Molar };

std::string_view tooth_type_name(ToothType type);

/// Two-digit FDI code. Class index 1..32 is (quadrant-1)*8 + position; class
/// 0 is reserved for gingiva.
class FdiLabel {
 public:
  static constexpr int kNumClasses = 33;

  /// Throws InvalidFdi for codes outside {11..18, 21..28, 31..38, 41..48}.
  static FdiLabel from_code(int code);
  static FdiLabel from_class_index(int class_index);
  static bool is_valid_code(int code);

  int code() const { return code_; }
  int quadrant() const { return code_ / 10; }
  int position() const { return code_ % 10; }
  int class_index() const { return (quadrant() - 1) * 8 + position(); }
  ToothType type() const;
  bool anterior() const {
    const ToothType t = type();
    return t == ToothType::Incisor || t == ToothType::Canine;
  }
  bool upper() const { return quadrant() <= 2; }

  /// Same position in the opposite quadrant of the same arch.
  FdiLabel contralateral() const;

  friend bool operator==(const FdiLabel&, const FdiLabel&) = default;
  friend auto operator<=>(const FdiLabel&, const FdiLabel&) = default;

 private:
  explicit FdiLabel(int code) : code_(code) {}
  int code_ = 11;
};

enum class Arch { Upper, Lower };

std::string_view arch_name(Arch arch);

struct LandmarkSet {
  FdiLabel tooth = FdiLabel::from_code(11);
  Vec3 mesial, distal, buccal, lingual, facial;
  std::vector<Vec3> cusps;

  friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;
};

/// Per-stage movement of one tooth in its local frame: translation in mm,
/// rotation in degrees about the local axes.
struct ToothMovement {
  FdiLabel tooth = FdiLabel::from_code(11);
  std::array<double, 3> t{};
  std::array<double, 3> r{};

  bool any_nonzero() const;
  friend bool operator==(const ToothMovement&, const ToothMovement&) = default;
};

struct IprContact {
  int fdi_a = 0;
  int fdi_b = 0;
  double mm = 0.0;

  friend bool operator==(const IprContact&, const IprContact&) = default;
};

struct MovementPlan {
  std::string case_id;
  int stage_count = 1;
  std::vector<ToothMovement> movements;
  std::vector<int> attachments;  // FDI codes, sorted
  std::vector<IprContact> ipr;

  const ToothMovement* find(int fdi) const;
  bool has_attachment(int fdi) const;
  /// planned IPR on the contact between two teeth, order-insensitive; 0 if none
  double ipr_for(int fdi_a, int fdi_b) const;

  friend bool operator==(const MovementPlan&, const MovementPlan&) = default;
};

struct ArchCase {
  std::string case_id;
  Arch arch = Arch::Upper;
  std::vector<LandmarkSet> teeth;
  std::optional<MovementPlan> plan;
  std::vector<std::string> warnings;  // non-fatal parse diagnostics

  const LandmarkSet* find(int fdi) const;

  /// Throws DuplicateTooth / SchemaError / DegenerateLandmarks on violation.
  void validate() const;
};

// JSON I/O ----------------------------------------------------------------

ArchCase parse_landmark_file(std::string_view bytes);
std::string serialize_landmark_file(const ArchCase& arch_case);

MovementPlan parse_plan_file(std::string_view bytes);
std::string serialize_plan(const MovementPlan& plan);

// Crown geometry ------------------------------------------------------------

/// Oriented ellipsoid implied by a tooth's landmarks.
struct CrownEllipsoid {
  FdiLabel tooth = FdiLabel::from_code(11);
  geometry::Frame3 frame;
  std::array<double, 3> semi_axes{};  // mesiodistal, buccolingual, occluso-gingival
};

/// a1 = |distal-mesial|/2, a2 = |buccal-lingual|/2, a3 = largest |e3 offset|
/// of any cusp from the centroid, or 0.8*max(a1, a2) without cusps.
CrownEllipsoid crown_ellipsoid(const LandmarkSet& landmarks);

struct ArchGeometry {
  std::vector<CrownEllipsoid> crowns;  // same order as the case's teeth

  static ArchGeometry from_case(const ArchCase& arch_case);
  const CrownEllipsoid* find(int fdi) const;
};

struct Contact {
  int fdi_a = 0;
  int fdi_b = 0;
  double overlap_mm = 0.0;  // positive when the crowns interpenetrate
};

/// Anatomically adjacent pairs present in the arch (including the midline
/// pair) with the overlap of their crown ellipsoids along the centroid line.
std::vector<Contact> adjacent_contacts(const ArchGeometry& geometry);

// Synthetic data ------------------------------------------------------------

struct CrownDims {
  double mesiodistal = 0.0;
  double buccolingual = 0.0;
  double height = 0.0;
};

struct GeneratorConfig {
  double arch_radius_mm = 12.0;  // radius of curvature of the arch parabola at the midline
  int tooth_count = 14;
  double jitter_mm = 0.3;        // landmark noise (std dev)
  double arch_variation = 0.05;  // relative std dev of the per-case arch radius
  double interproximal_gap_mm = 0.3;
  double crowding_mm = 0.0;      // max random anterior spacing loss per contact
  Arch arch = Arch::Upper;
  // incisor, canine, premolar, molar
  std::array<CrownDims, 4> crowns{{{8.5, 7.0, 10.0}, {8.0, 8.0, 11.0}, {7.0, 9.0, 8.5}, {10.0, 11.0, 7.5}}};

  const CrownDims& dims(ToothType type) const { return crowns[static_cast<std::size_t>(type)]; }
  void validate() const;
};

std::string synthetic_case_id(std::uint64_t seed);

ArchCase generate_synthetic_case(std::uint64_t seed, const GeneratorConfig& config = {});

enum class Severity { Compliant, Borderline, Violating };

std::string_view severity_name(Severity severity);
Severity parse_severity(std::string_view name);

/// Movement plan whose components sit in a band relative to the knowledge
/// base limits: compliant <= 0.8x, borderline gives each tooth a 0.3 chance of
/// one component in (1.0, 1.5)x, violating adds at least one component > 1.5x.
MovementPlan generate_synthetic_plan(const ArchCase& arch_case, std::uint64_t seed,
                                     Severity severity, const csp::KnowledgeBase& kb);

}  // namespace orthoai::cases
