#include "orthoai/lifting.hpp"

#include <algorithm>
#include <cmath>

#include "orthoai/errors.hpp"

namespace orthoai::lifting {

const ToothEstimate* LiftResult::find(int fdi) const {
  for (const auto& t : teeth) {
    if (t.label.code() == fdi) return &t;
  }
  return nullptr;
}

Frame3 canonical_frame(const geometry::PrincipalAxes& pa, const Vec3& up, const Vec3& tangent,
                       std::array<double, 3>* eigenvalues_out) {
  const Frame3& f = pa.frame;
  std::size_t vertical = 0;
  for (std::size_t i = 1; i < 3; ++i) {
    if (std::abs(dot(f.axis(i), up)) > std::abs(dot(f.axis(vertical), up))) vertical = i;
  }
  std::array<std::size_t, 2> rest{};
  for (std::size_t i = 0, r = 0; i < 3; ++i) {
    if (i != vertical) rest[r++] = i;
  }
  std::size_t along = rest[0];
  if (geometry::norm(tangent) > 1e-12 &&
      std::abs(dot(f.axis(rest[1]), tangent)) > std::abs(dot(f.axis(rest[0]), tangent))) {
    along = rest[1];
  }
  const std::size_t across = along == rest[0] ? rest[1] : rest[0];

  Frame3 out;
  out.origin = f.origin;
  out.e3 = f.axis(vertical);
  if (dot(out.e3, up) < 0) out.e3 = -out.e3;
  out.e1 = f.axis(along);
  if (geometry::norm(tangent) > 1e-12 && dot(out.e1, tangent) < 0) out.e1 = -out.e1;
  out.e2 = cross(out.e3, out.e1);
  if (eigenvalues_out) {
    *eigenvalues_out = {pa.eigenvalues[along], pa.eigenvalues[across], pa.eigenvalues[vertical]};
  }
  return out;
}

LiftResult lift(std::span<const Vec3> positions, std::span<const std::uint8_t> labels,
                std::span<const double> confidences, const LiftConfig& cfg) {
  if (labels.size() != positions.size() || (!confidences.empty() && confidences.size() != positions.size())) {
    throw Error(Errc::LengthMismatch, "positions, labels and confidences must align");
  }
  constexpr int kClasses = cases::FdiLabel::kNumClasses;
  std::vector<std::vector<std::size_t>> members(kClasses);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= kClasses) throw Error(Errc::ShapeMismatch, "label outside 0..32");
    if (labels[i] != 0) members[labels[i]].push_back(i);
  }
  const Vec3 arch_center = geometry::centroid(positions);
  const Vec3 up = geometry::normalized(cfg.up);

  LiftResult out;
  for (int c = 1; c < kClasses; ++c) {
    const auto& idx = members[static_cast<std::size_t>(c)];
    if (idx.empty()) continue;
    if (idx.size() < cfg.min_support) {
      out.dropped.push_back({c, idx.size(), "below minimum support"});
      continue;
    }
    std::vector<Vec3> pts;
    pts.reserve(idx.size());
    double conf = 0.0;
    for (auto i : idx) {
      pts.push_back(positions[i]);
      conf += confidences.empty() ? 1.0 : confidences[i];
    }
    geometry::PrincipalAxes pa;
    try {
      pa = geometry::principal_axes(pts, up);
    } catch (const Error& e) {
      if (e.code() != Errc::DegenerateCloud) throw;
      out.dropped.push_back({c, idx.size(), "degenerate point set"});
      continue;
    }
    ToothEstimate est;
    est.label = FdiLabel::from_class_index(c);
    est.centroid = pa.frame.origin;
    const Vec3 radial = est.centroid - arch_center;
    const Vec3 tangent = cross(up, radial - up * dot(radial, up));
    std::array<double, 3> ev{};
    est.axes = canonical_frame(pa, up, tangent, &ev);
    for (std::size_t j = 0; j < 3; ++j) est.semi_axes[j] = std::sqrt(3.0 * ev[j]);
    est.support = idx.size();
    est.confidence = conf / static_cast<double>(idx.size());
    out.teeth.push_back(est);
  }
  return out;
}

}  // namespace orthoai::lifting
