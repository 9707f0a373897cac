#include "orthoai/cloud.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "orthoai/errors.hpp"
#include "orthoai/hashing.hpp"

namespace orthoai::synth {

using json = nlohmann::json;

void SynthConfig::validate() const {
  auto positive = [](double v) { return v > 0 && std::isfinite(v); };
  if (!positive(cusp_variance) || !positive(gingiva_margin) || !(surface_noise_sigma >= 0) ||
      !(gingiva_box_padding >= 0)) {
    throw Error(Errc::InvalidConfig, "synthesis scales must be positive");
  }
  if (!(gingiva_fraction > 0 && gingiva_fraction < 1)) {
    throw Error(Errc::InvalidConfig, "gingiva_fraction must lie in (0, 1)");
  }
  if (!(cusp_fraction >= 0 && cusp_fraction < 1)) throw Error(Errc::InvalidConfig, "cusp_fraction must lie in [0, 1)");
  if (target_points_raw < 1 || fps_points < 1 || fps_points > target_points_raw) {
    throw Error(Errc::InvalidConfig, "need 0 < fps_points <= target_points_raw");
  }
}

std::string SynthConfig::to_json() const {
  json j{{"surface_noise_sigma", surface_noise_sigma},
         {"cusp_variance", cusp_variance},
         {"cusp_fraction", cusp_fraction},
         {"gingiva_margin", gingiva_margin},
         {"gingiva_box_padding", gingiva_box_padding},
         {"target_points_raw", target_points_raw},
         {"gingiva_fraction", gingiva_fraction},
         {"fps_points", fps_points},
         {"stratified_fps", stratified_fps}};
  return j.dump();
}

SynthConfig SynthConfig::from_json(std::string_view bytes) {
  SynthConfig c;
  try {
    const json j = json::parse(bytes.begin(), bytes.end());
    c.surface_noise_sigma = j.value("surface_noise_sigma", c.surface_noise_sigma);
    c.cusp_variance = j.value("cusp_variance", c.cusp_variance);
    c.cusp_fraction = j.value("cusp_fraction", c.cusp_fraction);
    c.gingiva_margin = j.value("gingiva_margin", c.gingiva_margin);
    c.gingiva_box_padding = j.value("gingiva_box_padding", c.gingiva_box_padding);
    c.target_points_raw = j.value("target_points_raw", c.target_points_raw);
    c.gingiva_fraction = j.value("gingiva_fraction", c.gingiva_fraction);
    c.fps_points = j.value("fps_points", c.fps_points);
    c.stratified_fps = j.value("stratified_fps", c.stratified_fps);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("synthesis config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string SynthConfig::digest() const { return short_digest(to_json()); }

double LabeledCloud::gingiva_fraction() const {
  if (labels.empty()) return 0.0;
  const auto g = std::count(labels.begin(), labels.end(), std::uint8_t{0});
  return static_cast<double>(g) / static_cast<double>(labels.size());
}

void LabeledCloud::validate() const {
  if (labels.size() != positions.size() || features.size() != positions.size() * kFeatureDim) {
    throw Error(Errc::ShapeMismatch, "cloud arrays disagree in length");
  }
  for (auto l : labels) {
    if (l >= cases::FdiLabel::kNumClasses) throw Error(Errc::ShapeMismatch, "label outside 0..32");
  }
}

std::vector<double> compute_features(std::span<const Vec3> positions, const Vec3& arch_centroid,
                                     double arch_scale) {
  if (!(arch_scale > 0) || !std::isfinite(arch_scale)) throw Error(Errc::ZeroScale, "arch scale must be positive");
  std::vector<double> out(positions.size() * kFeatureDim);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const Vec3 p = (positions[i] - arch_centroid) / arch_scale;
    double* f = out.data() + i * kFeatureDim;
    f[0] = p.x;
    f[1] = p.y;
    f[2] = p.z;
    f[3] = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
    f[4] = p.z;  // duplicate of f[2], kept as in the published feature table
    f[5] = std::sqrt(p.x * p.x + p.y * p.y);
  }
  return out;
}

double ellipsoid_area(double a, double b, double c) {
  constexpr double p = 1.6075;
  const double ap = std::pow(a, p), bp = std::pow(b, p), cp = std::pow(c, p);
  return 4.0 * std::numbers::pi * std::pow((ap * bp + ap * cp + bp * cp) / 3.0, 1.0 / p);
}

std::vector<int> apportion(std::span<const double> weights, int total) {
  std::vector<int> out(weights.size(), 0);
  if (weights.empty() || total <= 0) return out;
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(sum > 0)) throw Error(Errc::InvalidConfig, "apportion weights sum to zero");
  std::vector<std::pair<double, std::size_t>> rema;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = total * weights[i] / sum;
    out[i] = static_cast<int>(std::floor(exact));
    assigned += out[i];
    rema.emplace_back(exact - out[i], i);
  }
  // larger remainder first; lower index on ties
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total; ++r, ++assigned) ++out[rema[r % rema.size()].second];
  return out;
}

namespace {

std::vector<std::size_t> stratified_sample(std::span<const Vec3> positions, std::span<const std::uint8_t> labels,
                                           std::size_t m) {
  std::vector<std::vector<std::size_t>> groups(cases::FdiLabel::kNumClasses);
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  std::vector<double> weights;
  std::vector<std::size_t> present;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    if (!groups[c].empty()) {
      weights.push_back(static_cast<double>(groups[c].size()));
      present.push_back(c);
    }
  }
  const auto quotas = apportion(weights, static_cast<int>(m));
  std::vector<std::size_t> out;
  out.reserve(m);
  for (std::size_t g = 0; g < present.size(); ++g) {
    const auto& idx = groups[present[g]];
    std::vector<Vec3> sub;
    sub.reserve(idx.size());
    for (auto i : idx) sub.push_back(positions[i]);
    for (auto local : geometry::farthest_point_sample(sub, static_cast<std::size_t>(quotas[g]))) {
      out.push_back(idx[local]);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

LabeledCloud synthesize_cloud(const cases::ArchCase& arch_case, const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (arch_case.teeth.empty()) throw Error(Errc::TooFewPoints, "case has no teeth to synthesize");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto geometry = cases::ArchGeometry::from_case(arch_case);
  const int gingiva_budget = static_cast<int>(std::lround(cfg.gingiva_fraction * cfg.target_points_raw));
  const int tooth_budget = cfg.target_points_raw - gingiva_budget;

  std::vector<double> areas;
  for (const auto& c : geometry.crowns) areas.push_back(ellipsoid_area(c.semi_axes[0], c.semi_axes[1], c.semi_axes[2]));
  const auto budgets = apportion(areas, tooth_budget);

  std::vector<Vec3> positions;
  std::vector<std::uint8_t> labels;
  positions.reserve(static_cast<std::size_t>(cfg.target_points_raw));
  const double cusp_std = std::sqrt(cfg.cusp_variance);

  for (std::size_t k = 0; k < geometry.crowns.size(); ++k) {
    const auto& crown = geometry.crowns[k];
    const auto& cusps = arch_case.teeth[k].cusps;
    const auto label = static_cast<std::uint8_t>(crown.tooth.class_index());
    const int n_cusp = cusps.empty() ? 0 : static_cast<int>(std::lround(cfg.cusp_fraction * budgets[k]));
    for (int s = 0; s < budgets[k] - n_cusp; ++s) {
      Vec3 xi;
      double len = 0.0;
      do {
        xi = {gauss(rng), gauss(rng), gauss(rng)};
        len = geometry::norm(xi);
      } while (len < 1e-12);
      xi = xi / len;
      Vec3 p = crown.frame.origin;
      for (std::size_t j = 0; j < 3; ++j) p += crown.frame.axis(j) * (crown.semi_axes[j] * xi[j]);
      if (cfg.surface_noise_sigma > 0) {
        p += Vec3{gauss(rng), gauss(rng), gauss(rng)} * cfg.surface_noise_sigma;
      }
      positions.push_back(p);
      labels.push_back(label);
    }
    for (int s = 0; s < n_cusp; ++s) {
      const Vec3& c = cusps[static_cast<std::size_t>(rng() % cusps.size())];
      positions.push_back(c + Vec3{gauss(rng), gauss(rng), gauss(rng)} * cusp_std);
      labels.push_back(label);
    }
  }

  // gingiva by rejection sampling around the crowns
  Vec3 lo = positions.front(), hi = positions.front();
  for (const auto& p : positions) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
  }
  const Vec3 pad{cfg.gingiva_box_padding, cfg.gingiva_box_padding, cfg.gingiva_box_padding};
  lo -= pad;
  hi += pad;
  const double margin2 = cfg.gingiva_margin * cfg.gingiva_margin;
  const long max_candidates = 100L * gingiva_budget;
  int accepted = 0;
  for (long cand = 0; cand < max_candidates && accepted < gingiva_budget; ++cand) {
    const Vec3 q{lo.x + (hi.x - lo.x) * unit(rng), lo.y + (hi.y - lo.y) * unit(rng), lo.z + (hi.z - lo.z) * unit(rng)};
    bool keep = true;
    for (const auto& c : geometry.crowns) {
      const Vec3 d = q - c.frame.origin;
      if (!(geometry::dot(d, d) > margin2)) {
        keep = false;
        break;
      }
    }
    if (keep) {
      positions.push_back(q);
      labels.push_back(0);
      ++accepted;
    }
  }
  if (2 * accepted < gingiva_budget) {
    throw Error(Errc::RejectionStall, "gingiva rejection sampling filled " + std::to_string(accepted) + " of " +
                                          std::to_string(gingiva_budget) + " points");
  }

  const auto m = static_cast<std::size_t>(cfg.fps_points);
  if (positions.size() < m) {
    throw Error(Errc::TooFewPoints, "raw cloud has fewer points than the subsample size");
  }
  std::vector<std::size_t> keep;
  if (cfg.stratified_fps) {
    keep = stratified_sample(positions, labels, m);
  } else {
    keep = geometry::farthest_point_sample(positions, m);
  }

  LabeledCloud cloud;
  cloud.case_id = arch_case.case_id;
  cloud.positions.reserve(m);
  cloud.labels.reserve(m);
  for (auto i : keep) {
    cloud.positions.push_back(positions[i]);
    cloud.labels.push_back(labels[i]);
  }
  cloud.arch_centroid = geometry::centroid(cloud.positions);
  double r = 0.0;
  for (const auto& p : cloud.positions) r = std::max(r, geometry::distance(p, cloud.arch_centroid));
  cloud.arch_scale = r;
  cloud.features = compute_features(cloud.positions, cloud.arch_centroid, cloud.arch_scale);
  return cloud;
}

LabeledCloud augment(const LabeledCloud& cloud, std::uint64_t seed, const AugmentConfig& cfg) {
  cloud.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  LabeledCloud out = cloud;
  const std::size_t n = out.size();
  if (cfg.rotate) {
    const double theta = cfg.fixed_angle ? *cfg.fixed_angle : 2.0 * std::numbers::pi * unit(rng);
    const double c = std::cos(theta), s = std::sin(theta);
    for (auto& p : out.positions) {
      const Vec3 d = p - out.arch_centroid;
      p = out.arch_centroid + Vec3{c * d.x - s * d.y, s * d.x + c * d.y, d.z};
    }
  }
  if (cfg.noise_sigma > 0) {
    const double sigma_mm = cfg.noise_sigma * out.arch_scale;
    for (auto& p : out.positions) p += Vec3{gauss(rng), gauss(rng), gauss(rng)} * sigma_mm;
  }
  if (cfg.max_drop > 0 && n > 1) {
    const double frac = cfg.max_drop * unit(rng);
    const auto drop = std::min(n - 1, static_cast<std::size_t>(std::floor(frac * static_cast<double>(n))));
    if (drop > 0) {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      std::vector<std::size_t> kept(order.begin() + static_cast<std::ptrdiff_t>(drop), order.end());
      std::sort(kept.begin(), kept.end());
      const std::size_t survivors = kept.size();
      while (kept.size() < n) kept.push_back(kept[rng() % survivors]);
      LabeledCloud padded;
      padded.case_id = out.case_id;
      padded.arch_centroid = out.arch_centroid;
      padded.arch_scale = out.arch_scale;
      for (auto i : kept) {
        padded.positions.push_back(out.positions[i]);
        padded.labels.push_back(out.labels[i]);
      }
      out = std::move(padded);
    }
  }
  out.features = compute_features(out.positions, out.arch_centroid, out.arch_scale);
  return out;
}

// PLY -------------------------------------------------------------------------

std::string write_ply(const LabeledCloud& cloud, const PlyMetadata& meta) {
  cloud.validate();
  std::string out;
  out.reserve(cloud.size() * 120 + 512);
  char buf[512];
  out += "ply\nformat ascii 1.0\n";
  out += "comment case_id " + cloud.case_id + "\n";
  out += "comment seed " + std::to_string(meta.seed) + "\n";
  out += "comment config_hash " + (meta.config_hash.empty() ? std::string("none") : meta.config_hash) + "\n";
  std::snprintf(buf, sizeof buf, "comment arch_centroid %.17g %.17g %.17g\ncomment arch_scale %.17g\n",
                cloud.arch_centroid.x, cloud.arch_centroid.y, cloud.arch_centroid.z, cloud.arch_scale);
  out += buf;
  out += "element vertex " + std::to_string(cloud.size()) + "\n";
  out += "property float x\nproperty float y\nproperty float z\nproperty uchar label\n";
  for (int j = 0; j < 6; ++j) out += "property float f" + std::to_string(j) + "\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.positions[i];
    const double* f = cloud.features.data() + i * kFeatureDim;
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %u %.9g %.9g %.9g %.9g %.9g %.9g\n", static_cast<float>(p.x),
                  static_cast<float>(p.y), static_cast<float>(p.z), static_cast<unsigned>(cloud.labels[i]),
                  static_cast<float>(f[0]), static_cast<float>(f[1]), static_cast<float>(f[2]),
                  static_cast<float>(f[3]), static_cast<float>(f[4]), static_cast<float>(f[5]));
    out += buf;
  }
  return out;
}

LabeledCloud read_ply(std::string_view bytes, PlyMetadata* meta) {
  std::istringstream in{std::string(bytes)};
  std::string line;
  auto corrupt = [](const std::string& why) { return Error(Errc::CorruptArtifact, "PLY: " + why); };
  if (!std::getline(in, line) || line != "ply") throw corrupt("missing magic");
  LabeledCloud cloud;
  std::size_t count = 0;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (line == "end_header") {
      header_done = true;
      break;
    }
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "comment") {
      std::string key;
      ls >> key;
      if (key == "case_id") {
        ls >> cloud.case_id;
      } else if (key == "arch_centroid") {
        ls >> cloud.arch_centroid.x >> cloud.arch_centroid.y >> cloud.arch_centroid.z;
      } else if (key == "arch_scale") {
        ls >> cloud.arch_scale;
      } else if (meta && key == "seed") {
        ls >> meta->seed;
      } else if (meta && key == "config_hash") {
        ls >> meta->config_hash;
      }
    } else if (word == "element") {
      std::string kind;
      ls >> kind >> count;
      if (kind != "vertex") throw corrupt("unexpected element " + kind);
    }
  }
  if (!header_done) throw corrupt("header not terminated");
  cloud.positions.resize(count);
  cloud.labels.resize(count);
  cloud.features.resize(count * kFeatureDim);
  for (std::size_t i = 0; i < count; ++i) {
    float x, y, z;
    unsigned label;
    float f[6];
    if (!(in >> x >> y >> z >> label >> f[0] >> f[1] >> f[2] >> f[3] >> f[4] >> f[5])) {
      throw corrupt("truncated vertex list at row " + std::to_string(i));
    }
    cloud.positions[i] = {x, y, z};
    cloud.labels[i] = static_cast<std::uint8_t>(label);
    for (std::size_t j = 0; j < kFeatureDim; ++j) cloud.features[i * kFeatureDim + j] = f[j];
  }
  cloud.validate();
  return cloud;
}

}  // namespace orthoai::synth
