#pragma once

// Shared builders for tests and the acceptance binary.

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "orthoai/case_model.hpp"
#include "orthoai/cloud.hpp"
#include "orthoai/csp.hpp"
#include "orthoai/pipeline.hpp"
#include "orthoai/report_store.hpp"
#include "orthoai/segnet.hpp"

namespace fixture {

using namespace orthoai;

// 6 -> 4 -> 4 edge stack, 3-wide fuse, one hidden head layer, 4 classes.
inline segnet::ModelConfig tiny_config(int classes = 4, double dropout = 0.3) {
  segnet::ModelConfig c;
  c.edge_channels = {4, 4};
  c.fuse_dim = 3;
  c.head_hidden = {5};
  c.num_classes = classes;
  c.dropout = dropout;
  return c;
}

inline segnet::Batch random_batch(std::uint64_t seed, std::size_t clouds, std::size_t points, int classes,
                                  std::size_t dim = 6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  segnet::Batch b;
  b.batch = clouds;
  b.points = points;
  b.dim = dim;
  b.features.resize(clouds * points * dim);
  for (auto& v : b.features) v = g(rng);
  b.labels.resize(clouds * points);
  for (auto& l : b.labels) l = static_cast<std::uint8_t>(rng() % static_cast<std::uint64_t>(classes));
  return b;
}

/// Randomise running statistics so eval-mode batch-norm is not the identity.
inline void randomize_buffers(segnet::SegModel& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 1.5), s(-0.3, 0.3);
  for (const auto& spec : m.buffer_specs()) {
    const bool var = spec.name.find("running_var") != std::string::npos;
    for (std::size_t i = 0; i < spec.size; ++i) m.buffers()[spec.offset + i] = var ? u(rng) : s(rng);
  }
}

/// Small clouds (200 points) for quick training runs.
inline std::vector<synth::LabeledCloud> small_dataset(int n, std::uint64_t seed = 0, int points = 200) {
  synth::SynthConfig sc;
  sc.target_points_raw = 3 * points;
  sc.fps_points = points;
  std::vector<synth::LabeledCloud> out;
  for (int i = 0; i < n; ++i) {
    const auto c = cases::generate_synthetic_case(seed + static_cast<std::uint64_t>(i));
    out.push_back(synth::synthesize_cloud(c, sc, seed + static_cast<std::uint64_t>(i)));
  }
  return out;
}

struct GradCheck {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst = 0.0;
};

/// Central differences on `samples` random parameters against the analytic
/// gradient of the composite loss (train mode, fixed dropout seed).
inline GradCheck finite_difference_check(segnet::SegModel model, const segnet::Batch& batch,
                                         const segnet::LossConfig& loss, std::size_t samples, std::uint64_t seed,
                                         double h = 1e-5, double floor = 1e-6, double tol = 1e-4) {
  const std::uint64_t dropout_seed = 17;
  const auto analytic = segnet::loss_gradients(model, batch, loss, true, dropout_seed).grad;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(model.parameter_count());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(samples, idx.size()));
  auto eval = [&](const segnet::SegModel& m) {
    return segnet::loss_gradients(m, batch, loss, true, dropout_seed).loss.total;
  };
  GradCheck out;
  for (auto i : idx) {
    const double orig = model.params()[i];
    model.params()[i] = orig + h;
    const double up = eval(model);
    model.params()[i] = orig - h;
    const double down = eval(model);
    model.params()[i] = orig;
    const double fd = (up - down) / (2 * h);
    const double rel = std::abs(fd - analytic[i]) / std::max({std::abs(fd), std::abs(analytic[i]), floor});
    out.worst = std::max(out.worst, rel);
    out.failures += rel >= tol;
    ++out.checked;
  }
  return out;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("orthoai-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Store a synthetic case, its cloud and the assessment of a generated plan
/// (ground-truth labels stand in for the network). Returns the case id.
inline std::string seed_workspace_case(store::Workspace& ws, std::uint64_t seed, cases::Severity severity,
                                       int teeth = 14) {
  const auto kb = csp::default_knowledge_base();
  cases::GeneratorConfig gc;
  gc.tooth_count = teeth;
  const auto c = cases::generate_synthetic_case(seed, gc);
  const auto cloud = synth::synthesize_cloud(c, synth::SynthConfig{}, seed);
  const auto plan = cases::generate_synthetic_plan(c, seed, severity, kb);
  ws.put_case(c);
  ws.put_cloud(cloud);
  ws.put_plan(c.case_id + "-" + std::string(cases::severity_name(severity)), plan);
  ws.put_report(pipeline::analyze(c, cloud, nullptr, plan, kb).assessment);
  return c.case_id;
}

}  // namespace fixture
