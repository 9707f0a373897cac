#include <benchmark/benchmark.h>

#include <filesystem>
#include <unistd.h>

#include "orthoai/csp.hpp"
#include "orthoai/mcda.hpp"
#include "orthoai/pipeline.hpp"
#include "orthoai/report_store.hpp"
#include "service.hpp"

using namespace orthoai;

namespace {

cases::ArchCase sixteen_teeth() {
  cases::GeneratorConfig gc;
  gc.tooth_count = 16;
  return cases::generate_synthetic_case(3, gc);
}

void BM_EvaluatePlan(benchmark::State& state) {
  const auto kb = csp::default_knowledge_base();
  const auto c = sixteen_teeth();
  const auto recs = csp::records_from_geometry(cases::ArchGeometry::from_case(c));
  const auto plan = cases::generate_synthetic_plan(c, 3, cases::Severity::Borderline, kb);
  for (auto _ : state) benchmark::DoNotOptimize(csp::evaluate_plan(recs, plan, kb));
}
BENCHMARK(BM_EvaluatePlan);

void BM_Assess(benchmark::State& state) {
  const auto kb = csp::default_knowledge_base();
  const auto c = sixteen_teeth();
  const auto recs = csp::records_from_geometry(cases::ArchGeometry::from_case(c));
  const auto plan = cases::generate_synthetic_plan(c, 3, cases::Severity::Borderline, kb);
  for (auto _ : state) benchmark::DoNotOptimize(mcda::assess(c, recs, plan, kb));
}
BENCHMARK(BM_Assess)->Unit(benchmark::kMicrosecond);

// request handling without the socket layer
void BM_Whatif(benchmark::State& state) {
  const auto root = std::filesystem::temp_directory_path() / ("orthoai-bench-" + std::to_string(::getpid()));
  const auto kb = csp::default_knowledge_base();
  std::string id;
  {
    store::Workspace ws(root);
    const auto c = sixteen_teeth();
    const auto cloud = synth::synthesize_cloud(c, synth::SynthConfig{}, 3);
    const auto plan = cases::generate_synthetic_plan(c, 3, cases::Severity::Borderline, kb);
    ws.put_case(c);
    ws.put_report(pipeline::analyze(c, cloud, nullptr, plan, kb).assessment);
    id = c.case_id;
  }
  service::ServiceConfig cfg;
  cfg.workspace = root;
  const service::Service svc(cfg, kb);
  const std::string target = "/cases/" + id + "/whatif";
  for (auto _ : state) {
    benchmark::DoNotOptimize(svc.handle("POST", target, R"({"overrides": {"16": {"r_z": 1.6}}})"));
  }
  std::filesystem::remove_all(root);
}
BENCHMARK(BM_Whatif)->Unit(benchmark::kMillisecond);

}  // namespace
