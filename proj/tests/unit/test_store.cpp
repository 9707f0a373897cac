#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"
#include "orthoai/errors.hpp"
#include "orthoai/hashing.hpp"
#include "orthoai/report_store.hpp"

using namespace orthoai;
using namespace orthoai::store;
namespace fs = std::filesystem;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Io;
}

std::size_t files_in(const fs::path& dir) {
  if (!fs::exists(dir)) return 0;
  return static_cast<std::size_t>(std::distance(fs::directory_iterator(dir), fs::directory_iterator()));
}

}  // namespace

TEST(Hashing, KnownDigest) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(short_digest("abc"), "ba7816bf8f01cfea");
}

TEST(Store, PutGetAndNaming) {
  fixture::TempDir dir("store");
  Workspace ws(dir.path());
  const auto path = ws.put(Kind::Metrics, "run-1", "{\"a\":1}");
  EXPECT_EQ(path.parent_path().filename(), "reports");
  EXPECT_EQ(path.filename().string(), "run-1." + short_digest("{\"a\":1}") + ".metrics.json");
  EXPECT_EQ(ws.get(Kind::Metrics, "run-1"), "{\"a\":1}");
  EXPECT_TRUE(ws.contains(Kind::Metrics, "run-1"));
  EXPECT_FALSE(ws.contains(Kind::Report, "run-1"));
  EXPECT_EQ(code_of([&] { ws.get(Kind::Report, "run-1"); }), Errc::NotFound);
}

TEST(Store, IdValidation) {
  EXPECT_NO_THROW(validate_id("case_0001-b"));
  for (const char* bad : {"", "a/b", "..", "a.b", "a b"}) EXPECT_EQ(code_of([&] { validate_id(bad); }), Errc::InvalidConfig) << bad;
}

TEST(Store, DedupAndReplace) {
  fixture::TempDir dir("dedup");
  Workspace ws(dir.path());
  const auto a = ws.put(Kind::History, "h", "line\n");
  const auto b = ws.put(Kind::History, "h", "line\n");
  EXPECT_EQ(a, b);
  EXPECT_EQ(files_in(dir.path() / "history"), 1u);
  const auto c = ws.put(Kind::History, "h", "other\n");
  EXPECT_NE(a, c);
  EXPECT_EQ(files_in(dir.path() / "history"), 1u);
  EXPECT_EQ(ws.get(Kind::History, "h"), "other\n");
  // a different id with a shared prefix is untouched
  ws.put(Kind::History, "h2", "x\n");
  ws.put(Kind::History, "h", "third\n");
  EXPECT_EQ(ws.get(Kind::History, "h2"), "x\n");
  EXPECT_EQ(ws.list(Kind::History), (std::vector<std::string>{"h", "h2"}));
}

TEST(Store, TamperedFileIsCorrupt) {
  fixture::TempDir dir("tamper");
  Workspace ws(dir.path());
  const auto p = ws.put(Kind::Report, "r", "{\"score\":1}");
  {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f << "{\"score\":2}";
  }
  EXPECT_EQ(code_of([&] { ws.get(Kind::Report, "r"); }), Errc::CorruptArtifact);
}

TEST(Store, CrashBeforeRenameLeavesOldBlob) {
  fixture::TempDir dir("crash");
  Workspace ws(dir.path());
  ws.put(Kind::Plan, "p", "old");
  ws.set_before_rename([](const fs::path&) { throw std::runtime_error("simulated crash"); });
  EXPECT_THROW(ws.put(Kind::Plan, "p", "new"), std::runtime_error);
  ws.set_before_rename({});
  EXPECT_EQ(ws.get(Kind::Plan, "p"), "old");
  // no temp file is left where listings could see it
  EXPECT_EQ(ws.list(Kind::Plan), std::vector<std::string>{"p"});
  ws.put(Kind::Plan, "p", "new");
  EXPECT_EQ(ws.get(Kind::Plan, "p"), "new");
}

TEST(Store, TypedRoundTrips) {
  fixture::TempDir dir("typed");
  Workspace ws(dir.path());
  const auto kb = csp::default_knowledge_base();
  const auto id = fixture::seed_workspace_case(ws, 3, cases::Severity::Borderline);

  const auto c = ws.get_case(id);
  EXPECT_EQ(c.teeth, cases::generate_synthetic_case(3).teeth);

  const auto plan = ws.get_plan(id + "-borderline");
  EXPECT_EQ(plan, cases::generate_synthetic_plan(c, 3, cases::Severity::Borderline, kb));

  synth::PlyMetadata meta;
  const auto cloud = ws.get_cloud(id, &meta);
  EXPECT_EQ(cloud.case_id, id);
  EXPECT_EQ(cloud.size(), 1000u);

  const auto report = ws.get_report(id, kb);
  ws.put_report(report);
  EXPECT_EQ(ws.get_report(id, kb).to_json(), report.to_json());
  EXPECT_EQ(report.plan, plan);

  std::vector<segnet::EpochRecord> h{{1, 3.0, 0.1, 0.1, 0.5, 0.2, 1.0}};
  ws.put_history("run", h);
  EXPECT_TRUE(ws.get_history("run")[0].same_metrics(h[0]));
}
