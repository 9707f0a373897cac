#include <gtest/gtest.h>

#include <httplib.h>

#include <nlohmann/json.hpp>
#include <thread>

#include "fixtures.hpp"
#include "orthoai/report_store.hpp"
#include "service.hpp"

using namespace orthoai;
using json = nlohmann::json;

namespace {

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fixture::TempDir("service");
    store::Workspace ws(dir_->path());
    case_id_ = new std::string(fixture::seed_workspace_case(ws, 5, cases::Severity::Compliant, 16));
    std::vector<segnet::EpochRecord> h{{1, 3.0, 0.1, 0.1, 0.5, 0.2, 1.0}, {2, 2.5, 0.2, 0.2, 0.6, 0.4, 1.0}};
    ws.put_history("train", h);
  }
  static void TearDownTestSuite() {
    delete case_id_;
    delete dir_;
  }

  service::Service make() const {
    service::ServiceConfig cfg;
    cfg.workspace = dir_->path();
    return service::Service(cfg, csp::default_knowledge_base());
  }
  std::string stored_report() const { return store::Workspace(dir_->path()).get(store::Kind::Report, *case_id_); }
  static const std::string& id() { return *case_id_; }

  static fixture::TempDir* dir_;
  static std::string* case_id_;
};
fixture::TempDir* ServiceTest::dir_ = nullptr;
std::string* ServiceTest::case_id_ = nullptr;

int critical_on(const json& a, int tooth) {
  int n = 0;
  for (const auto& e : a.at("alerts")) n += e.at("tooth") == tooth && e.at("severity") == "critical";
  return n;
}

}  // namespace

TEST_F(ServiceTest, Health) {
  const auto svc = make();
  const auto r = svc.handle("GET", "/health", "");
  EXPECT_EQ(r.status, 200);
  const auto j = json::parse(r.body);
  EXPECT_EQ(j.at("status"), "ok");
  EXPECT_EQ(j.at("model_loaded"), false);
  EXPECT_EQ(j.at("kb_version"), "table1-v1");
}

TEST_F(ServiceTest, CasesAndAssessment) {
  const auto svc = make();
  const auto list = json::parse(svc.handle("GET", "/cases", "").body);
  ASSERT_EQ(list.at("cases").size(), 1u);
  EXPECT_EQ(list.at("cases")[0].at("case_id"), id());
  EXPECT_EQ(list.at("cases")[0].at("alerts"), 0);
  EXPECT_EQ(svc.handle("GET", "/cases/" + id(), "").status, 200);
  const auto a = svc.handle("GET", "/cases/" + id() + "/assessment", "");
  EXPECT_EQ(a.status, 200);
  EXPECT_EQ(a.body, stored_report());
}

TEST_F(ServiceTest, ErrorsCarryCodes) {
  const auto svc = make();
  auto r = svc.handle("GET", "/cases/nope/assessment", "");
  EXPECT_EQ(r.status, 404);
  EXPECT_EQ(json::parse(r.body).at("error").at("code"), "NotFound");
  EXPECT_EQ(svc.handle("GET", "/nothing", "").status, 404);
  r = svc.handle("POST", "/cases/" + id() + "/whatif", R"({"overrides": {"99": {"r_z": 1}}})");
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(svc.handle("POST", "/cases/" + id() + "/whatif", R"({"overrides": {"16": {"spin": 1}}})").status, 422);
  EXPECT_EQ(svc.handle("POST", "/cases/" + id() + "/whatif", "not json").status, 422);
  EXPECT_EQ(svc.handle("POST", "/cases/" + id() + "/whatif", R"({"kb_version": "old"})").status, 422);
  r = svc.handle("POST", "/cases/" + id() + "/whatif", R"({"wavf": {"weights": {"bio": 0.5, "pred": 0.5, "stag": 0.5}}})");
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(json::parse(r.body).at("error").at("code"), "WeightSumError");
}

TEST_F(ServiceTest, EmptyWhatifReproducesStored) {
  const auto svc = make();
  const auto r = svc.handle("POST", "/cases/" + id() + "/whatif", "{}");
  ASSERT_EQ(r.status, 200);
  auto j = json::parse(r.body);
  EXPECT_TRUE(j.at("delta").at("changed_evals").empty());
  j.erase("delta");
  EXPECT_EQ(j, json::parse(stored_report()));
}

TEST_F(ServiceTest, MolarRotationOverride) {
  const auto svc = make();
  const auto before = svc.handle("POST", "/cases/" + id() + "/whatif", R"({"overrides": {"16": {"r_z": 1.0}}})");
  const auto after = svc.handle("POST", "/cases/" + id() + "/whatif", R"({"overrides": {"16": {"r_z": 1.6}}})");
  ASSERT_EQ(before.status, 200);
  ASSERT_EQ(after.status, 200);
  const auto b = json::parse(before.body), a = json::parse(after.body);
  EXPECT_EQ(critical_on(b, 16), 0);
  EXPECT_EQ(critical_on(a, 16), 1);
  EXPECT_EQ(a.at("alerts").size(), b.at("alerts").size() + 1);
  EXPECT_LT(a.at("subscores").at("bio").get<double>(), b.at("subscores").at("bio").get<double>());
  bool found = false;
  for (const auto& c : a.at("delta").at("changed_evals")) {
    if (c.at("tooth") == 16 && c.at("component") == "r_z") {
      found = true;
      EXPECT_NEAR(c.at("sigma").get<double>(), 1 - 0.1 / 1.5, 1e-12);
      EXPECT_EQ(c.at("severity"), "critical");
      EXPECT_EQ(c.at("previous_severity"), "none");
    }
  }
  EXPECT_TRUE(found);
}

TEST_F(ServiceTest, WhatifIsIdempotentAndReadOnly) {
  const auto svc = make();
  const std::string body = R"({"overrides": {"21": {"t_x": 0.3, "r_z": 2.0}}})";
  const auto stored = stored_report();
  const auto a = svc.handle("POST", "/cases/" + id() + "/whatif", body);
  const auto b = svc.handle("POST", "/cases/" + id() + "/whatif", body);
  EXPECT_EQ(a.body, b.body);
  EXPECT_EQ(stored_report(), stored);
}

TEST_F(ServiceTest, WeightOverrideRescores) {
  const auto svc = make();
  const auto r = svc.handle("POST", "/cases/" + id() + "/whatif",
                            R"({"wavf": {"weights": {"bio": 1, "pred": 0, "stag": 0, "att": 0, "ipr": 0, "sym": 0}}})");
  ASSERT_EQ(r.status, 200);
  const auto j = json::parse(r.body);
  EXPECT_NEAR(j.at("score").get<double>(), 100 * j.at("subscores").at("bio").get<double>(), 1e-9);
}

TEST_F(ServiceTest, TrainingHistory) {
  const auto svc = make();
  auto j = json::parse(svc.handle("GET", "/training/history", "").body);
  EXPECT_EQ(j.at("run"), "train");
  EXPECT_EQ(j.at("epochs").size(), 2u);
  EXPECT_EQ(svc.handle("GET", "/training/history?run=missing", "").status, 404);
}

TEST_F(ServiceTest, LocalOrigins) {
  EXPECT_TRUE(service::is_local_origin("http://localhost:5173"));
  EXPECT_TRUE(service::is_local_origin("http://127.0.0.1"));
  EXPECT_FALSE(service::is_local_origin("http://localhost.evil.com"));
  EXPECT_FALSE(service::is_local_origin("https://example.com"));
}

TEST_F(ServiceTest, OverHttp) {
  service::ServiceConfig cfg;
  cfg.workspace = dir_->path();
  cfg.port = 0;
  cfg.threads = 2;
  service::Service svc(cfg, csp::default_knowledge_base());
  std::thread t([&] { svc.serve(); });
  for (int i = 0; i < 200 && svc.bound_port() == 0; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  ASSERT_GT(svc.bound_port(), 0);
  httplib::Client cli("127.0.0.1", svc.bound_port());
  auto r = cli.Get("/health");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  r = cli.Post("/cases/" + id() + "/whatif", R"({"overrides": {"16": {"r_z": 1.6}}})", "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  httplib::Headers origin{{"Origin", "http://localhost:5173"}};
  r = cli.Options("/cases", origin);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 204);
  EXPECT_EQ(r->get_header_value("Access-Control-Allow-Origin"), "http://localhost:5173");
  r = cli.Get("/cases", httplib::Headers{{"Origin", "http://example.com"}});
  ASSERT_TRUE(r);
  EXPECT_FALSE(r->has_header("Access-Control-Allow-Origin"));
  svc.stop();
  t.join();
}
