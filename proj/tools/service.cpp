#include "service.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "orthoai/errors.hpp"
#include "orthoai/pipeline.hpp"

namespace orthoai::service {

using json = nlohmann::json;

namespace {

std::string url_decode(const std::string& s) { return httplib::detail::decode_url(s, false); }

struct Target {
  std::vector<std::string> segments;
  std::map<std::string, std::string> query;
};

Target parse_target(const std::string& target) {
  Target t;
  const auto q = target.find('?');
  const std::string path = target.substr(0, q);
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto slash = path.find('/', start);
    const auto seg = path.substr(start, slash == std::string::npos ? std::string::npos : slash - start);
    if (!seg.empty()) t.segments.push_back(url_decode(seg));
    if (slash == std::string::npos) break;
    start = slash + 1;
  }
  if (q != std::string::npos) {
    std::stringstream ss(target.substr(q + 1));
    std::string kv;
    while (std::getline(ss, kv, '&')) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) t.query[url_decode(kv)] = "";
      else t.query[url_decode(kv.substr(0, eq))] = url_decode(kv.substr(eq + 1));
    }
  }
  return t;
}

int status_for(Errc code) {
  switch (code) {
    case Errc::NotFound: return 404;
    case Errc::InvalidOverride:
    case Errc::SchemaError:
    case Errc::WeightSumError:
    case Errc::InvalidConfig:
    case Errc::UnmatchedTooth:
    case Errc::VersionMismatch: return 422;
    default: return 500;
  }
}

std::string eval_key(const csp::ConstraintEval& e) {
  return std::to_string(e.tooth.code()) + "/" + e.rule_id + "/" + std::string(csp::component_name(e.component));
}

}  // namespace

bool is_local_origin(const std::string& origin) {
  for (const char* prefix : {"http://localhost", "http://127.0.0.1", "https://localhost", "https://127.0.0.1"}) {
    const std::string p = prefix;
    if (origin.compare(0, p.size(), p) == 0 && (origin.size() == p.size() || origin[p.size()] == ':')) return true;
  }
  return false;
}

Service::Service(ServiceConfig cfg, csp::KnowledgeBase kb)
    : cfg_(std::move(cfg)), kb_(std::move(kb)), ws_(cfg_.workspace) {
  cfg_.assess.wavf.validate();
  digest_ = mcda::config_digest(kb_, cfg_.assess);
  if (ws_.contains(store::Kind::Checkpoint, cfg_.model_id)) {
    segnet::load_checkpoint(ws_.get(store::Kind::Checkpoint, cfg_.model_id));
    model_loaded_ = true;
  }
}

Response Service::error(int status, std::string_view code, const std::string& message) const {
  json j{{"error", {{"code", code}, {"message", message}}}, {"kb_version", kb_.version()}, {"config_digest", digest_}};
  return {status, j.dump()};
}

Response Service::health() const {
  json j{{"status", "ok"}, {"model_loaded", model_loaded_}, {"kb_version", kb_.version()}, {"config_digest", digest_}};
  return {200, j.dump()};
}

Response Service::list_cases() const {
  json cases = json::array();
  for (const auto& id : ws_.list(store::Kind::Case)) {
    json row{{"case_id", id}, {"has_assessment", ws_.contains(store::Kind::Report, id)}};
    if (row["has_assessment"].get<bool>()) {
      try {
        const auto a = json::parse(ws_.get(store::Kind::Report, id));
        row["score"] = a.at("score");
        row["grade"] = a.at("grade");
        row["alerts"] = a.at("alerts").size();
      } catch (const std::exception&) {
        row["has_assessment"] = false;  // unreadable report; surfaced by /assessment
      }
    }
    cases.push_back(row);
  }
  return {200, json{{"cases", cases}, {"kb_version", kb_.version()}, {"config_digest", digest_}}.dump()};
}

Response Service::get_case(const std::string& id) const {
  const auto c = ws_.get(store::Kind::Case, id);
  json j{{"case", json::parse(c)}, {"kb_version", kb_.version()}, {"config_digest", digest_}};
  return {200, j.dump()};
}

Response Service::get_assessment(const std::string& id) const {
  if (!ws_.contains(store::Kind::Case, id)) throw Error(Errc::NotFound, "case '" + id + "' not in workspace");
  return {200, ws_.get(store::Kind::Report, id)};
}

Response Service::whatif(const std::string& id, const std::string& body) const {
  if (!ws_.contains(store::Kind::Case, id)) throw Error(Errc::NotFound, "case '" + id + "' not in workspace");
  const auto stored = ws_.get_report(id, kb_);
  const auto arch_case = ws_.get_case(id);

  json req;
  try {
    req = body.empty() ? json::object() : json::parse(body);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidOverride, std::string("request body is not JSON: ") + e.what());
  }
  if (!req.is_object()) throw Error(Errc::InvalidOverride, "request body must be an object");
  if (req.contains("kb_version") && req.at("kb_version") != kb_.version()) {
    throw Error(Errc::VersionMismatch, "service runs knowledge base " + kb_.version());
  }

  std::vector<std::pair<int, std::vector<std::pair<std::string, double>>>> overrides;
  if (req.contains("overrides")) {
    const auto& o = req.at("overrides");
    if (!o.is_object()) throw Error(Errc::InvalidOverride, "overrides must map FDI codes to component objects");
    for (const auto& [tooth, comps] : o.items()) {
      int fdi = 0;
      try {
        std::size_t used = 0;
        fdi = std::stoi(tooth, &used);
        if (used != tooth.size()) throw std::invalid_argument(tooth);
      } catch (const std::exception&) {
        throw Error(Errc::InvalidOverride, "'" + tooth + "' is not an FDI code");
      }
      if (!comps.is_object()) throw Error(Errc::InvalidOverride, "overrides for " + tooth + " must be an object");
      std::vector<std::pair<std::string, double>> list;
      for (const auto& [name, v] : comps.items()) {
        if (!v.is_number()) throw Error(Errc::InvalidOverride, tooth + "." + name + " must be a number");
        list.emplace_back(name, v.get<double>());
      }
      overrides.emplace_back(fdi, std::move(list));
    }
  }

  auto options = cfg_.assess;
  if (req.contains("wavf")) options.wavf = mcda::WavfConfig::from_json(req.at("wavf").dump());

  const auto plan = pipeline::apply_overrides(stored.plan, overrides);
  auto updated = mcda::assess(arch_case, stored.teeth, plan, kb_, options);
  updated.warnings = stored.warnings;

  std::map<std::string, const csp::ConstraintEval*> before;
  for (const auto& e : stored.evaluations) before[eval_key(e)] = &e;
  json changed = json::array();
  for (const auto& e : updated.evaluations) {
    const auto it = before.find(eval_key(e));
    const bool same = it != before.end() && it->second->sigma == e.sigma && it->second->alert == e.alert;
    if (same) continue;
    json c{{"tooth", e.tooth.code()},
           {"rule", e.rule_id},
           {"component", csp::component_name(e.component)},
           {"sigma", e.sigma},
           {"severity", csp::alert_name(e.alert)}};
    c["previous_sigma"] = it == before.end() ? json(nullptr) : json(it->second->sigma);
    c["previous_severity"] = it == before.end() ? json(nullptr) : json(csp::alert_name(it->second->alert));
    changed.push_back(c);
  }
  json out = json::parse(updated.to_json());
  out["delta"] = {{"changed_evals", changed},
                  {"previous_score", stored.score.value},
                  {"new_score", updated.score.value},
                  {"previous_grade", std::string(1, stored.score.grade)},
                  {"new_grade", std::string(1, updated.score.grade)}};
  return {200, out.dump()};
}

Response Service::training_history(const std::optional<std::string>& run) const {
  std::string id = run.value_or(cfg_.history_id);
  if (!run && !ws_.contains(store::Kind::History, id)) {
    const auto runs = ws_.list(store::Kind::History);
    if (!runs.empty()) id = runs.front();
  }
  const auto text = ws_.get(store::Kind::History, id);
  json epochs = json::array();
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty()) epochs.push_back(json::parse(line));
  }
  return {200, json{{"run", id}, {"epochs", epochs}, {"kb_version", kb_.version()}, {"config_digest", digest_}}.dump()};
}

Response Service::handle(const std::string& method, const std::string& target, const std::string& body) const {
  try {
    const auto t = parse_target(target);
    const auto& s = t.segments;
    if (method == "GET") {
      if (s.size() == 1 && s[0] == "health") return health();
      if (s.size() == 1 && s[0] == "cases") return list_cases();
      if (s.size() == 2 && s[0] == "cases") return get_case(s[1]);
      if (s.size() == 3 && s[0] == "cases" && s[2] == "assessment") return get_assessment(s[1]);
      if (s.size() == 2 && s[0] == "training" && s[1] == "history") {
        const auto it = t.query.find("run");
        return training_history(it == t.query.end() ? std::nullopt : std::optional<std::string>(it->second));
      }
    } else if (method == "POST") {
      if (s.size() == 3 && s[0] == "cases" && s[2] == "whatif") return whatif(s[1], body);
    }
    return error(404, "NotFound", "no route for " + method + " " + target);
  } catch (const Error& e) {
    return error(status_for(e.code()), e.name(), e.what());
  } catch (const std::exception& e) {
    return error(500, "Internal", e.what());
  }
}

void Service::serve() {
  auto svr = std::make_shared<httplib::Server>();
  server_ = svr;
  const int threads = std::max(1, cfg_.threads);
  svr->new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };

  auto cors = [](const httplib::Request& req, httplib::Response& res) {
    const auto origin = req.get_header_value("Origin");
    if (!origin.empty() && is_local_origin(origin)) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Vary", "Origin");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    }
  };
  auto dispatch = [this, cors](const httplib::Request& req, httplib::Response& res) {
    const auto r = handle(req.method, req.target, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
    cors(req, res);
  };
  svr->Get(".*", dispatch);
  svr->Post(".*", dispatch);
  svr->Options(".*", [cors](const httplib::Request& req, httplib::Response& res) {
    res.status = 204;
    cors(req, res);
  });

  const int port = cfg_.port == 0 ? svr->bind_to_any_port(cfg_.host) : (svr->bind_to_port(cfg_.host, cfg_.port) ? cfg_.port : -1);
  if (port < 0) throw Error(Errc::Io, "cannot bind " + cfg_.host + ":" + std::to_string(cfg_.port));
  bound_port_ = port;
  svr->listen_after_bind();
}

void Service::stop() {
  if (auto svr = std::static_pointer_cast<httplib::Server>(server_)) svr->stop();
}

}  // namespace orthoai::service
