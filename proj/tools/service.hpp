#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "orthoai/csp.hpp"
#include "orthoai/mcda.hpp"
#include "orthoai/report_store.hpp"
#include "orthoai/segnet.hpp"

namespace orthoai::service {

struct ServiceConfig {
  std::filesystem::path workspace;
  std::string host = "127.0.0.1";
  int port = 7420;
  std::string model_id = "model";      // checkpoint loaded at startup, if present
  std::string history_id = "train";  // default run for /training/history
  mcda::AssessOptions assess;
  int threads = 4;
};

struct Response {
  int status = 200;
  std::string body;  // JSON
};

/// Request handling, separate from the socket layer so it can be driven directly.
/// All state is read-only after construction; handlers are safe to call concurrently.
class Service {
 public:
  Service(ServiceConfig cfg, csp::KnowledgeBase kb);

  Response health() const;
  Response list_cases() const;
  Response get_case(const std::string& id) const;
  Response get_assessment(const std::string& id) const;
  Response whatif(const std::string& id, const std::string& body) const;
  Response training_history(const std::optional<std::string>& run) const;

  /// Route by method and path (query string allowed).
  Response handle(const std::string& method, const std::string& target, const std::string& body) const;

  /// Blocks until stop() is called from another thread.
  void serve();
  void stop();
  /// Port actually bound (useful with port 0); valid once serving.
  int bound_port() const { return bound_port_.load(); }

  const std::string& config_digest() const { return digest_; }

 private:
  Response error(int status, std::string_view code, const std::string& message) const;

  ServiceConfig cfg_;
  csp::KnowledgeBase kb_;
  store::Workspace ws_;
  std::string digest_;
  bool model_loaded_ = false;
  std::shared_ptr<void> server_;  // httplib::Server, kept out of the header
  std::atomic<int> bound_port_{0};
};

/// Accept only localhost origins for CORS.
bool is_local_origin(const std::string& origin);

}  // namespace orthoai::service
