#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "swipeforge/pipeline.hpp"

namespace httplib {
class Server;
}

namespace swipeforge::serve {

struct ServiceOptions {
  std::filesystem::path model_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
  double time_budget_ms = 1000.0;
  std::filesystem::path static_dir;  // empty: no static files
  std::filesystem::path trace_log;   // empty: traces are not kept
};

struct Response {
  int status = 200;
  std::string body;
};

/// Request handling without the transport. The pipeline is loaded once and
/// then shared read-only by every request.
class DecodeService {
 public:
  explicit DecodeService(ServiceOptions options);

  /// Loads the manifest in options.model_dir. On failure /health reports
  /// "error" and decode answers 503.
  void load();
  void set_pipeline(Pipeline pipeline, std::string model_dir_label);
  bool ready() const { return state_.load(std::memory_order_acquire) == State::kReady; }

  Response health() const;
  Response layout(const std::string& name) const;
  Response decode(const std::string& body, const std::string& content_type);

  const ServiceOptions& options() const { return options_; }

 private:
  enum class State { kLoading, kReady, kFailed };

  Response error(int status, std::string_view code, std::string_view message, bool with_id = false);

  ServiceOptions options_;
  std::atomic<State> state_{State::kLoading};
  std::shared_ptr<const Pipeline> pipeline_;  // written once before kReady
  PipelineManifest manifest_;
  std::string load_error_;
  std::string model_label_;

  std::atomic<std::uint64_t> requests_{0};
  std::atomic<std::uint64_t> decoded_{0};
  std::atomic<std::uint64_t> rejected_{0};
  std::atomic<std::uint64_t> failed_{0};
  std::atomic<std::uint64_t> over_budget_{0};
  std::mutex log_mutex_;  // only taken when trace logging is on
};

/// Wires the three endpoints, CORS and JSON 404s into `server`.
void install_routes(httplib::Server& server, DecodeService& service);

/// Blocks serving on options.host:options.port. Models load on a
/// background thread so /health answers "loading" meanwhile.
int run_server(const ServiceOptions& options);

}  // namespace swipeforge::serve
