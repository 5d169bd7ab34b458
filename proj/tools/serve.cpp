#include "serve.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cli.hpp"
#include "swipeforge/dataset.hpp"
#include "swipeforge/error.hpp"
#include "swipeforge/text.hpp"

namespace swipeforge::serve {

namespace {

using Json = nlohmann::ordered_json;

std::string error_body(std::string_view code, std::string_view message, const std::string& id = "") {
  Json doc;
  doc["error"] = {{"code", std::string(code)}, {"message", std::string(message)}};
  if (!id.empty()) doc["error"]["id"] = id;
  return doc.dump();
}

bool is_json_content_type(const std::string& content_type) {
  const std::string media = content_type.substr(0, content_type.find(';'));
  return media == "application/json";
}

}  // namespace

DecodeService::DecodeService(ServiceOptions options) : options_(std::move(options)) {}

void DecodeService::load() {
  try {
    manifest_ = read_manifest(options_.model_dir);
    set_pipeline(load_pipeline(manifest_, options_.model_dir), options_.model_dir.string());
  } catch (const std::exception& e) {
    load_error_ = e.what();
    state_.store(State::kFailed, std::memory_order_release);
  }
}

void DecodeService::set_pipeline(Pipeline pipeline, std::string model_dir_label) {
  validate_pipeline(pipeline);
  if (manifest_.path_checkpoint.empty()) {
    manifest_.task = pipeline.task;
    manifest_.layout = pipeline.layout->name();
  }
  model_label_ = std::move(model_dir_label);
  pipeline_ = std::make_shared<const Pipeline>(std::move(pipeline));
  state_.store(State::kReady, std::memory_order_release);
}

Response DecodeService::error(int status, std::string_view code, std::string_view message, bool with_id) {
  std::string id;
  if (with_id) {
    const auto n = failed_.fetch_add(1) + 1;
    const auto stamp = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::system_clock::now().time_since_epoch())
                           .count();
    id = "dec-" + std::to_string(stamp) + "-" + std::to_string(n);
    std::cerr << "decode failure " << id << ": " << message << std::endl;
  } else {
    rejected_.fetch_add(1);
  }
  return {status, error_body(code, message, id)};
}

Response DecodeService::health() const {
  Json doc;
  const State state = state_.load(std::memory_order_acquire);
  doc["status"] = state == State::kReady ? "ok" : state == State::kLoading ? "loading" : "error";
  if (state == State::kFailed) doc["error"] = load_error_;
  Json layouts = Json::array();
  for (const auto& name : bundled_layout_names()) layouts.push_back(name);
  if (state == State::kReady) {
    const Pipeline& p = *pipeline_;
    if (std::find(layouts.begin(), layouts.end(), Json(p.layout->name())) == layouts.end()) {
      layouts.push_back(p.layout->name());
    }
    doc["task"] = to_string(p.task);
    doc["layout"] = p.layout->name();
    doc["model_dir"] = model_label_;
    Json models = Json::object();
    models["path"] = manifest_.path_checkpoint.empty() ? Json("loaded") : Json(manifest_.path_checkpoint);
    if (p.translit) models["translit"] = manifest_.translit_checkpoint.empty() ? Json("loaded") : Json(manifest_.translit_checkpoint);
    if (p.corrector && !p.bypass_correction) {
      models["correct"] = manifest_.correct_checkpoint.empty() ? Json("loaded") : Json(manifest_.correct_checkpoint);
      models["vocabulary_size"] = p.vocabulary->size();
    }
    doc["models"] = models;
  }
  doc["layouts"] = layouts;
  doc["counters"] = {{"requests", requests_.load()},
                     {"decoded", decoded_.load()},
                     {"rejected", rejected_.load()},
                     {"failed", failed_.load()},
                     {"over_budget", over_budget_.load()}};
  return {200, doc.dump()};
}

Response DecodeService::layout(const std::string& name) const {
  const auto names = bundled_layout_names();
  if (std::find(names.begin(), names.end(), name) != names.end()) {
    return {200, std::string(bundled_layout_document(name))};
  }
  if (ready() && pipeline_->layout->name() == name) return {200, serialize_layout(*pipeline_->layout)};
  return {404, error_body("not_found", "unknown layout '" + name + "'")};
}

Response DecodeService::decode(const std::string& body, const std::string& content_type) {
  requests_.fetch_add(1);
  const auto start = std::chrono::steady_clock::now();
  if (!is_json_content_type(content_type)) {
    return error(415, "unsupported_media_type", "content type must be application/json");
  }
  if (!ready()) return error(503, "loading", "models are not loaded");

  Trace trace;
  std::string task;
  int k = 3;
  try {
    const Json req = Json::parse(body);
    if (!req.is_object()) throw std::invalid_argument("body must be a JSON object");
    trace.layout_name = req.at("layout_name").get<std::string>();
    task = req.at("task").get<std::string>();
    if (req.contains("k")) k = req.at("k").get<int>();
    const Json& points = req.at("points");
    if (!points.is_array()) throw std::invalid_argument("points must be an array");
    for (const auto& pt : points) {
      if (!pt.is_array() || pt.size() != 2 || !pt[0].is_number() || !pt[1].is_number()) {
        throw std::invalid_argument("every point must be [x, y]");
      }
      const Point p{pt[0].get<double>(), pt[1].get<double>()};
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::invalid_argument("coordinates must be finite");
      trace.points.push_back(p);
    }
  } catch (const std::exception& e) {
    return error(400, "bad_request", e.what());
  }
  if (trace.points.size() < 2) return error(400, "bad_request", "a gesture needs at least 2 points");
  if (k < 1 || k > 3) return error(400, "bad_request", "k must be between 1 and 3");

  Pipeline p = *pipeline_;
  TaskKind requested;
  try {
    requested = parse_task_kind(task);
  } catch (const Error& e) {
    return error(400, "bad_request", e.what());
  }
  if (requested != p.task) {
    return error(409, "config_conflict", "loaded model serves " + to_string(p.task) + ", request asks for " + task);
  }
  if (trace.layout_name != p.layout->name()) {
    return error(409, "layout_mismatch", "loaded model uses layout '" + p.layout->name() + "'");
  }
  p.beam_k = k;

  DecodeResult result;
  try {
    result = run_pipeline(p, trace);
  } catch (const std::exception& e) {
    return error(500, "internal", e.what(), true);
  }
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  decoded_.fetch_add(1);
  if (ms > options_.time_budget_ms) over_budget_.fetch_add(1);

  if (!options_.trace_log.empty() && !result.candidates.empty()) {
    TraceRecord record{trace, result.candidates.front().word};
    record.trace.word = result.candidates.front().word;
    const std::lock_guard<std::mutex> lock(log_mutex_);
    std::ofstream log(options_.trace_log, std::ios::app | std::ios::binary);
    log << trace_record_to_json(record) << "\n";
  }
  return {200, cli::decode_response_json(result, ms)};
}

void install_routes(httplib::Server& server, DecodeService& service) {
  const std::string origin = service.options().cors_origin;
  server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  const auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Get("/health", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.health());
  });
  server.Get(R"(/layout/([^/]+))", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.layout(req.matches[1]));
  });
  server.Post("/decode", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.decode(req.body, req.get_header_value("Content-Type")));
  });
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.status == 404) res.set_content(error_body("not_found", "no route for " + req.path), "application/json");
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "unknown failure";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(error_body("internal", message), "application/json");
  });
  if (!service.options().static_dir.empty()) server.set_mount_point("/", service.options().static_dir.string());
}

int run_server(const ServiceOptions& options) {
  DecodeService service(options);
  httplib::Server server;
  install_routes(server, service);
  std::thread loader([&service] { service.load(); });
  std::cerr << "listening on " << options.host << ":" << options.port << std::endl;
  const bool ok = server.listen(options.host, options.port);
  loader.join();
  if (!ok) {
    std::cerr << cli::error_line("io", "cannot listen on " + options.host + ":" + std::to_string(options.port))
              << std::endl;
    return cli::kFailureExit;
  }
  return 0;
}

}  // namespace swipeforge::serve
