#pragma once

// HTTP gateway over the pipeline. Boot is fail-closed: an invalid policy or
// config aborts before the listener opens. Handlers only ever serialize
// TurnOutcome documents, so no endpoint can surface text the pipeline did
// not mark Delivered.

#include <atomic>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "redline/default_policy.hpp"
#include "redline/eval.hpp"
#include "redline/http_backend.hpp"
#include "redline/pipeline.hpp"
#include "redline/version.hpp"

namespace redline {

struct ServerConfig {
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::string policy_path;          // empty: bundled default policy
  std::string backend = "mock:data/mock_faithful.json";
  std::string default_pattern = "F";
  std::string audit_path = "audit.jsonl";
  std::string admin_token;          // empty disables the admin endpoints

  static ServerConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read server config: " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
      throw std::invalid_argument("server config is not a JSON object: " + path);
    ServerConfig cfg;
    cfg.bind = doc.value("bind", cfg.bind);
    cfg.port = doc.value("port", cfg.port);
    cfg.policy_path = doc.value("policy", cfg.policy_path);
    cfg.backend = doc.value("backend", cfg.backend);
    cfg.default_pattern = doc.value("pattern", cfg.default_pattern);
    cfg.audit_path = doc.value("audit", cfg.audit_path);
    cfg.admin_token = doc.value("admin_token", cfg.admin_token);
    return cfg;
  }

  // REDLINE_* environment variables override file/default fields.
  void apply_env() {
    auto over = [](const char* name, std::string& field) {
      if (const char* v = std::getenv(name); v && *v) field = v;
    };
    over("REDLINE_BIND", bind);
    if (const char* v = std::getenv("REDLINE_PORT"); v && *v) port = std::atoi(v);
    over("REDLINE_POLICY", policy_path);
    over("REDLINE_BACKEND", backend);
    over("REDLINE_PATTERN", default_pattern);
    over("REDLINE_AUDIT", audit_path);
    over("REDLINE_ADMIN_TOKEN", admin_token);
  }
};

inline Policy load_policy_or_default(const std::string& policy_path) {
  if (policy_path.empty()) return load_policy(kDefaultPolicyJson);
  return load_policy_file(policy_path);
}

class GatewayServer {
 public:
  explicit GatewayServer(ServerConfig config)
      : config_(std::move(config)),
        default_pattern_(DeploymentPattern::parse(config_.default_pattern)) {
    // fail-closed boot: bad policy or backend refuses to serve
    Policy policy = load_policy_or_default(config_.policy_path);
    EngineOptions options;
    options.audit_path = config_.audit_path;
    engine_ = std::make_unique<Engine>(std::move(policy),
                                       make_backend(config_.backend), options);
    install_routes();
  }

  Engine& engine() { return *engine_; }

  // Binds and serves on a background thread; returns the bound port.
  int start() {
    if (config_.port == 0) {
      config_.port = server_.bind_to_any_port(config_.bind);
      if (config_.port < 0) throw std::runtime_error("cannot bind listener");
    } else if (!server_.bind_to_port(config_.bind, config_.port)) {
      throw std::runtime_error("cannot bind " + config_.bind + ":" +
                               std::to_string(config_.port));
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return config_.port;
  }

  // Blocking variant for `redline serve`.
  void run() {
    start();
    thread_.join();
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  ~GatewayServer() { stop(); }

 private:
  static void error_doc(httplib::Response& res, int status,
                        const std::string& code, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", {{"code", code}, {"message", message}}}}.dump(),
                    "application/json");
  }

  json outcome_doc(const TurnResult& result) const {
    json violations = result.outcome.violations;
    return json{{"kind", std::string(to_string(result.outcome.kind))},
                {"text", result.outcome.text},
                {"audit_id", result.outcome.audit_id},
                {"violations", violations},
                {"pattern", result.pattern},
                {"metrics",
                 {{"tokens", result.metrics.tokens},
                  {"backend_calls", result.metrics.backend_calls},
                  {"backend_latency_ms", result.metrics.backend_latency_ms},
                  {"wall_time_ms", result.metrics.wall_time_ms}}}};
  }

  bool admin_authorized(const httplib::Request& req) const {
    if (config_.admin_token.empty()) return false;
    auto it = req.headers.find("Authorization");
    return it != req.headers.end() &&
           it->second == "Bearer " + config_.admin_token;
  }

  struct TurnRequest {
    std::string session_id;
    std::string text;
    DeploymentPattern pattern;
  };

  std::optional<TurnRequest> parse_turn(const httplib::Request& req,
                                        httplib::Response& res) const {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("text") ||
        !body["text"].is_string()) {
      error_doc(res, 400, "bad_request", "expected {session_id, text, pattern?}");
      return std::nullopt;
    }
    TurnRequest turn;
    turn.text = body["text"].get<std::string>();
    turn.session_id = body.value("session_id", std::string("anonymous"));
    turn.pattern = default_pattern_;
    if (body.contains("pattern")) {
      if (!body["pattern"].is_string()) {
        error_doc(res, 400, "bad_request", "pattern must be a string");
        return std::nullopt;
      }
      try {
        turn.pattern = DeploymentPattern::parse(body["pattern"].get<std::string>());
      } catch (const std::invalid_argument& e) {
        error_doc(res, 400, "bad_pattern", e.what());
        return std::nullopt;
      }
    }
    return turn;
  }

  void install_routes() {
    server_.Post("/v1/turn", [this](const httplib::Request& req,
                                    httplib::Response& res) {
      auto turn = parse_turn(req, res);
      if (!turn) return;
      try {
        TurnResult result =
            engine_->process_turn(turn->session_id, turn->text, turn->pattern);
        res.set_content(outcome_doc(result).dump(), "application/json");
      } catch (const std::exception& e) {
        error_doc(res, 500, "internal", e.what());
      }
    });

    // Chunked NDJSON stream: {"chunk": ...} lines, then {"outcome": {...}}.
    server_.Post("/v1/turn/stream", [this](const httplib::Request& req,
                                           httplib::Response& res) {
      auto turn = parse_turn(req, res);
      if (!turn) return;
      if (!turn->pattern.streaming_capable()) {
        error_doc(res, 400, "bad_pattern",
                  "pattern " + turn->pattern.label +
                      " requires full buffering and cannot stream");
        return;
      }
      auto body = std::make_shared<std::string>();
      TurnResult result = engine_->process_stream(
          turn->session_id, turn->text, turn->pattern,
          [body](std::string_view chunk) {
            *body += json{{"chunk", std::string(chunk)}}.dump();
            *body += "\n";
          });
      *body += json{{"outcome", outcome_doc(result)}}.dump();
      *body += "\n";
      res.set_content(*body, "application/x-ndjson");
    });

    server_.Get(R"(/v1/session/(.+))", [this](const httplib::Request& req,
                                              httplib::Response& res) {
      SessionState state = engine_->session_state(req.matches[1].str());
      json history = json::array();
      for (const auto& [ordinal, action] : state.history_digest)
        history.push_back(
            json{{"turn", ordinal}, {"action", std::string(to_string(action))}});
      res.set_content(json{{"session_id", state.session_id},
                           {"turns", state.turns},
                           {"flagged_turns", state.flagged_turns},
                           {"escalated", state.escalated},
                           {"safe_mode", state.safe_mode},
                           {"history", history}}
                          .dump(),
                      "application/json");
    });

    auto admin_scope =
        [this](const httplib::Request& req, httplib::Response& res,
               bool enable) {
          if (!admin_authorized(req)) {
            error_doc(res, 401, "unauthorized", "admin token required");
            return;
          }
          json body = json::parse(req.body, nullptr, false);
          if (body.is_discarded() || !body.is_object() ||
              !body.contains("scope")) {
            error_doc(res, 400, "bad_request", "expected {scope, session_id?, reason}");
            return;
          }
          std::string scope = body["scope"].get<std::string>();
          std::string reason = body.value("reason", std::string());
          std::string session = body.value("session_id", std::string());
          if (scope == "global") {
            if (enable)
              engine_->trigger_safe_mode(SafeModeScope::global, "", reason);
            else
              engine_->reset_safe_mode(SafeModeScope::global, "", reason);
          } else if (scope == "session" && !session.empty()) {
            if (enable)
              engine_->trigger_safe_mode(SafeModeScope::session, session, reason);
            else
              engine_->reset_safe_mode(SafeModeScope::session, session, reason);
          } else {
            error_doc(res, 400, "bad_scope",
                      "scope must be 'global' or 'session' with session_id");
            return;
          }
          res.set_content(json{{"ok", true},
                               {"scope", scope},
                               {"safe_mode", enable}}
                              .dump(),
                          "application/json");
        };

    server_.Post("/v1/admin/killswitch",
                 [admin_scope](const httplib::Request& req, httplib::Response& res) {
                   admin_scope(req, res, true);
                 });
    server_.Post("/v1/admin/reset",
                 [admin_scope](const httplib::Request& req, httplib::Response& res) {
                   admin_scope(req, res, false);
                 });

    server_.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(json{{"status", "ok"},
                           {"version", std::string(kVersion)},
                           {"policy_version",
                            engine_->policy()->config.policy_version},
                           {"safe_mode", engine_->global_safe_mode()}}
                          .dump(),
                      "application/json");
    });

    server_.Get("/v1/metrics", [this](const httplib::Request&, httplib::Response& res) {
      EngineMetrics m = engine_->metrics();
      res.set_content(json{{"turns", m.turns},
                           {"delivered", m.delivered},
                           {"refusals", m.refused},
                           {"escalations", m.escalated},
                           {"safe_mode_hits", m.safe_mode_hits},
                           {"fail_closed_events", m.fail_closed_events},
                           {"cache_hits", m.cache_hits},
                           {"audit_failures", m.audit_failures}}
                          .dump(),
                      "application/json");
    });
  }

  ServerConfig config_;
  DeploymentPattern default_pattern_;
  std::unique_ptr<Engine> engine_;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace redline
