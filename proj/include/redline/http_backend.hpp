#pragma once

// HTTP adapter for a chat-completions-style endpoint:
//   POST <base>/v1/chat/completions
//   {"model": ..., "messages": [{role, content}...], "temperature": ..., "stream": bool}
// Non-streaming replies carry choices[0].message.content plus usage token
// counts. Streaming uses SSE "data: {...}" delta events. Every transport or
// shape problem maps to BackendUnavailable (or StreamFault mid-stream).

#include <chrono>
#include <memory>
#include <string>
#include <string_view>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "redline/backend.hpp"
#include "redline/prompts.hpp"

namespace redline {

class HttpBackend : public ModelBackend {
 public:
  HttpBackend(std::string base_url, std::string model,
              double temperature = 0.0,
              std::chrono::seconds timeout = std::chrono::seconds(30))
      : base_url_(std::move(base_url)),
        model_(std::move(model)),
        temperature_(temperature),
        timeout_(timeout) {}

  ModelReply complete(std::string_view prompt, std::string_view profile) override {
    auto started = std::chrono::steady_clock::now();
    httplib::Client client = make_client();
    auto res = client.Post("/v1/chat/completions", request_body(prompt, profile, false),
                           "application/json");
    if (!res || res->status != 200)
      throw BackendUnavailable("backend request failed: " +
                               (res ? "status " + std::to_string(res->status)
                                    : std::string("no response")));
    nlohmann::json doc = nlohmann::json::parse(res->body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty())
      throw BackendUnavailable("backend reply is not a completion document");
    ModelReply reply;
    try {
      reply.text = doc["choices"][0]["message"]["content"].get<std::string>();
    } catch (...) {
      throw BackendUnavailable("backend reply has no message content");
    }
    if (doc.contains("usage")) {
      reply.prompt_tokens = doc["usage"].value("prompt_tokens", 0L);
      reply.completion_tokens = doc["usage"].value("completion_tokens", 0L);
    }
    reply.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    return reply;
  }

  ModelReply stream(std::string_view prompt, std::string_view profile,
                    const ChunkSink& sink) override {
    auto started = std::chrono::steady_clock::now();
    httplib::Client client = make_client();

    ModelReply reply;
    std::string pending;
    bool done = false;
    bool halted = false;

    auto handle_line = [&](std::string_view line) {
      if (line.rfind("data:", 0) != 0) return true;
      std::string_view payload = line.substr(5);
      while (!payload.empty() && payload.front() == ' ') payload.remove_prefix(1);
      if (payload == "[DONE]") { done = true; return true; }
      nlohmann::json evt = nlohmann::json::parse(payload, nullptr, false);
      if (evt.is_discarded()) return true;  // ignore malformed keepalives
      if (evt.contains("usage") && evt["usage"].is_object()) {
        reply.prompt_tokens = evt["usage"].value("prompt_tokens", 0L);
        reply.completion_tokens = evt["usage"].value("completion_tokens", 0L);
      }
      if (evt.contains("choices") && !evt["choices"].empty()) {
        const auto& delta = evt["choices"][0]["delta"];
        if (delta.contains("content") && delta["content"].is_string()) {
          std::string chunk = delta["content"].get<std::string>();
          reply.text += chunk;
          if (!sink(chunk)) { halted = true; return false; }
        }
      }
      return true;
    };

    httplib::Request req;
    req.method = "POST";
    req.path = "/v1/chat/completions";
    req.body = request_body(prompt, profile, true);
    req.set_header("Content-Type", "application/json");
    req.content_receiver = [&](const char* data, size_t len, uint64_t, uint64_t) {
      pending.append(data, len);
      std::size_t nl;
      while ((nl = pending.find('\n')) != std::string::npos) {
        std::string line = pending.substr(0, nl);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        pending.erase(0, nl + 1);
        if (!handle_line(line)) return false;
      }
      return true;
    };
    auto res = client.send(req);

    if (halted) {
      // client aborted on purpose; deliver what we have
      reply.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - started);
      return reply;
    }
    if (!res || res->status != 200) {
      if (!reply.text.empty() || done)
        throw StreamFault("stream ended abnormally");
      throw BackendUnavailable("backend stream request failed");
    }
    reply.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    return reply;
  }

 private:
  httplib::Client make_client() const {
    httplib::Client client(base_url_);
    client.set_connection_timeout(timeout_.count(), 0);
    client.set_read_timeout(timeout_.count(), 0);
    return client;
  }

  std::string request_body(std::string_view prompt, std::string_view profile,
                           bool stream) const {
    std::string system;
    if (auto p = profile_from_id(profile))
      system = std::string(profile_text(*p));
    else
      system = std::string(profile);  // custom profiles pass through as text
    nlohmann::json body{
        {"model", model_},
        {"temperature", temperature_},
        {"stream", stream},
        {"messages",
         {{{"role", "system"}, {"content", system}},
          {{"role", "user"}, {"content", std::string(prompt)}}}}};
    return body.dump();
  }

  std::string base_url_;
  std::string model_;
  double temperature_;
  std::chrono::seconds timeout_;
};

// descriptor: "mock:<script path>" or "http:<base url>[#model]"
inline std::shared_ptr<ModelBackend> make_backend(std::string_view descriptor) {
  if (descriptor.rfind("mock:", 0) == 0) {
    return std::make_shared<MockBackend>(
        MockBackend::from_file(std::string(descriptor.substr(5))));
  }
  if (descriptor.rfind("http:", 0) == 0) {
    std::string rest(descriptor.substr(5));
    std::string model = "default";
    if (auto hash = rest.find('#'); hash != std::string::npos) {
      model = rest.substr(hash + 1);
      rest = rest.substr(0, hash);
    }
    if (rest.rfind("//", 0) == 0) rest = "http:" + rest;  // http://host form
    return std::make_shared<HttpBackend>(rest, model);
  }
  throw std::invalid_argument("unknown backend descriptor: " +
                              std::string(descriptor) +
                              " (expected mock:<path> or http:<url>)");
}

}  // namespace redline
