#pragma once

// Generation backend seam. The pipeline only ever talks to ModelBackend;
// implementations are the bit-deterministic scripted mock (rule file) and an
// HTTP chat-completions adapter. Transport faults surface as
// BackendUnavailable / StreamFault and the callers fail closed.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "redline/digest.hpp"
#include "redline/prompts.hpp"

namespace redline {

struct ModelReply {
  std::string text;
  long prompt_tokens = 0;
  long completion_tokens = 0;
  std::chrono::milliseconds latency{0};

  long total_tokens() const { return prompt_tokens + completion_tokens; }
};

class BackendUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StreamFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sink receives each chunk; returning false halts the stream client-side.
using ChunkSink = std::function<bool(std::string_view)>;

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual ModelReply complete(std::string_view prompt,
                              std::string_view profile) = 0;

  // Default streaming shim: one chunk carrying the whole completion.
  virtual ModelReply stream(std::string_view prompt, std::string_view profile,
                            const ChunkSink& sink) {
    ModelReply reply = complete(prompt, profile);
    sink(reply.text);
    return reply;
  }

  virtual bool supports_streaming() const { return true; }
};

// ---------------------------------------------------------------------------
// Scripted mock backend
// ---------------------------------------------------------------------------
//
// Script document:
//   {"name": "...",
//    "rules": [{"profile": "input-judge",          // optional, exact match
//               "contains_any": ["lose weight"],   // optional, ci substring
//               "equals": "...",                   // optional, exact prompt
//               "prompt_sha256": "...",            // optional, digest match
//               "reply": {"text": "...",
//                          "chunks": ["..."],      // optional stream chunks
//                          "stream_fault_after": 1,// optional fault injection
//                          "prompt_tokens": 210, "completion_tokens": 28,
//                          "latency_ms": 180}}],
//    "default": {"text": ..., ...}}                // optional catch-all
//
// Rules are evaluated in order; the first match wins. Replies are a pure
// function of (prompt, profile), so the mock is bit-deterministic. Call
// counts per profile are tracked for cache/overhead tests.

class MockBackend : public ModelBackend {
 public:
  struct ReplySpec {
    std::string text;
    std::vector<std::string> chunks;
    int stream_fault_after = -1;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    long latency_ms = 0;
  };

  struct Rule {
    std::optional<std::string> profile;
    std::vector<std::string> contains_any;  // matched lowercase
    std::optional<std::string> equals;
    std::optional<std::string> prompt_sha256;
    ReplySpec reply;
  };

  static MockBackend from_json(const nlohmann::json& doc) {
    if (!doc.is_object())
      throw std::invalid_argument("mock script: top level is not an object");
    MockBackend mock;
    mock.name_ = doc.value("name", std::string("mock"));
    if (doc.contains("rules")) {
      if (!doc["rules"].is_array())
        throw std::invalid_argument("mock script: 'rules' is not an array");
      for (const auto& r : doc["rules"]) mock.rules_.push_back(parse_rule(r));
    }
    if (doc.contains("default"))
      mock.default_reply_ = parse_reply(doc["default"]);
    return mock;
  }

  static MockBackend from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read mock script: " + path);
    nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded())
      throw std::invalid_argument("mock script is not valid JSON: " + path);
    return from_json(doc);
  }

  ModelReply complete(std::string_view prompt, std::string_view profile) override {
    count(profile);
    const ReplySpec& spec = select(prompt, profile);
    return to_reply(spec);
  }

  ModelReply stream(std::string_view prompt, std::string_view profile,
                    const ChunkSink& sink) override {
    count(profile);
    const ReplySpec& spec = select(prompt, profile);
    std::vector<std::string> chunks = spec.chunks;
    if (chunks.empty()) chunks.push_back(spec.text);
    int emitted = 0;
    for (const auto& c : chunks) {
      if (spec.stream_fault_after >= 0 && emitted >= spec.stream_fault_after)
        throw StreamFault("scripted stream fault");
      if (!sink(c)) break;
      ++emitted;
    }
    return to_reply(spec);
  }

  const std::string& name() const { return name_; }

  long calls(std::string_view profile) const {
    std::lock_guard lock(counters_->mu);
    auto it = counters_->calls.find(std::string(profile));
    return it == counters_->calls.end() ? 0 : it->second;
  }

  long total_calls() const {
    std::lock_guard lock(counters_->mu);
    long n = 0;
    for (const auto& [_, c] : counters_->calls) n += c;
    return n;
  }

  void reset_counters() {
    std::lock_guard lock(counters_->mu);
    counters_->calls.clear();
  }

 private:
  static ReplySpec parse_reply(const nlohmann::json& r) {
    if (!r.is_object())
      throw std::invalid_argument("mock script: reply is not an object");
    ReplySpec spec;
    spec.text = r.value("text", std::string());
    if (r.contains("chunks"))
      for (const auto& c : r["chunks"]) spec.chunks.push_back(c.get<std::string>());
    spec.stream_fault_after = r.value("stream_fault_after", -1);
    spec.prompt_tokens = r.value("prompt_tokens", 0L);
    spec.completion_tokens = r.value("completion_tokens", 0L);
    spec.latency_ms = r.value("latency_ms", 0L);
    return spec;
  }

  static Rule parse_rule(const nlohmann::json& r) {
    if (!r.is_object() || !r.contains("reply"))
      throw std::invalid_argument("mock script: rule without reply");
    Rule rule;
    if (r.contains("profile")) rule.profile = r["profile"].get<std::string>();
    if (r.contains("contains_any"))
      for (const auto& s : r["contains_any"])
        rule.contains_any.push_back(lower(s.get<std::string>()));
    if (r.contains("equals")) rule.equals = r["equals"].get<std::string>();
    if (r.contains("prompt_sha256"))
      rule.prompt_sha256 = r["prompt_sha256"].get<std::string>();
    rule.reply = parse_reply(r["reply"]);
    return rule;
  }

  static std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
      return static_cast<char>(std::tolower(c));
    });
    return out;
  }

  const ReplySpec& select(std::string_view prompt, std::string_view profile) const {
    std::string prompt_lower = lower(prompt);
    for (const auto& rule : rules_) {
      if (rule.profile && *rule.profile != profile) continue;
      if (rule.equals && *rule.equals != prompt) continue;
      if (rule.prompt_sha256 && *rule.prompt_sha256 != sha256_hex(prompt)) continue;
      if (!rule.contains_any.empty()) {
        bool any = false;
        for (const auto& needle : rule.contains_any)
          if (prompt_lower.find(needle) != std::string::npos) { any = true; break; }
        if (!any) continue;
      }
      return rule.reply;
    }
    if (default_reply_) return *default_reply_;
    throw BackendUnavailable("mock '" + name_ + "' has no rule for profile '" +
                             std::string(profile) + "'");
  }

  ModelReply to_reply(const ReplySpec& spec) const {
    ModelReply reply;
    reply.text = spec.text;
    if (reply.text.empty() && !spec.chunks.empty())
      for (const auto& c : spec.chunks) reply.text += c;
    reply.prompt_tokens = spec.prompt_tokens;
    reply.completion_tokens = spec.completion_tokens;
    reply.latency = std::chrono::milliseconds(spec.latency_ms);
    return reply;
  }

  void count(std::string_view profile) const {
    std::lock_guard lock(counters_->mu);
    ++counters_->calls[std::string(profile)];
  }

  // behind a pointer so the factory-built backend stays movable
  struct Counters {
    std::mutex mu;
    std::map<std::string, long> calls;
  };

  std::string name_;
  std::vector<Rule> rules_;
  std::optional<ReplySpec> default_reply_;
  std::unique_ptr<Counters> counters_ = std::make_unique<Counters>();
};

}  // namespace redline
