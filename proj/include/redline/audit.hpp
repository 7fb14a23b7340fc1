#pragma once

// Append-only observability. Every turn produces exactly one
// InteractionRecord, written as a single JSON line to a size-rotated sink.
// Sink failures never block safety decisions; they only bump a counter.
// Also home to the static failure-pattern -> OWASP LLM Top 10 / NIST 800-53
// control map and the drift-report aggregation.

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "redline/types.hpp"

namespace redline {

inline std::string utc_timestamp(
    std::chrono::system_clock::time_point tp = std::chrono::system_clock::now()) {
  auto secs = std::chrono::time_point_cast<std::chrono::seconds>(tp);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(tp - secs).count();
  std::time_t t = std::chrono::system_clock::to_time_t(secs);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

// ---------------------------------------------------------------------------
// Interaction records
// ---------------------------------------------------------------------------

struct StageDecision {
  std::string stage;
  Verdict verdict;

  friend bool operator==(const StageDecision&, const StageDecision&) = default;
};

// Violation strings that mark a fail-closed event rather than a policy hit.
inline bool is_fail_closed_marker(std::string_view v) {
  return v == "unparsable_verdict" || v == "backend_unavailable" ||
         v == "gate_error" || v == "scanner_error" || v == "stream_fault";
}

struct InteractionRecord {
  std::string audit_id;
  std::string timestamp;  // UTC ISO-8601
  std::string session_id;
  std::string pattern;
  std::string input_digest;  // sha256 of the raw input, always stored
  std::vector<StageDecision> decisions;  // stage execution order
  std::map<std::string, int> features;   // output-scan features
  OutcomeKind outcome = OutcomeKind::Refused;
  long tokens = 0;
  double wall_time_ms = 0.0;
  std::string policy_version;
  bool redacted = true;
  std::optional<std::string> input_text;  // only when redaction is off
};

inline json to_json(const InteractionRecord& r) {
  json decisions = json::array();
  for (const auto& d : r.decisions)
    decisions.push_back(json{{"stage", d.stage}, {"verdict", to_json(d.verdict)}});
  json j{{"audit_id", r.audit_id},
         {"timestamp", r.timestamp},
         {"session_id", r.session_id},
         {"pattern", r.pattern},
         {"input_digest", r.input_digest},
         {"decisions", decisions},
         {"features", r.features},
         {"outcome", to_string(r.outcome)},
         {"tokens", r.tokens},
         {"wall_time_ms", r.wall_time_ms},
         {"policy_version", r.policy_version},
         {"redacted", r.redacted}};
  if (!r.redacted && r.input_text) j["input_text"] = *r.input_text;
  return j;
}

inline std::optional<InteractionRecord> record_from_json(const json& j) {
  if (!j.is_object() || j.value("type", std::string()) == "admin_action")
    return std::nullopt;
  InteractionRecord r;
  try {
    r.audit_id = j.at("audit_id").get<std::string>();
    r.timestamp = j.at("timestamp").get<std::string>();
    r.session_id = j.at("session_id").get<std::string>();
    r.pattern = j.at("pattern").get<std::string>();
    r.input_digest = j.at("input_digest").get<std::string>();
    for (const auto& d : j.at("decisions")) {
      StageDecision sd;
      sd.stage = d.at("stage").get<std::string>();
      const auto& v = d.at("verdict");
      sd.verdict.is_safe = v.at("is_safe").get<bool>();
      for (const auto& s : v.at("violations"))
        sd.verdict.violations.push_back(s.get<std::string>());
      if (v.contains("risk")) sd.verdict.risk = v["risk"].get<double>();
      std::string src = v.at("source").get<std::string>();
      if (src == "lexical_gate") sd.verdict.source = VerdictSource::lexical_gate;
      else if (src == "input_judge") sd.verdict.source = VerdictSource::input_judge;
      else if (src == "output_judge") sd.verdict.source = VerdictSource::output_judge;
      else if (src == "single_call") sd.verdict.source = VerdictSource::single_call;
      else sd.verdict.source = VerdictSource::output_scanner;
      r.decisions.push_back(std::move(sd));
    }
    if (j.contains("features"))
      r.features = j["features"].get<std::map<std::string, int>>();
    auto kind = outcome_from_string(j.at("outcome").get<std::string>());
    if (!kind) return std::nullopt;
    r.outcome = *kind;
    r.tokens = j.at("tokens").get<long>();
    r.wall_time_ms = j.at("wall_time_ms").get<double>();
    r.policy_version = j.at("policy_version").get<std::string>();
    r.redacted = j.at("redacted").get<bool>();
    if (j.contains("input_text")) r.input_text = j["input_text"].get<std::string>();
  } catch (...) {
    return std::nullopt;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Sink
// ---------------------------------------------------------------------------

class AuditLog {
 public:
  explicit AuditLog(std::string path, std::size_t max_bytes = 8 * 1024 * 1024)
      : path_(std::move(path)), max_bytes_(max_bytes) {}

  // Durably appends one record line. Returns false (and counts a failure)
  // instead of throwing: audit trouble must never block a safety decision.
  bool append(const InteractionRecord& record) {
    return write_line(to_json(record).dump());
  }

  bool append_admin(std::string_view audit_id, std::string_view scope,
                    std::string_view action, std::string_view reason,
                    std::string_view policy_version) {
    json j{{"type", "admin_action"},
           {"audit_id", std::string(audit_id)},
           {"timestamp", utc_timestamp()},
           {"scope", std::string(scope)},
           {"action", std::string(action)},
           {"reason", std::string(reason)},
           {"policy_version", std::string(policy_version)}};
    return write_line(j.dump());
  }

  const std::string& path() const { return path_; }

  long entries() const { return entries_.load(); }
  long failures() const { return failures_.load(); }

  // Reads interaction records back from a sink file; admin-action and
  // malformed lines are skipped.
  static std::vector<InteractionRecord> load_records(const std::string& path) {
    std::vector<InteractionRecord> out;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded()) continue;
      if (auto r = record_from_json(j)) out.push_back(std::move(*r));
    }
    return out;
  }

 private:
  bool write_line(const std::string& line) {
    std::lock_guard lock(mu_);
    rotate_if_needed(line.size() + 1);
    std::ofstream out(path_, std::ios::app);
    if (!out) {
      ++failures_;
      return false;
    }
    out << line << '\n';
    out.flush();
    if (!out) {
      ++failures_;
      return false;
    }
    bytes_ += line.size() + 1;
    ++entries_;
    return true;
  }

  void rotate_if_needed(std::size_t incoming) {
    if (bytes_ == 0) {
      std::ifstream probe(path_, std::ios::ate | std::ios::binary);
      if (probe) bytes_ = static_cast<std::size_t>(probe.tellg());
    }
    if (bytes_ + incoming <= max_bytes_) return;
    std::rename(path_.c_str(), (path_ + ".1").c_str());
    bytes_ = 0;
  }

  std::string path_;
  std::size_t max_bytes_;
  std::mutex mu_;
  std::size_t bytes_ = 0;
  std::atomic<long> entries_{0};
  std::atomic<long> failures_{0};
};

// ---------------------------------------------------------------------------
// Control mapping
// ---------------------------------------------------------------------------

struct ControlMapping {
  std::string failure_pattern;
  std::vector<std::string> llm_top10;
  std::vector<std::string> nist_controls;

  friend bool operator==(const ControlMapping&, const ControlMapping&) = default;
};

class UnknownPattern : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The eight failure patterns this middleware is built against, mapped to
// OWASP LLM Top 10 entries and NIST SP 800-53 controls. Identifiers are kept
// as published (SA-12 is a Rev.4 identifier that Rev.5 folds into SR-*).
inline const std::array<ControlMapping, 8>& control_mappings() {
  static const std::array<ControlMapping, 8> table = {{
      {"policy-implementation drift & weak change control",
       {"LLM10", "LLM05"},
       {"CM-3", "CM-5", "SA-10", "SA-11", "SA-9"}},
      {"missing input triage and risk-intent detection",
       {"LLM01", "LLM10"},
       {"SI-10", "AC-4", "SC-7"}},
      {"insecure output handling (no deterministic redlines)",
       {"LLM02"},
       {"AC-4", "SI-10"}},
      {"no escalation pathway / human handoff",
       {"LLM08", "LLM09"},
       {"IR-4", "IR-8", "AU-12"}},
      {"stateless moderation (no session risk memory)",
       {"LLM09", "LLM10"},
       {"AC-16", "AU-12", "SI-4"}},
      {"insufficient monitoring, red-teaming, and rollback",
       {"LLM10", "LLM05"},
       {"CA-7", "RA-5", "SA-11"}},
      {"third-party/supply-chain risk without provenance",
       {"LLM05"},
       {"SA-9", "SA-12", "SR-3", "SR-5"}},
      {"no automated safe-mode or kill-switch",
       {"LLM08", "LLM10"},
       {"IR-4(1)", "CP-10"}},
  }};
  return table;
}

// Exact (case-insensitive) key or unique prefix lookup over the eight rows.
inline const ControlMapping& map_controls(std::string_view key) {
  std::string k(key);
  std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  const ControlMapping* prefix_hit = nullptr;
  int prefix_hits = 0;
  for (const auto& row : control_mappings()) {
    if (row.failure_pattern == k) return row;
    if (!k.empty() && row.failure_pattern.rfind(k, 0) == 0) {
      prefix_hit = &row;
      ++prefix_hits;
    }
  }
  if (prefix_hits == 1) return *prefix_hit;
  throw UnknownPattern("unknown failure pattern: " + std::string(key));
}

// ---------------------------------------------------------------------------
// Drift report
// ---------------------------------------------------------------------------

struct DriftReport {
  long records = 0;
  long tokens = 0;
  long fail_closed_events = 0;
  std::map<std::string, long> by_outcome;
  std::map<std::string, long> by_stage;           // decisions seen per stage
  std::map<std::string, long> violation_histogram;

  friend bool operator==(const DriftReport&, const DriftReport&) = default;
};

// Aggregate counts over a record range; deterministic and order-insensitive.
inline DriftReport summarize(std::span<const InteractionRecord> records) {
  DriftReport report;
  for (const auto& r : records) {
    ++report.records;
    report.tokens += r.tokens;
    ++report.by_outcome[std::string(to_string(r.outcome))];
    bool fail_closed = false;
    for (const auto& d : r.decisions) {
      ++report.by_stage[d.stage];
      for (const auto& v : d.verdict.violations) {
        ++report.violation_histogram[v];
        if (is_fail_closed_marker(v)) fail_closed = true;
      }
    }
    if (fail_closed) ++report.fail_closed_events;
  }
  return report;
}

inline json to_json(const DriftReport& r) {
  return json{{"records", r.records},
              {"tokens", r.tokens},
              {"fail_closed_events", r.fail_closed_events},
              {"by_outcome", r.by_outcome},
              {"by_stage", r.by_stage},
              {"violation_histogram", r.violation_histogram}};
}

}  // namespace redline
