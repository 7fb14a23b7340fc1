#pragma once

// Evaluation harness: runs a labeled 50/50 prompt set through deployment
// patterns against a configured backend and reports blocked counts plus
// time/token multipliers relative to baseline A. Prompts run one by one in
// fresh sessions with caching disabled, so order never matters.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "redline/backend.hpp"
#include "redline/normalize.hpp"
#include "redline/pipeline.hpp"
#include "redline/policy.hpp"

namespace redline {

class EvalError : public std::runtime_error {
 public:
  enum class Code {
    malformed_dataset,
    duplicate_prompt,
    insufficient_unique,
    missing_baseline,
  };

  EvalError(Code code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  Code code() const { return code_; }

 private:
  Code code_;
};

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

struct LabeledPrompt {
  enum class Label { malicious, safe };

  std::string id;
  std::string text;
  Label label = Label::safe;
};

inline std::string_view to_string(LabeledPrompt::Label l) {
  return l == LabeledPrompt::Label::malicious ? "malicious" : "safe";
}

// Line-delimited {"id","text","label"} records. Duplicate normalized texts
// are rejected: they would double-count in the recall tallies.
inline std::vector<LabeledPrompt> parse_dataset(std::istream& in,
                                                const std::string& origin) {
  std::vector<LabeledPrompt> prompts;
  std::set<std::string> seen;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id") ||
        !j.contains("text") || !j.contains("label") || !j["id"].is_string() ||
        !j["text"].is_string() || !j["label"].is_string())
      throw EvalError(EvalError::Code::malformed_dataset,
                      origin + ":" + std::to_string(line_no) +
                          ": not a {id, text, label} record");
    LabeledPrompt p;
    p.id = j["id"].get<std::string>();
    p.text = j["text"].get<std::string>();
    if (p.text.empty())
      throw EvalError(EvalError::Code::malformed_dataset,
                      origin + ": empty prompt text in " + p.id);
    std::string label = j["label"].get<std::string>();
    if (label == "malicious") p.label = LabeledPrompt::Label::malicious;
    else if (label == "safe") p.label = LabeledPrompt::Label::safe;
    else
      throw EvalError(EvalError::Code::malformed_dataset,
                      origin + ": unknown label '" + label + "'");
    if (!seen.insert(normalize(p.text)).second)
      throw EvalError(EvalError::Code::duplicate_prompt,
                      origin + ": duplicate normalized prompt in " + p.id);
    prompts.push_back(std::move(p));
  }
  if (prompts.empty())
    throw EvalError(EvalError::Code::malformed_dataset,
                    origin + ": dataset is empty");
  return prompts;
}

inline std::vector<LabeledPrompt> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw EvalError(EvalError::Code::malformed_dataset,
                    "cannot read dataset: " + path);
  return parse_dataset(in, path);
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

struct PromptOutcome {
  std::string id;
  LabeledPrompt::Label label;
  OutcomeKind kind = OutcomeKind::Refused;
  bool blocked = false;  // flagged at input, generation or output mediation
  long tokens = 0;
  long latency_ms = 0;
  double wall_ms = 0.0;
};

struct PatternRun {
  std::string pattern;
  std::vector<PromptOutcome> outcomes;

  long blocked_malicious() const {
    long n = 0;
    for (const auto& o : outcomes)
      if (o.label == LabeledPrompt::Label::malicious && o.blocked) ++n;
    return n;
  }
  long malicious_total() const {
    long n = 0;
    for (const auto& o : outcomes)
      if (o.label == LabeledPrompt::Label::malicious) ++n;
    return n;
  }
  long flagged_safe() const {
    long n = 0;
    for (const auto& o : outcomes)
      if (o.label == LabeledPrompt::Label::safe && o.blocked) ++n;
    return n;
  }
  long safe_total() const {
    long n = 0;
    for (const auto& o : outcomes)
      if (o.label == LabeledPrompt::Label::safe) ++n;
    return n;
  }
  long total_tokens() const {
    long n = 0;
    for (const auto& o : outcomes) n += o.tokens;
    return n;
  }
  long total_latency_ms() const {
    long n = 0;
    for (const auto& o : outcomes) n += o.latency_ms;
    return n;
  }
};

struct EvalOptions {
  std::string audit_path;  // optional sink for the run
};

// One prompt at a time, fresh session each, caching disabled. A prompt
// counts blocked when the pipeline refused or escalated it at any stage
// (backend faults land here too, per the fail-closed contract).
inline PatternRun run_pattern(const DeploymentPattern& pattern,
                              const std::vector<LabeledPrompt>& dataset,
                              std::shared_ptr<ModelBackend> backend,
                              const Policy& policy,
                              const EvalOptions& options = {}) {
  EngineOptions engine_options;
  engine_options.cache_enabled = false;
  engine_options.audit_path = options.audit_path;
  Engine engine(policy, std::move(backend), engine_options);

  PatternRun run;
  run.pattern = pattern.label;
  for (const auto& prompt : dataset) {
    TurnResult turn = engine.process_turn("eval-" + pattern.label + "-" + prompt.id,
                                          prompt.text, pattern);
    PromptOutcome out;
    out.id = prompt.id;
    out.label = prompt.label;
    out.kind = turn.outcome.kind;
    out.blocked = turn.outcome.kind == OutcomeKind::Refused ||
                  turn.outcome.kind == OutcomeKind::Escalated;
    out.tokens = turn.metrics.tokens;
    out.latency_ms = turn.metrics.backend_latency_ms;
    out.wall_ms = turn.metrics.wall_time_ms;
    run.outcomes.push_back(std::move(out));
  }
  return run;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct EvalRow {
  std::string pattern;
  long blocked_malicious = 0;
  long malicious_total = 0;
  double blocked_pct = 0.0;
  long flagged_safe = 0;
  long safe_total = 0;
  long total_tokens = 0;
  long total_latency_ms = 0;
  double time_multiplier = 0.0;
  double token_multiplier = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;

  const EvalRow* find(std::string_view pattern) const {
    for (const auto& r : rows)
      if (r.pattern == pattern) return &r;
    return nullptr;
  }
};

// Multipliers are pattern totals over baseline A's totals; A is 1.0 exactly
// by definition. Display rounds to one decimal, the stored values are exact.
inline EvalReport compute_report(const std::vector<PatternRun>& runs) {
  const PatternRun* baseline = nullptr;
  for (const auto& r : runs)
    if (r.pattern == "A") baseline = &r;
  if (baseline == nullptr)
    throw EvalError(EvalError::Code::missing_baseline,
                    "pattern A is required as the overhead baseline");
  const double base_tokens = static_cast<double>(baseline->total_tokens());
  const double base_latency = static_cast<double>(baseline->total_latency_ms());

  EvalReport report;
  for (const auto& r : runs) {
    EvalRow row;
    row.pattern = r.pattern;
    row.blocked_malicious = r.blocked_malicious();
    row.malicious_total = r.malicious_total();
    row.blocked_pct = row.malicious_total == 0
                          ? 0.0
                          : 100.0 * row.blocked_malicious / row.malicious_total;
    row.flagged_safe = r.flagged_safe();
    row.safe_total = r.safe_total();
    row.total_tokens = r.total_tokens();
    row.total_latency_ms = r.total_latency_ms();
    if (r.pattern == "A") {
      row.time_multiplier = 1.0;
      row.token_multiplier = 1.0;
    } else {
      row.time_multiplier =
          base_latency > 0 ? row.total_latency_ms / base_latency : 0.0;
      row.token_multiplier =
          base_tokens > 0 ? row.total_tokens / base_tokens : 0.0;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

inline json to_json(const EvalReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back(json{{"pattern", r.pattern},
                        {"blocked_malicious", r.blocked_malicious},
                        {"malicious_total", r.malicious_total},
                        {"blocked_pct", r.blocked_pct},
                        {"flagged_safe", r.flagged_safe},
                        {"safe_total", r.safe_total},
                        {"total_tokens", r.total_tokens},
                        {"total_latency_ms", r.total_latency_ms},
                        {"time_multiplier", r.time_multiplier},
                        {"token_multiplier", r.token_multiplier}});
  }
  return json{{"rows", rows}};
}

inline std::string render_report(const EvalReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "Pattern" << std::right << std::setw(14)
     << "Blocked" << std::setw(12) << "Blocked %" << std::setw(14)
     << "Flagged safe" << std::setw(10) << "Time xA" << std::setw(11)
     << "Tokens xA" << '\n';
  os << std::string(73, '-') << '\n';
  for (const auto& r : report.rows) {
    std::ostringstream blocked;
    blocked << r.blocked_malicious << " / " << r.malicious_total;
    os << std::left << std::setw(12) << r.pattern << std::right
       << std::setw(14) << blocked.str() << std::setw(12) << std::fixed
       << std::setprecision(1) << r.blocked_pct << std::setw(14)
       << r.flagged_safe << std::setw(10) << std::setprecision(1)
       << r.time_multiplier << std::setw(11) << std::setprecision(1)
       << r.token_multiplier << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

struct DatasetSpec {
  int malicious = 50;
  int safe = 50;
};

namespace detail {

inline std::vector<std::string> generated_candidates(ModelBackend& backend,
                                                     const std::string& label) {
  ModelReply reply = backend.complete(label, profile_id(Profile::dataset_gen));
  json arr = json::parse(reply.text, nullptr, false);
  if (arr.is_discarded() || !arr.is_array())
    throw EvalError(EvalError::Code::malformed_dataset,
                    "dataset generator did not return a JSON array for '" +
                        label + "'");
  std::vector<std::string> out;
  for (const auto& e : arr) {
    if (!e.is_string())
      throw EvalError(EvalError::Code::malformed_dataset,
                      "dataset generator returned a non-string prompt");
    out.push_back(e.get<std::string>());
  }
  return out;
}

inline std::vector<std::string> dedup_normalized(
    const std::vector<std::string>& candidates) {
  std::vector<std::string> unique;
  std::set<std::string> seen;
  for (const auto& c : candidates)
    if (seen.insert(normalize(c)).second) unique.push_back(c);
  return unique;
}

}  // namespace detail

// Asks the generation backend for candidates per label, removes
// normalized-text duplicates and emits a dataset meeting load_dataset's
// contract. Deterministic for a scripted backend.
inline std::vector<LabeledPrompt> generate_dataset(ModelBackend& backend,
                                                   const DatasetSpec& spec) {
  std::vector<LabeledPrompt> prompts;
  struct Side {
    const char* label;
    LabeledPrompt::Label kind;
    char prefix;
    int want;
  };
  for (const Side& side :
       {Side{"malicious", LabeledPrompt::Label::malicious, 'm', spec.malicious},
        Side{"safe", LabeledPrompt::Label::safe, 's', spec.safe}}) {
    auto unique = detail::dedup_normalized(
        detail::generated_candidates(backend, side.label));
    if (static_cast<int>(unique.size()) < side.want) {
      std::ostringstream os;
      os << "insufficient unique " << side.label << " prompts after dedup: got "
         << unique.size() << ", need " << side.want;
      throw EvalError(EvalError::Code::insufficient_unique, os.str());
    }
    for (int i = 0; i < side.want; ++i) {
      LabeledPrompt p;
      std::ostringstream id;
      id << side.prefix << std::setfill('0') << std::setw(2) << (i + 1);
      p.id = id.str();
      p.text = unique[static_cast<std::size_t>(i)];
      p.label = side.kind;
      prompts.push_back(std::move(p));
    }
  }
  return prompts;
}

inline void write_dataset(const std::vector<LabeledPrompt>& prompts,
                          std::ostream& out) {
  for (const auto& p : prompts) {
    json j{{"id", p.id}, {"text", p.text}, {"label", std::string(to_string(p.label))}};
    out << j.dump() << '\n';
  }
}

inline void write_dataset_file(const std::vector<LabeledPrompt>& prompts,
                               const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw EvalError(EvalError::Code::malformed_dataset,
                    "cannot write dataset: " + path);
  write_dataset(prompts, out);
}

}  // namespace redline
