#pragma once

// LLM-mediated safety modes: the input judge (pre-generation), the output
// judge (post-generation) and the single-call trailing-JSON verdict. All
// parsing is fail-closed: anything that is not a well-formed verdict becomes
// an unsafe verdict, and an unsafe or unparsable single-call result never
// carries a deliverable answer.

#include <cctype>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "redline/backend.hpp"
#include "redline/policy.hpp"
#include "redline/prompts.hpp"
#include "redline/types.hpp"

namespace redline {

// ---------------------------------------------------------------------------
// Strict judge-verdict parsing: {"is_safe": bool, "categories": [str...],
// "confidence": number in [0,1] (optional)}
// ---------------------------------------------------------------------------

namespace detail {

inline bool string_array(const json& j, std::vector<std::string>& out) {
  if (!j.is_array()) return false;
  for (const auto& e : j) {
    if (!e.is_string()) return false;
    out.push_back(e.get<std::string>());
  }
  return true;
}

}  // namespace detail

inline Verdict unparsable_verdict(VerdictSource source) {
  return Verdict::unsafe(source, {"unparsable_verdict"}, 1.0);
}

// Parses a full judge completion. Unknown extra keys are tolerated; missing
// or mistyped required keys, out-of-range confidence, or an internally
// inconsistent verdict (safe with categories) all fail closed.
inline Verdict parse_judge_verdict(std::string_view text, VerdictSource source) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return unparsable_verdict(source);
  if (!doc.contains("is_safe") || !doc["is_safe"].is_boolean())
    return unparsable_verdict(source);
  bool is_safe = doc["is_safe"].get<bool>();

  std::vector<std::string> categories;
  if (!doc.contains("categories") ||
      !detail::string_array(doc["categories"], categories))
    return unparsable_verdict(source);
  if (is_safe && !categories.empty()) return unparsable_verdict(source);

  std::optional<double> risk;
  if (doc.contains("confidence")) {
    if (!doc["confidence"].is_number()) return unparsable_verdict(source);
    double c = doc["confidence"].get<double>();
    if (c < 0.0 || c > 1.0) return unparsable_verdict(source);
    risk = c;
  } else {
    risk = is_safe ? 0.0 : 1.0;
  }

  return is_safe ? Verdict::safe(source, risk)
                 : Verdict::unsafe(source, std::move(categories), risk);
}

// ---------------------------------------------------------------------------
// Judges
// ---------------------------------------------------------------------------

struct Judged {
  Verdict verdict;
  std::optional<ModelReply> reply;  // absent when no backend call was made
};

// Sends the user text under the input-judge profile. BackendUnavailable
// propagates so the caller can fail closed.
inline Judged judge_input(std::string_view user_text, const Policy&,
                          ModelBackend& backend) {
  Judged out;
  out.reply = backend.complete(user_text, profile_id(Profile::input_judge));
  out.verdict = parse_judge_verdict(out.reply->text, VerdictSource::input_judge);
  return out;
}

// As judge_input, over a candidate answer. An empty answer adjudicates safe
// without a backend call; it still flows through scan + reconcile.
inline Judged judge_output(std::string_view answer, const Policy&,
                           ModelBackend& backend) {
  Judged out;
  if (answer.empty()) {
    out.verdict = Verdict::safe(VerdictSource::output_judge, 0.0);
    return out;
  }
  out.reply = backend.complete(answer, profile_id(Profile::output_judge));
  out.verdict = parse_judge_verdict(out.reply->text, VerdictSource::output_judge);
  return out;
}

// p >= t_hi blocks (boundary inclusive), p <= t_lo allows, otherwise review.
inline GateAction route_by_risk(double p, const Policy& policy) {
  const auto& th = policy.config.risk_thresholds;
  if (p >= th.t_hi) return GateAction::Block;
  if (p <= th.t_lo) return GateAction::Allow;
  return GateAction::Review;
}

inline long count_tokens(std::span<const ModelReply> replies) {
  long total = 0;
  for (const auto& r : replies) total += r.total_tokens();
  return total;
}

// ---------------------------------------------------------------------------
// Single-call trailing verdict
// ---------------------------------------------------------------------------

struct SingleCallResult {
  enum class Shape { none, trailing, single_object };

  std::optional<std::string> answer;
  Verdict verdict;
  bool parse_ok = false;
  Shape shape = Shape::none;
};

namespace detail {

// Finds, starting at raw[open], the end of a balanced brace region, honoring
// JSON string/escape state. Returns npos when unbalanced.
inline std::size_t balanced_end(std::string_view raw, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < raw.size(); ++i) {
    char c = raw[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

inline bool only_whitespace(std::string_view s) {
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  return true;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

}  // namespace detail

// Locates the last balanced top-level JSON object in the completion and
// parses it as the verdict; only whitespace may follow it. Accepted shapes:
//   (a) answer text followed by a trailing {"is_safe":..., "violations":[...]}
//   (b) a single object {"response": text-or-null, "is_safe":..., "violations":[...]}
// Any parse failure, missing key, wrong type or ambiguity yields
// parse_ok=false with an unsafe verdict and no answer.
inline SingleCallResult extract_trailing_verdict(std::string_view raw) {
  SingleCallResult result;
  result.verdict = Verdict::unsafe(VerdictSource::single_call,
                                   {"unparsable_verdict"});

  // scan '{' positions right-to-left for the outermost trailing object
  std::size_t open = std::string_view::npos;
  std::size_t close = std::string_view::npos;
  for (std::size_t i = raw.size(); i-- > 0;) {
    if (raw[i] != '{') continue;
    std::size_t end = detail::balanced_end(raw, i);
    if (end == std::string_view::npos) continue;
    if (!detail::only_whitespace(raw.substr(end + 1))) continue;
    open = i;
    close = end;
    // keep scanning left: an enclosing object that also ends the string wins
  }
  if (open == std::string_view::npos) return result;

  json doc = json::parse(raw.substr(open, close - open + 1), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return result;
  if (!doc.contains("is_safe") || !doc["is_safe"].is_boolean()) return result;
  bool is_safe = doc["is_safe"].get<bool>();
  std::vector<std::string> violations;
  if (!doc.contains("violations") ||
      !detail::string_array(doc["violations"], violations))
    return result;
  if (is_safe && !violations.empty()) return result;

  std::optional<double> risk;
  if (doc.contains("confidence") && doc["confidence"].is_number()) {
    double c = doc["confidence"].get<double>();
    if (c >= 0.0 && c <= 1.0) risk = c;
  }

  std::string_view preceding = detail::trim(raw.substr(0, open));
  std::optional<std::string> answer;
  if (!preceding.empty()) {
    // shape (a); a response key here would mean two candidate answers
    if (doc.contains("response")) return result;
    result.shape = SingleCallResult::Shape::trailing;
    answer = std::string(preceding);
  } else if (doc.contains("response")) {
    if (doc["response"].is_string()) {
      answer = doc["response"].get<std::string>();
    } else if (!doc["response"].is_null()) {
      return result;
    }
    result.shape = SingleCallResult::Shape::single_object;
  } else {
    result.shape = SingleCallResult::Shape::trailing;
    answer = std::string();
  }

  result.parse_ok = true;
  result.verdict = is_safe
                       ? Verdict::safe(VerdictSource::single_call, risk)
                       : Verdict::unsafe(VerdictSource::single_call,
                                         std::move(violations), risk);
  // an unsafe verdict never carries a deliverable answer
  result.answer = is_safe ? std::move(answer) : std::nullopt;
  return result;
}

}  // namespace redline
