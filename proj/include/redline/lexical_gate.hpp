#pragma once

// Deterministic pre-generation fast path: normalize the user text, match it
// against the denylist and crisis lexicons, and route. Never fails open — a
// matcher fault yields Block with violation "gate_error".

#include <functional>
#include <regex>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "redline/normalize.hpp"
#include "redline/policy.hpp"
#include "redline/types.hpp"

namespace redline {

struct InputScan {
  GateDecision decision;
  std::vector<MatchSpan> spans;
  std::string normalized;
};

namespace detail {

inline void match_family(const CompiledFamily& fam, const std::string& text,
                         std::vector<MatchSpan>& out) {
  for (std::size_t pi = 0; pi < fam.compiled.size(); ++pi) {
    auto begin = std::sregex_iterator(text.begin(), text.end(), fam.compiled[pi]);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
      MatchSpan span;
      span.family = fam.name;
      span.pattern_index = static_cast<int>(pi);
      span.start = static_cast<std::size_t>(it->position());
      span.end = span.start + static_cast<std::size_t>(it->length());
      if (span.start >= span.end) continue;  // skip degenerate empty matches
      span.surface = text.substr(span.start, span.end - span.start);
      out.push_back(std::move(span));
    }
  }
}

inline std::vector<std::string> family_names(const std::vector<MatchSpan>& spans) {
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (const auto& s : spans)
    if (seen.insert(s.family).second) names.push_back(s.family);
  return names;
}

}  // namespace detail

// Matches every family applicable to the requested side against normalized
// text. Crisis patterns report under the pseudo-family "crisis".
inline std::vector<MatchSpan> match_families(const std::string& normalized,
                                             const Policy& policy,
                                             bool include_output_scope) {
  std::vector<MatchSpan> spans;
  for (const auto& fam : policy.families) {
    if (!include_output_scope && fam.scope == FamilyScope::output) continue;
    detail::match_family(fam, normalized, spans);
  }
  detail::match_family(policy.crisis, normalized, spans);
  return spans;
}

using Matcher = std::function<std::vector<MatchSpan>(
    const std::string& normalized, const Policy& policy)>;

// Test seam: scan with a caller-supplied matcher so fault paths can be driven.
inline InputScan scan_input_with(std::string_view text, const Policy& policy,
                                 const Matcher& matcher) {
  InputScan result;
  result.normalized = normalize(text);
  std::vector<MatchSpan> spans;
  try {
    spans = matcher(result.normalized, policy);
  } catch (...) {
    // fail closed: a matcher fault never allows the turn through
    result.decision.action = GateAction::Block;
    result.decision.reasons.push_back(
        Verdict::unsafe(VerdictSource::lexical_gate, {"gate_error"}));
    return result;
  }

  std::vector<MatchSpan> crisis_spans, deny_spans;
  for (auto& s : spans)
    (s.family == "crisis" ? crisis_spans : deny_spans).push_back(s);

  result.spans = std::move(spans);
  if (!crisis_spans.empty()) {
    // crisis precedence: escalate even when redline matches coexist
    result.decision.action = GateAction::Review;
    result.decision.reasons.push_back(
        Verdict::unsafe(VerdictSource::lexical_gate, {"crisis"}));
    if (!deny_spans.empty())
      result.decision.reasons.push_back(Verdict::unsafe(
          VerdictSource::lexical_gate, detail::family_names(deny_spans)));
  } else if (!deny_spans.empty()) {
    result.decision.action = GateAction::Block;
    result.decision.reasons.push_back(Verdict::unsafe(
        VerdictSource::lexical_gate, detail::family_names(deny_spans)));
  } else {
    result.decision.action = GateAction::Allow;
    result.decision.reasons.push_back(Verdict::safe(VerdictSource::lexical_gate));
  }
  return result;
}

inline InputScan scan_input(std::string_view text, const Policy& policy) {
  return scan_input_with(text, policy, [](const std::string& n, const Policy& p) {
    return match_families(n, p, /*include_output_scope=*/false);
  });
}

}  // namespace redline
