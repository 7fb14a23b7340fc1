#pragma once

// Core domain types shared by every layer: safety verdicts, gate decisions,
// match spans, scan results and turn outcomes.

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace redline {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Verdicts
// ---------------------------------------------------------------------------

enum class VerdictSource {
  lexical_gate,
  input_judge,
  output_judge,
  single_call,
  output_scanner,
};

inline std::string_view to_string(VerdictSource s) {
  switch (s) {
    case VerdictSource::lexical_gate: return "lexical_gate";
    case VerdictSource::input_judge: return "input_judge";
    case VerdictSource::output_judge: return "output_judge";
    case VerdictSource::single_call: return "single_call";
    case VerdictSource::output_scanner: return "output_scanner";
  }
  return "unknown";
}

// A single safety judgment. Invariants: is_safe implies violations empty;
// risk, when present, lies in [0,1].
struct Verdict {
  bool is_safe = false;
  std::vector<std::string> violations;
  std::optional<double> risk;
  VerdictSource source = VerdictSource::lexical_gate;

  static Verdict safe(VerdictSource src, std::optional<double> risk = {}) {
    Verdict v;
    v.is_safe = true;
    v.risk = risk;
    v.source = src;
    return v;
  }

  static Verdict unsafe(VerdictSource src, std::vector<std::string> violations,
                        std::optional<double> risk = {}) {
    Verdict v;
    v.is_safe = false;
    v.violations = std::move(violations);
    v.risk = risk;
    v.source = src;
    return v;
  }

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

inline json to_json(const Verdict& v) {
  json j{{"is_safe", v.is_safe},
         {"violations", v.violations},
         {"source", to_string(v.source)}};
  if (v.risk) j["risk"] = *v.risk;
  return j;
}

// ---------------------------------------------------------------------------
// Gate decisions
// ---------------------------------------------------------------------------

// Ordered: Allow < Review < Block (risk routing is monotone in this order).
enum class GateAction { Allow = 0, Review = 1, Block = 2 };

inline std::string_view to_string(GateAction a) {
  switch (a) {
    case GateAction::Allow: return "allow";
    case GateAction::Review: return "review";
    case GateAction::Block: return "block";
  }
  return "unknown";
}

// Invariant: action Block or Review implies reasons non-empty.
struct GateDecision {
  GateAction action = GateAction::Allow;
  std::vector<Verdict> reasons;

  friend bool operator==(const GateDecision&, const GateDecision&) = default;
};

// ---------------------------------------------------------------------------
// Lexical matching
// ---------------------------------------------------------------------------

// One regex hit, with offsets into the *normalized* text.
// Invariant: 0 <= start < end <= normalized length; surface == slice.
struct MatchSpan {
  std::string family;
  int pattern_index = 0;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;

  friend bool operator==(const MatchSpan&, const MatchSpan&) = default;
};

inline json to_json(const MatchSpan& m) {
  return json{{"family", m.family},
              {"pattern_index", m.pattern_index},
              {"start", m.start},
              {"end", m.end},
              {"surface", m.surface}};
}

// Deterministic output scan. clean == hits.empty() except on an internal
// scanner fault, which reports clean=false with a "scanner_error" feature.
struct ScanResult {
  bool clean = true;
  std::vector<MatchSpan> hits;
  std::map<std::string, int> features;
};

// ---------------------------------------------------------------------------
// Turn outcomes
// ---------------------------------------------------------------------------

enum class OutcomeKind { Delivered, Refused, Escalated, SafeMode };

inline std::string_view to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Delivered: return "delivered";
    case OutcomeKind::Refused: return "refused";
    case OutcomeKind::Escalated: return "escalated";
    case OutcomeKind::SafeMode: return "safe_mode";
  }
  return "unknown";
}

inline std::optional<OutcomeKind> outcome_from_string(std::string_view s) {
  if (s == "delivered") return OutcomeKind::Delivered;
  if (s == "refused") return OutcomeKind::Refused;
  if (s == "escalated") return OutcomeKind::Escalated;
  if (s == "safe_mode") return OutcomeKind::SafeMode;
  return std::nullopt;
}

// What the client receives. kind=Delivered only when every active check for
// the pattern returned safe/clean; Refused/Escalated/SafeMode text is the
// corresponding policy template.
struct TurnOutcome {
  OutcomeKind kind = OutcomeKind::Refused;
  std::string text;
  std::string audit_id;
  std::vector<std::string> violations;
};

}  // namespace redline
