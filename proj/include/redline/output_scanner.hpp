#pragma once

// Deterministic post-generation scan and verdict reconciliation. The scan
// runs over the same normalization as the input gate but matches the full
// family set (output families are a superset of the input families).
// reconcile() is the conjunction law: deliver only when the model verdict is
// safe AND the deterministic scan is clean; any disagreement blocks.

#include <string>
#include <string_view>
#include <vector>

#include "redline/lexical_gate.hpp"
#include "redline/policy.hpp"
#include "redline/types.hpp"

namespace redline {

inline ScanResult scan_output_with(std::string_view answer, const Policy& policy,
                                   const Matcher& matcher) {
  ScanResult result;
  std::string normalized = normalize(answer);
  std::vector<MatchSpan> spans;
  try {
    spans = matcher(normalized, policy);
  } catch (...) {
    result.clean = false;
    result.features["scanner_error"] = 1;
    return result;
  }
  result.hits = std::move(spans);
  result.clean = result.hits.empty();
  for (const auto& s : result.hits) ++result.features[s.family + "_hits"];
  return result;
}

inline ScanResult scan_output(std::string_view answer, const Policy& policy) {
  return scan_output_with(answer, policy, [](const std::string& n, const Policy& p) {
    return match_families(n, p, /*include_output_scope=*/true);
  });
}

inline bool scan_has_crisis(const ScanResult& scan) {
  return scan.features.count("crisis_hits") > 0;
}

// Turns a scan into the verdict that represents it in a decision chain.
inline Verdict scanner_verdict(const ScanResult& scan) {
  if (scan.clean) return Verdict::safe(VerdictSource::output_scanner);
  if (scan.features.count("scanner_error"))
    return Verdict::unsafe(VerdictSource::output_scanner, {"scanner_error"});
  return Verdict::unsafe(VerdictSource::output_scanner,
                         detail::family_names(scan.hits));
}

// pre: verdict.source is output_judge or single_call; scan is from the same
// answer text. Allow only for (safe, clean); everything else blocks.
inline GateDecision reconcile(const Verdict& verdict, const ScanResult& scan) {
  GateDecision decision;
  decision.reasons.push_back(verdict);
  decision.reasons.push_back(scanner_verdict(scan));
  decision.action = (verdict.is_safe && scan.clean) ? GateAction::Allow
                                                    : GateAction::Block;
  return decision;
}

}  // namespace redline
