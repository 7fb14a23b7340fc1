#pragma once

// Policy configuration: the redline pattern families, crisis lexicon, risk
// thresholds and response templates every other module consumes. A policy is
// validated and compiled once at load; afterwards it is immutable and safe to
// share across threads. Reload means swapping the whole snapshot.

#include <algorithm>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "redline/types.hpp"

namespace redline {

// The three canonical input redlines. A policy that does not carry all three
// verbatim is rejected at load: these are the non-negotiable core.
inline constexpr std::string_view kCorePatterns[3] = {
    R"(\b(lose|cut)\s+weight\b)",
    R"(\b(deficit|restrict|weigh[- ]?in|skinfold|BMI)\b)",
    R"(\b\d{2,4}\s*(k?cal|calories)\b)",
};

enum class Severity { redline, covert, numeric, crisis };

inline std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::redline: return "redline";
    case Severity::covert: return "covert";
    case Severity::numeric: return "numeric";
    case Severity::crisis: return "crisis";
  }
  return "unknown";
}

inline std::optional<Severity> severity_from_string(std::string_view s) {
  if (s == "redline") return Severity::redline;
  if (s == "covert") return Severity::covert;
  if (s == "numeric") return Severity::numeric;
  if (s == "crisis") return Severity::crisis;
  return std::nullopt;
}

// Input scanning uses scope=both families; output scanning uses both+output.
enum class FamilyScope { both, output };

inline std::string_view to_string(FamilyScope s) {
  return s == FamilyScope::both ? "both" : "output";
}

struct PatternFamily {
  std::string name;
  std::vector<std::string> patterns;
  Severity severity = Severity::redline;
  FamilyScope scope = FamilyScope::both;

  friend bool operator==(const PatternFamily&, const PatternFamily&) = default;
};

struct Thresholds {
  double t_lo = 0.2;
  double t_hi = 0.8;

  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

struct PolicyConfig {
  std::string policy_version;
  Thresholds risk_thresholds;
  std::vector<PatternFamily> denylist_patterns;
  std::vector<std::string> crisis_patterns;
  std::string refusal_template;
  std::string escalation_template;
  std::string safe_mode_template;
  unsigned session_risk_limit = 3;

  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

// ---------------------------------------------------------------------------
// Load errors
// ---------------------------------------------------------------------------

class PolicyError : public std::runtime_error {
 public:
  enum class Code {
    malformed_document,
    invalid_pattern,
    invalid_thresholds,
    invalid_policy,
  };

  PolicyError(Code code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}

  Code code() const { return code_; }

  // set for invalid_pattern
  std::string family;
  int pattern_index = -1;

 private:
  Code code_;
};

inline PolicyError invalid_pattern_error(std::string family, int index,
                                         const std::string& why) {
  PolicyError e(PolicyError::Code::invalid_pattern,
                "invalid pattern in family '" + family + "' at index " +
                    std::to_string(index) + ": " + why);
  e.family = std::move(family);
  e.pattern_index = index;
  return e;
}

// ---------------------------------------------------------------------------
// Compiled policy
// ---------------------------------------------------------------------------

struct CompiledFamily {
  std::string name;
  Severity severity = Severity::redline;
  FamilyScope scope = FamilyScope::both;
  std::vector<std::regex> compiled;
};

// Immutable after load_policy; share via shared_ptr<const Policy>.
struct Policy {
  PolicyConfig config;
  std::vector<CompiledFamily> families;  // config order
  CompiledFamily crisis;                 // pseudo-family "crisis"
};

using PolicyPtr = std::shared_ptr<const Policy>;

namespace detail {

inline std::regex compile_pattern(const std::string& family, int index,
                                  const std::string& pattern) {
  try {
    return std::regex(pattern,
                      std::regex::ECMAScript | std::regex::icase |
                          std::regex::optimize);
  } catch (const std::regex_error& e) {
    throw invalid_pattern_error(family, index, e.what());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// load / serialize
// ---------------------------------------------------------------------------

inline Policy load_policy(const json& doc) {
  auto malformed = [](const std::string& why) {
    return PolicyError(PolicyError::Code::malformed_document,
                       "malformed policy document: " + why);
  };

  if (!doc.is_object()) throw malformed("top level is not an object");

  PolicyConfig cfg;
  if (!doc.contains("version") || !doc["version"].is_string())
    throw malformed("missing string field 'version'");
  cfg.policy_version = doc["version"].get<std::string>();

  if (doc.contains("thresholds")) {
    const auto& t = doc["thresholds"];
    if (!t.is_object()) throw malformed("'thresholds' is not an object");
    if (t.contains("t_lo")) {
      if (!t["t_lo"].is_number()) throw malformed("'t_lo' is not a number");
      cfg.risk_thresholds.t_lo = t["t_lo"].get<double>();
    }
    if (t.contains("t_hi")) {
      if (!t["t_hi"].is_number()) throw malformed("'t_hi' is not a number");
      cfg.risk_thresholds.t_hi = t["t_hi"].get<double>();
    }
  }
  const auto& th = cfg.risk_thresholds;
  if (!(th.t_lo >= 0.0 && th.t_lo < th.t_hi && th.t_hi <= 1.0)) {
    std::ostringstream os;
    os << "invalid thresholds: require 0 <= t_lo < t_hi <= 1, got t_lo="
       << th.t_lo << " t_hi=" << th.t_hi;
    throw PolicyError(PolicyError::Code::invalid_thresholds, os.str());
  }

  if (!doc.contains("families") || !doc["families"].is_array())
    throw malformed("missing array field 'families'");
  std::set<std::string> names;
  for (const auto& f : doc["families"]) {
    if (!f.is_object()) throw malformed("family entry is not an object");
    PatternFamily fam;
    if (!f.contains("name") || !f["name"].is_string())
      throw malformed("family missing string field 'name'");
    fam.name = f["name"].get<std::string>();
    if (!names.insert(fam.name).second)
      throw PolicyError(PolicyError::Code::invalid_policy,
                        "duplicate family name '" + fam.name + "'");
    if (!f.contains("severity") || !f["severity"].is_string())
      throw malformed("family '" + fam.name + "' missing 'severity'");
    auto sev = severity_from_string(f["severity"].get<std::string>());
    if (!sev)
      throw malformed("family '" + fam.name + "' has unknown severity '" +
                      f["severity"].get<std::string>() + "'");
    fam.severity = *sev;
    if (f.contains("scope")) {
      std::string sc = f["scope"].get<std::string>();
      if (sc == "both") fam.scope = FamilyScope::both;
      else if (sc == "output") fam.scope = FamilyScope::output;
      else throw malformed("family '" + fam.name + "' has unknown scope '" + sc + "'");
    }
    if (!f.contains("patterns") || !f["patterns"].is_array() ||
        f["patterns"].empty())
      throw PolicyError(PolicyError::Code::invalid_policy,
                        "family '" + fam.name + "' has no patterns");
    for (const auto& p : f["patterns"]) {
      if (!p.is_string())
        throw malformed("family '" + fam.name + "' has a non-string pattern");
      fam.patterns.push_back(p.get<std::string>());
    }
    cfg.denylist_patterns.push_back(std::move(fam));
  }

  if (doc.contains("crisis")) {
    if (!doc["crisis"].is_array()) throw malformed("'crisis' is not an array");
    for (const auto& p : doc["crisis"]) {
      if (!p.is_string()) throw malformed("crisis entry is not a string");
      cfg.crisis_patterns.push_back(p.get<std::string>());
    }
  }

  if (!doc.contains("templates") || !doc["templates"].is_object())
    throw malformed("missing object field 'templates'");
  const auto& tpl = doc["templates"];
  for (const char* key : {"refusal", "escalation", "safe_mode"}) {
    if (!tpl.contains(key) || !tpl[key].is_string())
      throw malformed(std::string("templates missing string field '") + key + "'");
  }
  cfg.refusal_template = tpl["refusal"].get<std::string>();
  cfg.escalation_template = tpl["escalation"].get<std::string>();
  cfg.safe_mode_template = tpl["safe_mode"].get<std::string>();
  if (cfg.refusal_template.empty() || cfg.escalation_template.empty() ||
      cfg.safe_mode_template.empty())
    throw PolicyError(PolicyError::Code::invalid_policy,
                      "templates must be non-empty");

  if (doc.contains("session_risk_limit")) {
    if (!doc["session_risk_limit"].is_number_integer() ||
        doc["session_risk_limit"].get<long>() < 0)
      throw malformed("'session_risk_limit' is not a non-negative integer");
    cfg.session_risk_limit = doc["session_risk_limit"].get<unsigned>();
  }

  // core redlines must be present verbatim
  for (std::string_view core : kCorePatterns) {
    bool found = false;
    for (const auto& fam : cfg.denylist_patterns)
      for (const auto& p : fam.patterns)
        if (p == core) found = true;
    if (!found)
      throw PolicyError(PolicyError::Code::invalid_policy,
                        "policy is missing core redline pattern: " +
                            std::string(core));
  }

  // compile everything; any failure rejects the whole document
  Policy policy;
  for (const auto& fam : cfg.denylist_patterns) {
    CompiledFamily cf;
    cf.name = fam.name;
    cf.severity = fam.severity;
    cf.scope = fam.scope;
    for (std::size_t i = 0; i < fam.patterns.size(); ++i)
      cf.compiled.push_back(
          detail::compile_pattern(fam.name, static_cast<int>(i), fam.patterns[i]));
    policy.families.push_back(std::move(cf));
  }
  policy.crisis.name = "crisis";
  policy.crisis.severity = Severity::crisis;
  for (std::size_t i = 0; i < cfg.crisis_patterns.size(); ++i)
    policy.crisis.compiled.push_back(
        detail::compile_pattern("crisis", static_cast<int>(i), cfg.crisis_patterns[i]));

  policy.config = std::move(cfg);
  return policy;
}

inline Policy load_policy(std::string_view text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded())
    throw PolicyError(PolicyError::Code::malformed_document,
                      "malformed policy document: not valid JSON");
  return load_policy(doc);
}

inline Policy load_policy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw PolicyError(PolicyError::Code::malformed_document,
                      "cannot read policy file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_policy(std::string_view(buf.str()));
}

inline json to_json(const PolicyConfig& cfg) {
  json families = json::array();
  for (const auto& f : cfg.denylist_patterns) {
    families.push_back(json{{"name", f.name},
                            {"severity", std::string(to_string(f.severity))},
                            {"scope", std::string(to_string(f.scope))},
                            {"patterns", f.patterns}});
  }
  return json{
      {"version", cfg.policy_version},
      {"thresholds", {{"t_lo", cfg.risk_thresholds.t_lo},
                      {"t_hi", cfg.risk_thresholds.t_hi}}},
      {"families", families},
      {"crisis", cfg.crisis_patterns},
      {"templates", {{"refusal", cfg.refusal_template},
                     {"escalation", cfg.escalation_template},
                     {"safe_mode", cfg.safe_mode_template}}},
      {"session_risk_limit", cfg.session_risk_limit}};
}

// ---------------------------------------------------------------------------
// Lint (non-fatal findings)
// ---------------------------------------------------------------------------

struct PolicyWarning {
  std::string code;
  std::string message;
};

inline std::vector<PolicyWarning> validate_policy(const PolicyConfig& cfg) {
  std::vector<PolicyWarning> out;

  // duplicate pattern strings anywhere in the denylist
  std::map<std::string, int> seen;
  for (const auto& fam : cfg.denylist_patterns)
    for (const auto& p : fam.patterns) ++seen[p];
  for (const auto& [pattern, count] : seen) {
    if (count > 1)
      out.push_back({"duplicate_pattern",
                     "pattern '" + pattern + "' appears " +
                         std::to_string(count) + " times"});
  }

  // a family whose every pattern already occurs in an earlier family never
  // adds a distinct signal
  std::set<std::string> earlier;
  for (const auto& fam : cfg.denylist_patterns) {
    bool shadowed = !fam.patterns.empty();
    for (const auto& p : fam.patterns)
      if (!earlier.count(p)) shadowed = false;
    if (shadowed)
      out.push_back({"shadowed_family",
                     "family '" + fam.name + "' is shadowed by earlier families"});
    for (const auto& p : fam.patterns) earlier.insert(p);
  }

  if (cfg.crisis_patterns.empty())
    out.push_back({"no_crisis_coverage", "no crisis escalation coverage"});

  if (cfg.session_risk_limit == 0)
    out.push_back({"session_risk_disabled",
                   "session_risk_limit is 0: session risk accumulation disabled"});

  return out;
}

}  // namespace redline
