#pragma once

// Turn orchestration under a deployment pattern (A-F or stacked), enforcing
// fail-closed delivery, crisis escalation, streaming halt, adjudication
// caching, session risk accumulation and safe-mode/kill-switch.
//
// Delivery rule: text reaches the client only when every active check for
// the pattern returned safe/clean. Every fault path (backend down, verdict
// unparsable, matcher fault, stream fault) resolves to refusal.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "redline/audit.hpp"
#include "redline/backend.hpp"
#include "redline/digest.hpp"
#include "redline/judge.hpp"
#include "redline/lexical_gate.hpp"
#include "redline/output_scanner.hpp"
#include "redline/policy.hpp"
#include "redline/prompts.hpp"
#include "redline/types.hpp"

namespace redline {

// ---------------------------------------------------------------------------
// Deployment patterns
// ---------------------------------------------------------------------------

enum class Stage {
  SecurePrompt,  // B: refusal-first generation profile
  LexicalGate,   // C: deterministic input gate
  InputJudge,    // D: pre-generation judge
  OutputJudge,   // E: post-generation judge + scan
  SingleCall,    // F: single call with trailing verdict (subsumes generation)
};

struct DeploymentPattern {
  std::string label = "A";
  std::vector<Stage> stages;  // canonical order C, D, B, E/F

  bool has(Stage s) const {
    for (Stage t : stages)
      if (t == s) return true;
    return false;
  }

  // F needs the full buffered completion before its verdict can exist.
  bool streaming_capable() const { return !has(Stage::SingleCall); }

  // "A" or '+'-joined stage letters, e.g. "B+C+D+E", "D+E", "F".
  // Stage order in a composition is fixed (input stages, generation, output
  // stages) regardless of spelling. E and F are mutually exclusive; so are
  // B and F (F subsumes the generation call B configures).
  static DeploymentPattern parse(std::string_view spec) {
    bool b = false, c = false, d = false, e = false, f = false, a = false;
    std::string token;
    auto take = [&](std::string_view t) {
      if (t.size() != 1) throw std::invalid_argument(bad(t));
      switch (std::toupper(static_cast<unsigned char>(t[0]))) {
        case 'A': a = true; break;
        case 'B': b = true; break;
        case 'C': c = true; break;
        case 'D': d = true; break;
        case 'E': e = true; break;
        case 'F': f = true; break;
        default: throw std::invalid_argument(bad(t));
      }
    };
    std::size_t start = 0;
    std::string s(spec);
    s.erase(std::remove(s.begin(), s.end(), ' '), s.end());
    if (s.empty()) throw std::invalid_argument("empty pattern");
    while (start <= s.size()) {
      std::size_t plus = s.find('+', start);
      std::string_view t = std::string_view(s).substr(
          start, plus == std::string::npos ? std::string::npos : plus - start);
      take(t);
      if (plus == std::string::npos) break;
      start = plus + 1;
    }
    if (a && (b || c || d || e || f))
      throw std::invalid_argument("pattern A cannot be combined with stages");
    if (e && f)
      throw std::invalid_argument("patterns E and F are mutually exclusive");
    if (b && f)
      throw std::invalid_argument("patterns B and F are mutually exclusive");

    DeploymentPattern p;
    if (c) p.stages.push_back(Stage::LexicalGate);
    if (d) p.stages.push_back(Stage::InputJudge);
    if (b) p.stages.push_back(Stage::SecurePrompt);
    if (e) p.stages.push_back(Stage::OutputJudge);
    if (f) p.stages.push_back(Stage::SingleCall);
    std::string label;
    for (char ch : std::string("BCDEF")) {
      bool present = (ch == 'B' && b) || (ch == 'C' && c) || (ch == 'D' && d) ||
                     (ch == 'E' && e) || (ch == 'F' && f);
      if (!present) continue;
      if (!label.empty()) label += '+';
      label += ch;
    }
    p.label = label.empty() ? "A" : label;
    return p;
  }

 private:
  static std::string bad(std::string_view t) {
    return "unknown pattern token '" + std::string(t) + "'";
  }
};

// ---------------------------------------------------------------------------
// Session state
// ---------------------------------------------------------------------------

struct SessionState {
  std::string session_id;
  long turns = 0;  // all turns, including safe-mode short-circuits
  unsigned flagged_turns = 0;
  bool escalated = false;
  bool safe_mode = false;
  std::vector<std::pair<long, GateAction>> history_digest;  // (ordinal, action)
};

// ---------------------------------------------------------------------------
// Adjudication cache (output-judge verdicts keyed by answer digest)
// ---------------------------------------------------------------------------

class AdjudicationCache {
 public:
  std::optional<Verdict> get(const std::string& digest) {
    std::lock_guard lock(mu_);
    auto it = map_.find(digest);
    if (it == map_.end()) return std::nullopt;
    ++hits_;
    return it->second;
  }

  void put(const std::string& digest, const Verdict& verdict) {
    std::lock_guard lock(mu_);
    map_.insert_or_assign(digest, verdict);
  }

  long hits() const { return hits_.load(); }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return map_.size();
  }

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, Verdict> map_;
  std::atomic<long> hits_{0};
};

// ---------------------------------------------------------------------------
// Turn results
// ---------------------------------------------------------------------------

struct TurnMetrics {
  double wall_time_ms = 0.0;
  long backend_latency_ms = 0;  // sum of per-reply latencies (declared, for the mock)
  long tokens = 0;
  int backend_calls = 0;
};

struct TurnResult {
  TurnOutcome outcome;
  TurnMetrics metrics;
  std::vector<StageDecision> decisions;
  ScanResult output_scan;
  std::string pattern;
};

struct EngineOptions {
  bool cache_enabled = true;
  std::string audit_path;  // empty disables the sink
  std::size_t audit_max_bytes = 8 * 1024 * 1024;
  bool redact_inputs = true;
};

struct EngineMetrics {
  long turns = 0;
  long delivered = 0;
  long refused = 0;
  long escalated = 0;
  long safe_mode_hits = 0;
  long fail_closed_events = 0;
  long cache_hits = 0;
  long audit_failures = 0;
};

enum class SafeModeScope { global, session };

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

class Engine {
 public:
  Engine(Policy policy, std::shared_ptr<ModelBackend> backend,
         EngineOptions options = {})
      : backend_(std::move(backend)), options_(options) {
    policy_ = std::make_shared<const Policy>(std::move(policy));
    if (!options_.audit_path.empty())
      audit_ = std::make_unique<AuditLog>(options_.audit_path,
                                          options_.audit_max_bytes);
    std::random_device rd;
    id_prefix_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  }

  PolicyPtr policy() const {
    std::lock_guard lock(policy_mu_);
    return policy_;
  }

  // Atomic snapshot swap; in-flight turns finish on the old snapshot.
  void reload_policy(Policy policy) {
    auto next = std::make_shared<const Policy>(std::move(policy));
    std::lock_guard lock(policy_mu_);
    policy_ = std::move(next);
  }

  TurnResult process_turn(const std::string& session_id,
                          std::string_view user_text,
                          const DeploymentPattern& pattern) {
    return run_turn(session_id, user_text, pattern, nullptr);
  }

  // Streaming variant: chunks are delivered through on_chunk only after the
  // rolling buffer that includes them scans clean; the first dirty scan
  // halts the stream and nothing at or after it is emitted.
  TurnResult process_stream(const std::string& session_id,
                            std::string_view user_text,
                            const DeploymentPattern& pattern,
                            const std::function<void(std::string_view)>& on_chunk) {
    if (!pattern.streaming_capable())
      throw std::invalid_argument(
          "pattern " + pattern.label + " requires full buffering and cannot stream");
    return run_turn(session_id, user_text, pattern, &on_chunk);
  }

  // Administrative containment. Callers are trusted here; the gateway layer
  // enforces the admin token. The reason lands in the audit sink.
  void trigger_safe_mode(SafeModeScope scope, std::string_view session_id,
                         std::string_view reason) {
    set_safe_mode(scope, session_id, reason, true);
  }

  void reset_safe_mode(SafeModeScope scope, std::string_view session_id,
                       std::string_view reason) {
    set_safe_mode(scope, session_id, reason, false);
  }

  bool global_safe_mode() const { return global_safe_mode_.load(); }

  SessionState session_state(const std::string& session_id) const {
    std::lock_guard lock(sessions_mu_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) {
      SessionState fresh;
      fresh.session_id = session_id;
      return fresh;
    }
    std::lock_guard slock(it->second->mu);
    return it->second->state;
  }

  EngineMetrics metrics() const {
    EngineMetrics m;
    m.turns = turns_.load();
    m.delivered = delivered_.load();
    m.refused = refused_.load();
    m.escalated = escalated_.load();
    m.safe_mode_hits = safe_mode_hits_.load();
    m.fail_closed_events = fail_closed_.load();
    m.cache_hits = cache_.hits();
    m.audit_failures = audit_ ? audit_->failures() : 0;
    return m;
  }

  AuditLog* audit() { return audit_.get(); }

 private:
  struct Session {
    std::mutex mu;
    SessionState state;
  };

  struct TurnCtx {
    std::vector<ModelReply> replies;
    std::vector<StageDecision> decisions;
    ScanResult output_scan;
    OutcomeKind kind = OutcomeKind::Refused;
    std::string text;
    std::vector<std::string> violations;
    bool done = false;
  };

  std::shared_ptr<Session> session(const std::string& id) {
    std::lock_guard lock(sessions_mu_);
    auto& slot = sessions_[id];
    if (!slot) {
      slot = std::make_shared<Session>();
      slot->state.session_id = id;
    }
    return slot;
  }

  std::string next_audit_id() {
    std::uint64_t n = audit_seq_.fetch_add(1);
    std::ostringstream os;
    os << "t-" << std::hex << id_prefix_ << "-" << n;
    return os.str();
  }

  static bool is_generation_refusal(std::string_view text) {
    std::string n = normalize(text);
    return n.rfind("i can't help with that", 0) == 0 ||
           n.rfind("i cannot help with that", 0) == 0;
  }

  static bool cacheable(const Verdict& v) {
    for (const auto& s : v.violations)
      if (s == "unparsable_verdict" || s == "backend_unavailable") return false;
    return true;
  }

  void finish(TurnCtx& ctx, OutcomeKind kind, std::string text,
              std::vector<std::string> violations) {
    ctx.kind = kind;
    ctx.text = std::move(text);
    ctx.violations = std::move(violations);
    ctx.done = true;
  }

  TurnResult run_turn(const std::string& session_id, std::string_view user_text,
                      const DeploymentPattern& pattern,
                      const std::function<void(std::string_view)>* on_chunk) {
    PolicyPtr pol = policy();
    auto sess = session(session_id);
    std::lock_guard session_lock(sess->mu);

    auto started = std::chrono::steady_clock::now();
    TurnCtx ctx;
    long ordinal = ++sess->state.turns;

    if (global_safe_mode_.load() || sess->state.safe_mode) {
      finish(ctx, OutcomeKind::SafeMode, pol->config.safe_mode_template, {});
      return finalize(ctx, *pol, sess->state, session_id, user_text, pattern,
                      started, /*gated=*/false, ordinal);
    }

    run_stages(ctx, *pol, user_text, pattern, on_chunk);

    return finalize(ctx, *pol, sess->state, session_id, user_text, pattern,
                    started, /*gated=*/true, ordinal);
  }

  void run_stages(TurnCtx& ctx, const Policy& pol, std::string_view user_text,
                  const DeploymentPattern& pattern,
                  const std::function<void(std::string_view)>* on_chunk) {
    // Crisis precedence: the crisis lexicon is a safety floor for every
    // pattern, including the insecure baseline.
    InputScan in_scan = scan_input(user_text, pol);
    if (in_scan.decision.action == GateAction::Review) {
      for (const auto& r : in_scan.decision.reasons)
        ctx.decisions.push_back({"lexical_gate", r});
      return finish(ctx, OutcomeKind::Escalated, pol.config.escalation_template,
                    {"crisis"});
    }

    if (pattern.has(Stage::LexicalGate)) {
      const Verdict& gate = in_scan.decision.reasons.front();
      ctx.decisions.push_back({"lexical_gate", gate});
      if (in_scan.decision.action == GateAction::Block)
        return finish(ctx, OutcomeKind::Refused, pol.config.refusal_template,
                      gate.violations);
    }

    if (pattern.has(Stage::InputJudge)) {
      Judged judged;
      try {
        judged = judge_input(user_text, pol, *backend_);
      } catch (const BackendUnavailable&) {
        ctx.decisions.push_back(
            {"input_judge", Verdict::unsafe(VerdictSource::input_judge,
                                            {"backend_unavailable"})});
        return finish(ctx, OutcomeKind::Refused, pol.config.refusal_template,
                      {"backend_unavailable"});
      }
      if (judged.reply) ctx.replies.push_back(*judged.reply);
      ctx.decisions.push_back({"input_judge", judged.verdict});
      double p = judged.verdict.risk.value_or(judged.verdict.is_safe ? 0.0 : 1.0);
      switch (route_by_risk(p, pol)) {
        case GateAction::Block:
          return finish(ctx, OutcomeKind::Refused, pol.config.refusal_template,
                        judged.verdict.violations);
        case GateAction::Review:
          return finish(ctx, OutcomeKind::Escalated,
                        pol.config.escalation_template,
                        judged.verdict.violations);
        case GateAction::Allow:
          break;
      }
    }

    if (pattern.has(Stage::SingleCall))
      return run_single_call(ctx, pol, user_text);
    if (on_chunk != nullptr)
      return run_streaming_generation(ctx, pol, user_text, pattern, *on_chunk);
    return run_buffered_generation(ctx, pol, user_text, pattern);
  }

  void run_single_call(TurnCtx& ctx, const Policy& pol, std::string_view user_text) {
    ModelReply reply;
    try {
      reply = backend_->complete(user_text, profile_id(Profile::single_call));
    } catch (const BackendUnavailable&) {
      ctx.decisions.push_back(
          {"single_call", Verdict::unsafe(VerdictSource::single_call,
                                          {"backend_unavailable"})});
      return finish(ctx, OutcomeKind::Refused, pol.config.refusal_template,
                    {"backend_unavailable"});
    }
    ctx.replies.push_back(reply);
    SingleCallResult sc = extract_trailing_verdict(reply.text);
    ctx.decisions.push_back({"single_call", sc.verdict});

    // final deterministic re-scan, even when the verdict says safe
    std::string answer = sc.answer.value_or("");
    ctx.output_scan = scan_output(answer, pol);
    ctx.decisions.push_back({"output_scanner", scanner_verdict(ctx.output_scan)});
    if (scan_has_crisis(ctx.output_scan))
      return finish(ctx, OutcomeKind::Escalated, pol.config.escalation_template,
                    {"crisis"});

    GateDecision rec = reconcile(sc.verdict, ctx.output_scan);
    if (rec.action == GateAction::Allow)
      return finish(ctx, OutcomeKind::Delivered, answer, {});
    std::vector<std::string> violations = sc.verdict.violations;
    for (const auto& v : scanner_verdict(ctx.output_scan).violations)
      violations.push_back(v);
    return finish(ctx, OutcomeKind::Refused, pol.config.refusal_template,
                  violations);
  }

  void run_buffered_generation(TurnCtx& ctx, const Policy& pol,
                               std::string_view user_text,
                               const DeploymentPattern& pattern) {
    Profile profile = pattern.has(Stage::SecurePrompt)
                          ? Profile::generator_secure
                          : Profile::generator_insecure;
    ModelReply reply;
    try {
      reply = backend_->complete(user_text, profile_id(profile));
    } catch (const BackendUnavailable&) {
      return backend_down(ctx, pol, "generation");
    }
    ctx.replies.push_back(reply);
    if (is_generation_refusal(reply.text)) {
      ctx.decisions.push_back(
          {"generation", Verdict::unsafe(VerdictSource::output_scanner,
                                         {"generation_refusal"})});
      return finish(ctx, OutcomeKind::Refused, pol.config.refusal_template,
                    {"generation_refusal"});
    }
    if (!pattern.has(Stage::OutputJudge))
      return finish(ctx, OutcomeKind::Delivered, reply.text, {});
    return run_output_checks(ctx, pol, reply.text);
  }

  void run_streaming_generation(TurnCtx& ctx, const Policy& pol,
                                std::string_view user_text,
                                const DeploymentPattern& pattern,
                                const std::function<void(std::string_view)>& on_chunk) {
    Profile profile = pattern.has(Stage::SecurePrompt)
                          ? Profile::generator_secure
                          : Profile::generator_insecure;
    std::string buffer;
    bool halted = false;
    ScanResult halt_scan;
    ModelReply reply;
    try {
      reply = backend_->stream(
          user_text, profile_id(profile), [&](std::string_view chunk) {
            buffer += chunk;
            ScanResult scan = scan_output(buffer, pol);
            if (!scan.clean) {
              halt_scan = std::move(scan);
              halted = true;
              return false;  // suppress this chunk and everything after it
            }
            on_chunk(chunk);
            return true;
          });
    } catch (const StreamFault&) {
      ctx.decisions.push_back(
          {"output_scanner", Verdict::unsafe(VerdictSource::output_scanner,
                                             {"stream_fault"})});
      return finish(ctx, OutcomeKind::Refused, pol.config.refusal_template,
                    {"stream_fault"});
    } catch (const BackendUnavailable&) {
      return backend_down(ctx, pol, "generation");
    }
    ctx.replies.push_back(reply);

    if (halted) {
      ctx.output_scan = halt_scan;
      Verdict v = scanner_verdict(halt_scan);
      ctx.decisions.push_back({"output_scanner", v});
      if (scan_has_crisis(halt_scan))
        return finish(ctx, OutcomeKind::Escalated, pol.config.escalation_template,
                      {"crisis"});
      return finish(ctx, OutcomeKind::Refused, pol.config.refusal_template,
                    v.violations);
    }

    if (is_generation_refusal(buffer)) {
      ctx.decisions.push_back(
          {"generation", Verdict::unsafe(VerdictSource::output_scanner,
                                         {"generation_refusal"})});
      return finish(ctx, OutcomeKind::Refused, pol.config.refusal_template,
                    {"generation_refusal"});
    }
    if (!pattern.has(Stage::OutputJudge))
      return finish(ctx, OutcomeKind::Delivered, buffer, {});
    return run_output_checks(ctx, pol, buffer);
  }

  // Pattern E terminal checks: judge and deterministic scan evaluated
  // concurrently, reconciled fail-closed. Cached adjudications skip the
  // judge call but never the scan.
  void run_output_checks(TurnCtx& ctx, const Policy& pol, const std::string& answer) {
    std::string digest = sha256_hex(answer);
    std::optional<Verdict> cached;
    if (options_.cache_enabled) cached = cache_.get(digest);

    Verdict verdict;
    if (cached) {
      verdict = *cached;
      ctx.output_scan = scan_output(answer, pol);
    } else {
      auto judge_future = std::async(std::launch::async, [&] {
        return judge_output(answer, pol, *backend_);
      });
      ctx.output_scan = scan_output(answer, pol);
      Judged judged;
      try {
        judged = judge_future.get();
      } catch (const BackendUnavailable&) {
        ctx.decisions.push_back(
            {"output_judge", Verdict::unsafe(VerdictSource::output_judge,
                                             {"backend_unavailable"})});
        return finish(ctx, OutcomeKind::Refused, pol.config.refusal_template,
                      {"backend_unavailable"});
      }
      if (judged.reply) ctx.replies.push_back(*judged.reply);
      verdict = judged.verdict;
      if (options_.cache_enabled && cacheable(verdict))
        cache_.put(digest, verdict);
    }

    ctx.decisions.push_back({"output_judge", verdict});
    ctx.decisions.push_back({"output_scanner", scanner_verdict(ctx.output_scan)});
    if (scan_has_crisis(ctx.output_scan))
      return finish(ctx, OutcomeKind::Escalated, pol.config.escalation_template,
                    {"crisis"});

    GateDecision rec = reconcile(verdict, ctx.output_scan);
    if (rec.action == GateAction::Allow)
      return finish(ctx, OutcomeKind::Delivered, answer, {});
    std::vector<std::string> violations = verdict.violations;
    for (const auto& v : scanner_verdict(ctx.output_scan).violations)
      violations.push_back(v);
    return finish(ctx, OutcomeKind::Refused, pol.config.refusal_template,
                  violations);
  }

  void backend_down(TurnCtx& ctx, const Policy& pol, const std::string& stage) {
    ctx.decisions.push_back(
        {stage, Verdict::unsafe(VerdictSource::output_scanner,
                                {"backend_unavailable"})});
    finish(ctx, OutcomeKind::Refused, pol.config.refusal_template,
           {"backend_unavailable"});
  }

  TurnResult finalize(TurnCtx& ctx, const Policy& pol, SessionState& state,
                      const std::string& session_id, std::string_view user_text,
                      const DeploymentPattern& pattern,
                      std::chrono::steady_clock::time_point started, bool gated,
                      long ordinal) {
    TurnResult result;
    result.pattern = pattern.label;
    result.decisions = ctx.decisions;
    result.output_scan = ctx.output_scan;
    result.outcome.kind = ctx.kind;
    result.outcome.text = ctx.text;
    result.outcome.violations = ctx.violations;
    result.outcome.audit_id = next_audit_id();

    if (gated) {
      GateAction action = GateAction::Allow;
      if (ctx.kind == OutcomeKind::Refused) action = GateAction::Block;
      if (ctx.kind == OutcomeKind::Escalated) action = GateAction::Review;
      state.history_digest.emplace_back(ordinal, action);
      if (action != GateAction::Allow) {
        ++state.flagged_turns;
        if (action == GateAction::Review) state.escalated = true;
        if (pol.config.session_risk_limit > 0 &&
            state.flagged_turns >= pol.config.session_risk_limit)
          state.safe_mode = true;
      }
    }

    result.metrics.tokens = count_tokens(ctx.replies);
    result.metrics.backend_calls = static_cast<int>(ctx.replies.size());
    for (const auto& r : ctx.replies)
      result.metrics.backend_latency_ms += r.latency.count();
    result.metrics.wall_time_ms =
        std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - started)
            .count();

    ++turns_;
    switch (ctx.kind) {
      case OutcomeKind::Delivered: ++delivered_; break;
      case OutcomeKind::Refused: ++refused_; break;
      case OutcomeKind::Escalated: ++escalated_; break;
      case OutcomeKind::SafeMode: ++safe_mode_hits_; break;
    }
    bool fail_closed = false;
    for (const auto& d : ctx.decisions)
      for (const auto& v : d.verdict.violations)
        if (is_fail_closed_marker(v)) fail_closed = true;
    if (fail_closed) ++fail_closed_;

    if (audit_) {
      InteractionRecord record;
      record.audit_id = result.outcome.audit_id;
      record.timestamp = utc_timestamp();
      record.session_id = session_id;
      record.pattern = pattern.label;
      record.input_digest = sha256_hex(user_text);
      record.decisions = ctx.decisions;
      record.features = ctx.output_scan.features;
      record.outcome = ctx.kind;
      record.tokens = result.metrics.tokens;
      record.wall_time_ms = result.metrics.wall_time_ms;
      record.policy_version = pol.config.policy_version;
      record.redacted = options_.redact_inputs;
      if (!options_.redact_inputs) record.input_text = std::string(user_text);
      audit_->append(record);  // sink failure surfaces as a metric only
    }
    return result;
  }

  void set_safe_mode(SafeModeScope scope, std::string_view session_id,
                     std::string_view reason, bool value) {
    if (scope == SafeModeScope::global) {
      global_safe_mode_.store(value);
    } else {
      auto sess = session(std::string(session_id));
      std::lock_guard lock(sess->mu);
      sess->state.safe_mode = value;
    }
    if (audit_) {
      auto pol = policy();
      audit_->append_admin(next_audit_id(),
                           scope == SafeModeScope::global
                               ? "global"
                               : std::string(session_id),
                           value ? "killswitch" : "reset", reason,
                           pol->config.policy_version);
    }
  }

  std::shared_ptr<ModelBackend> backend_;
  EngineOptions options_;

  mutable std::mutex policy_mu_;
  PolicyPtr policy_;

  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;

  AdjudicationCache cache_;
  std::unique_ptr<AuditLog> audit_;

  std::atomic<bool> global_safe_mode_{false};
  std::atomic<std::uint64_t> audit_seq_{0};
  std::uint64_t id_prefix_ = 0;

  std::atomic<long> turns_{0};
  std::atomic<long> delivered_{0};
  std::atomic<long> refused_{0};
  std::atomic<long> escalated_{0};
  std::atomic<long> safe_mode_hits_{0};
  std::atomic<long> fail_closed_{0};
};

}  // namespace redline
