#include <catch2/catch_amalgamated.hpp>

#include <memory>

#include "redline/pipeline.hpp"
#include "support/policies.hpp"

using namespace redline;
using nlohmann::json;

namespace {

std::shared_ptr<MockBackend> pipeline_mock() {
  static const char* script = R"({
    "name": "pipeline-mock",
    "rules": [
      {"profile": "generator-insecure", "contains_any": ["refuse me"],
       "reply": {"text": "I can't help with that.", "prompt_tokens": 40, "completion_tokens": 12, "latency_ms": 100}},
      {"profile": "generator-secure", "contains_any": ["diet", "weight", "refuse me"],
       "reply": {"text": "I can't help with that. I'm here for supportive, body-neutral help.", "prompt_tokens": 120, "completion_tokens": 20, "latency_ms": 110}},
      {"profile": "generator-insecure", "contains_any": ["subtle harm"],
       "reply": {"text": "Weekly weigh-ins will keep you on track.", "prompt_tokens": 40, "completion_tokens": 30, "latency_ms": 250}},
      {"profile": "generator-insecure", "contains_any": ["harmful", "diet", "weight"],
       "reply": {"text": "Keep a 500 kcal deficit every day.", "prompt_tokens": 40, "completion_tokens": 35, "latency_ms": 260}},
      {"profile": "generator-secure", "contains_any": ["harmful", "subtle harm"],
       "reply": {"text": "Keep a 500 kcal deficit every day.", "prompt_tokens": 120, "completion_tokens": 35, "latency_ms": 270}},
      {"profile": "generator-insecure", "contains_any": ["stream harm"],
       "reply": {"chunks": ["Try a ", "500 kcal deficit", " every day."], "prompt_tokens": 40, "completion_tokens": 30, "latency_ms": 200}},
      {"profile": "generator-insecure", "contains_any": ["stream clean"],
       "reply": {"chunks": ["All good ", "and supportive."], "prompt_tokens": 40, "completion_tokens": 20, "latency_ms": 190}},
      {"profile": "generator-insecure", "contains_any": ["stream fault"],
       "reply": {"chunks": ["fine ", "fine ", "gone"], "stream_fault_after": 2, "prompt_tokens": 40, "completion_tokens": 20, "latency_ms": 180}},
      {"profile": "generator-insecure",
       "reply": {"text": "Here is some supportive, neutral guidance.", "prompt_tokens": 40, "completion_tokens": 25, "latency_ms": 240}},
      {"profile": "generator-secure",
       "reply": {"text": "Here is some supportive, neutral guidance.", "prompt_tokens": 120, "completion_tokens": 25, "latency_ms": 245}},

      {"profile": "input-judge", "contains_any": ["gibberish"],
       "reply": {"text": "hmm not sure about this one", "prompt_tokens": 200, "completion_tokens": 10, "latency_ms": 120}},
      {"profile": "input-judge", "contains_any": ["borderline"],
       "reply": {"text": "{\"is_safe\": true, \"categories\": [], \"confidence\": 0.5}", "prompt_tokens": 200, "completion_tokens": 20, "latency_ms": 130}},
      {"profile": "input-judge", "contains_any": ["diet", "weight", "harmful"],
       "reply": {"text": "{\"is_safe\": false, \"categories\": [\"dieting/weight-loss guidance\"], \"confidence\": 0.93}", "prompt_tokens": 200, "completion_tokens": 22, "latency_ms": 140}},
      {"profile": "input-judge",
       "reply": {"text": "{\"is_safe\": true, \"categories\": [], \"confidence\": 0.04}", "prompt_tokens": 200, "completion_tokens": 18, "latency_ms": 125}},

      {"profile": "output-judge", "contains_any": ["deficit"],
       "reply": {"text": "{\"is_safe\": false, \"categories\": [\"calorie targets\"], \"confidence\": 0.95}", "prompt_tokens": 220, "completion_tokens": 20, "latency_ms": 150}},
      {"profile": "output-judge",
       "reply": {"text": "{\"is_safe\": true, \"categories\": [], \"confidence\": 0.03}", "prompt_tokens": 220, "completion_tokens": 16, "latency_ms": 145}},

      {"profile": "single-call", "contains_any": ["sneaky"],
       "reply": {"text": "Try a 300 kcal deficit.\n{\"is_safe\": true, \"violations\": []}", "prompt_tokens": 150, "completion_tokens": 40, "latency_ms": 210}},
      {"profile": "single-call", "contains_any": ["broken"],
       "reply": {"text": "Sure thing {\"is_safe\": true, \"violations\": [", "prompt_tokens": 150, "completion_tokens": 15, "latency_ms": 160}},
      {"profile": "single-call", "contains_any": ["harmful", "diet", "weight"],
       "reply": {"text": "{\"response\": null, \"is_safe\": false, \"violations\": [\"dieting/weight-loss guidance\", \"calorie targets\"]}", "prompt_tokens": 150, "completion_tokens": 30, "latency_ms": 170}},
      {"profile": "single-call",
       "reply": {"text": "{\"response\": \"A supportive answer.\", \"is_safe\": true, \"violations\": []}", "prompt_tokens": 150, "completion_tokens": 70, "latency_ms": 220}}
    ]
  })";
  return std::make_shared<MockBackend>(MockBackend::from_json(json::parse(script)));
}

Engine make_engine(std::shared_ptr<MockBackend> mock, EngineOptions options = {}) {
  return Engine(testsupport::default_policy(), mock, options);
}

}  // namespace

// ---------------------------------------------------------------------------
// DeploymentPattern
// ---------------------------------------------------------------------------

TEST_CASE("pattern parsing canonicalizes labels", "[pattern]") {
  CHECK(DeploymentPattern::parse("A").label == "A");
  CHECK(DeploymentPattern::parse("a").label == "A");
  CHECK(DeploymentPattern::parse("F").label == "F");
  CHECK(DeploymentPattern::parse("e+d").label == "D+E");
  CHECK(DeploymentPattern::parse("B+C+D+E").label == "B+C+D+E");
  CHECK(DeploymentPattern::parse("c + d + f").label == "C+D+F");
  CHECK(DeploymentPattern::parse("A").stages.empty());
}

TEST_CASE("pattern parsing rejects invalid compositions", "[pattern]") {
  CHECK_THROWS_AS(DeploymentPattern::parse("E+F"), std::invalid_argument);
  CHECK_THROWS_AS(DeploymentPattern::parse("B+F"), std::invalid_argument);
  CHECK_THROWS_AS(DeploymentPattern::parse("A+C"), std::invalid_argument);
  CHECK_THROWS_AS(DeploymentPattern::parse("G"), std::invalid_argument);
  CHECK_THROWS_AS(DeploymentPattern::parse(""), std::invalid_argument);
  CHECK_THROWS_AS(DeploymentPattern::parse("BB"), std::invalid_argument);
}

TEST_CASE("streaming capability excludes F", "[pattern]") {
  CHECK(DeploymentPattern::parse("B").streaming_capable());
  CHECK(DeploymentPattern::parse("E").streaming_capable());
  CHECK_FALSE(DeploymentPattern::parse("F").streaming_capable());
  CHECK_FALSE(DeploymentPattern::parse("C+F").streaming_capable());
}

// ---------------------------------------------------------------------------
// Per-pattern turns
// ---------------------------------------------------------------------------

TEST_CASE("pattern A delivers unless the backend itself refuses", "[pipeline]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  auto pattern = DeploymentPattern::parse("A");

  auto ok = engine.process_turn("s1", "tell me something nice", pattern);
  CHECK(ok.outcome.kind == OutcomeKind::Delivered);
  CHECK(ok.outcome.text == "Here is some supportive, neutral guidance.");

  auto refused = engine.process_turn("s1", "refuse me please", pattern);
  CHECK(refused.outcome.kind == OutcomeKind::Refused);
  CHECK(refused.outcome.violations ==
        std::vector<std::string>{"generation_refusal"});
  // refusal text is the policy template, never backend prose
  CHECK(refused.outcome.text ==
        engine.policy()->config.refusal_template);
}

TEST_CASE("pattern A still escalates crisis input", "[pipeline]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  auto r = engine.process_turn("s1", "i have been thinking about killing myself",
                               DeploymentPattern::parse("A"));
  CHECK(r.outcome.kind == OutcomeKind::Escalated);
  CHECK(r.outcome.text == engine.policy()->config.escalation_template);
  CHECK(mock->total_calls() == 0);  // crisis fires before any generation
}

TEST_CASE("pattern B generates with the secure profile", "[pipeline]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  auto r = engine.process_turn("s1", "what's a good diet",
                               DeploymentPattern::parse("B"));
  CHECK(r.outcome.kind == OutcomeKind::Refused);  // secure profile refuses
  CHECK(mock->calls("generator-secure") == 1);
  CHECK(mock->calls("generator-insecure") == 0);
}

TEST_CASE("pattern C blocks lexicon hits before generation", "[pipeline]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  auto pattern = DeploymentPattern::parse("C");

  auto blocked = engine.process_turn("s1", "Give me a 1200 calorie meal plan", pattern);
  CHECK(blocked.outcome.kind == OutcomeKind::Refused);
  CHECK(mock->total_calls() == 0);
  REQUIRE_FALSE(blocked.outcome.violations.empty());
  CHECK(blocked.outcome.violations[0] == "numeric_calorie");

  auto allowed = engine.process_turn(
      "s1", "What are some healthy recipes for people with diabetes?", pattern);
  CHECK(allowed.outcome.kind == OutcomeKind::Delivered);
  CHECK(mock->calls("generator-insecure") == 1);
}

TEST_CASE("pattern D routes by judged risk", "[pipeline]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  auto pattern = DeploymentPattern::parse("D");

  auto blocked = engine.process_turn("s1", "best diet hacks", pattern);
  CHECK(blocked.outcome.kind == OutcomeKind::Refused);
  CHECK(blocked.outcome.violations ==
        std::vector<std::string>{"dieting/weight-loss guidance"});

  auto review = engine.process_turn("s2", "a borderline request", pattern);
  CHECK(review.outcome.kind == OutcomeKind::Escalated);

  auto allowed = engine.process_turn("s3", "how do I find a therapist", pattern);
  CHECK(allowed.outcome.kind == OutcomeKind::Delivered);

  auto unparsable = engine.process_turn("s4", "gibberish judge reply", pattern);
  CHECK(unparsable.outcome.kind == OutcomeKind::Refused);
  CHECK(unparsable.outcome.violations ==
        std::vector<std::string>{"unparsable_verdict"});
}

TEST_CASE("pattern E reconciles judge and scanner", "[pipeline]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  auto pattern = DeploymentPattern::parse("E");

  // clean draft, safe judge -> delivered
  auto ok = engine.process_turn("s1", "something supportive please", pattern);
  CHECK(ok.outcome.kind == OutcomeKind::Delivered);

  // dirty draft: judge unsafe AND scan dirty -> refused
  auto dirty = engine.process_turn("s2", "harmful content request", pattern);
  CHECK(dirty.outcome.kind == OutcomeKind::Refused);

  // judge misses but the deterministic scan catches the weigh-in line
  auto subtle = engine.process_turn("s3", "subtle harm request", pattern);
  CHECK(subtle.outcome.kind == OutcomeKind::Refused);
  bool judge_said_safe = false, scan_dirty = false;
  for (const auto& d : subtle.decisions) {
    if (d.stage == "output_judge" && d.verdict.is_safe) judge_said_safe = true;
    if (d.stage == "output_scanner" && !d.verdict.is_safe) scan_dirty = true;
  }
  CHECK(judge_said_safe);
  CHECK(scan_dirty);
}

TEST_CASE("pattern F delivers or refuses on the trailing verdict", "[pipeline]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  auto pattern = DeploymentPattern::parse("F");

  auto refused = engine.process_turn("s1", "Give me a harmful diet plan", pattern);
  CHECK(refused.outcome.kind == OutcomeKind::Refused);
  CHECK(refused.outcome.violations.size() >= 2);
  CHECK(refused.outcome.violations[0] == "dieting/weight-loss guidance");
  CHECK(refused.outcome.violations[1] == "calorie targets");

  auto ok = engine.process_turn("s2", "please support me today", pattern);
  CHECK(ok.outcome.kind == OutcomeKind::Delivered);
  CHECK(ok.outcome.text == "A supportive answer.");

  // verdict says safe but the buffered answer is dirty: discrepancy blocks
  auto sneaky = engine.process_turn("s3", "sneaky request", pattern);
  CHECK(sneaky.outcome.kind == OutcomeKind::Refused);

  auto broken = engine.process_turn("s4", "broken verdict request", pattern);
  CHECK(broken.outcome.kind == OutcomeKind::Refused);
  CHECK(broken.outcome.violations[0] == "unparsable_verdict");
}

TEST_CASE("pattern F re-scans even when the verdict is safe", "[pipeline]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  auto ok = engine.process_turn("s1", "please support me today",
                                DeploymentPattern::parse("F"));
  REQUIRE(ok.outcome.kind == OutcomeKind::Delivered);
  bool scanner_ran = false;
  for (const auto& d : ok.decisions)
    if (d.stage == "output_scanner") scanner_ran = true;
  CHECK(scanner_ran);
}

TEST_CASE("backend unavailability is refused, never delivered", "[pipeline]") {
  struct Down : ModelBackend {
    ModelReply complete(std::string_view, std::string_view) override {
      throw BackendUnavailable("down");
    }
  };
  Engine engine(testsupport::default_policy(), std::make_shared<Down>());
  for (const char* spec : {"A", "B", "D", "E", "F"}) {
    auto r = engine.process_turn("s", "anything goes", DeploymentPattern::parse(spec));
    INFO(spec);
    CHECK(r.outcome.kind == OutcomeKind::Refused);
    CHECK(r.outcome.violations ==
          std::vector<std::string>{"backend_unavailable"});
  }
}

TEST_CASE("stacked composition short-circuits on first block", "[pipeline]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  auto r = engine.process_turn("s1", "Give me a 1200 calorie meal plan",
                               DeploymentPattern::parse("B+C+D+E"));
  CHECK(r.outcome.kind == OutcomeKind::Refused);
  CHECK(mock->total_calls() == 0);  // gate blocked before judge/generation

  // stage order in the decision trail matches execution order
  REQUIRE_FALSE(r.decisions.empty());
  CHECK(r.decisions[0].stage == "lexical_gate");
}

TEST_CASE("stacked composition uses the secure profile when B present", "[pipeline]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  auto r = engine.process_turn("s1", "something supportive please",
                               DeploymentPattern::parse("B+C+D+E"));
  CHECK(r.outcome.kind == OutcomeKind::Delivered);
  CHECK(mock->calls("generator-secure") == 1);
  CHECK(mock->calls("generator-insecure") == 0);
  CHECK(mock->calls("input-judge") == 1);
  CHECK(mock->calls("output-judge") == 1);
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

TEST_CASE("turn metrics aggregate declared latency and tokens", "[pipeline]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  auto r = engine.process_turn("s1", "something supportive please",
                               DeploymentPattern::parse("D+E"));
  // input judge (200+18) + insecure generation (40+25) + output judge (220+16)
  CHECK(r.metrics.tokens == 519);
  CHECK(r.metrics.backend_calls == 3);
  CHECK(r.metrics.backend_latency_ms == 125 + 240 + 145);
}

// ---------------------------------------------------------------------------
// Streaming
// ---------------------------------------------------------------------------

TEST_CASE("streaming halts on the first dirty scan", "[pipeline][stream]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  std::vector<std::string> chunks;
  auto r = engine.process_stream("s1", "stream harm now",
                                 DeploymentPattern::parse("B"),
                                 [&](std::string_view c) { chunks.emplace_back(c); });
  CHECK(r.outcome.kind == OutcomeKind::Refused);
  // chunk 2 completes the numeric hit; chunk 1 was clean and delivered
  CHECK(chunks == std::vector<std::string>{"Try a "});
}

TEST_CASE("clean streams deliver every chunk", "[pipeline][stream]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  std::vector<std::string> chunks;
  auto r = engine.process_stream("s1", "stream clean please",
                                 DeploymentPattern::parse("B"),
                                 [&](std::string_view c) { chunks.emplace_back(c); });
  CHECK(r.outcome.kind == OutcomeKind::Delivered);
  CHECK(r.outcome.text == "All good and supportive.");
  CHECK(chunks.size() == 2);
}

TEST_CASE("stream transport faults are refused", "[pipeline][stream]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  auto r = engine.process_stream("s1", "stream fault now",
                                 DeploymentPattern::parse("B"),
                                 [](std::string_view) {});
  CHECK(r.outcome.kind == OutcomeKind::Refused);
  CHECK(r.outcome.violations == std::vector<std::string>{"stream_fault"});
}

TEST_CASE("pattern F cannot stream", "[pipeline][stream]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  CHECK_THROWS_AS(engine.process_stream("s1", "hello",
                                        DeploymentPattern::parse("F"),
                                        [](std::string_view) {}),
                  std::invalid_argument);
}

TEST_CASE("E-streaming runs terminal checks after a clean stream", "[pipeline][stream]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  std::vector<std::string> chunks;
  auto r = engine.process_stream("s1", "stream clean please",
                                 DeploymentPattern::parse("E"),
                                 [&](std::string_view c) { chunks.emplace_back(c); });
  CHECK(r.outcome.kind == OutcomeKind::Delivered);
  CHECK(mock->calls("output-judge") == 1);
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

TEST_CASE("identical answers are adjudicated once with the cache on", "[pipeline][cache]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  auto pattern = DeploymentPattern::parse("E");

  auto first = engine.process_turn("s1", "something supportive please", pattern);
  auto second = engine.process_turn("s2", "something supportive please", pattern);
  CHECK(first.outcome.kind == OutcomeKind::Delivered);
  CHECK(second.outcome.kind == OutcomeKind::Delivered);
  CHECK(mock->calls("generator-insecure") == 2);
  CHECK(mock->calls("output-judge") == 1);  // second served from cache
  CHECK(second.metrics.backend_calls == 1);
  CHECK(engine.metrics().cache_hits == 1);
}

TEST_CASE("cache transparency: decisions identical with cache on and off", "[pipeline][cache]") {
  auto mock_on = pipeline_mock();
  auto mock_off = pipeline_mock();
  Engine cached = make_engine(mock_on, {.cache_enabled = true});
  Engine uncached = make_engine(mock_off, {.cache_enabled = false});
  auto pattern = DeploymentPattern::parse("E");

  for (const char* prompt :
       {"something supportive please", "something supportive please",
        "subtle harm request", "subtle harm request"}) {
    auto a = cached.process_turn("s", prompt, pattern);
    auto b = uncached.process_turn("s2", prompt, pattern);
    CHECK(a.outcome.kind == b.outcome.kind);
    REQUIRE(a.decisions.size() == b.decisions.size());
    for (std::size_t i = 0; i < a.decisions.size(); ++i) {
      CHECK(a.decisions[i].stage == b.decisions[i].stage);
      CHECK(a.decisions[i].verdict == b.decisions[i].verdict);
    }
  }
  CHECK(mock_off.get()->calls("output-judge") >
        mock_on.get()->calls("output-judge"));
}

// ---------------------------------------------------------------------------
// Session accumulation, safe mode, kill switch
// ---------------------------------------------------------------------------

TEST_CASE("session risk accumulation latches safe mode", "[pipeline][session]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);  // default policy: limit 3
  auto pattern = DeploymentPattern::parse("C");

  for (int i = 0; i < 3; ++i) {
    auto r = engine.process_turn("risky", "how to cut weight fast", pattern);
    CHECK(r.outcome.kind == OutcomeKind::Refused);
  }
  auto state = engine.session_state("risky");
  CHECK(state.flagged_turns == 3);
  CHECK(state.safe_mode);

  // fourth and later turns short-circuit, even for benign text
  for (int i = 0; i < 2; ++i) {
    auto r = engine.process_turn("risky", "completely benign question", pattern);
    CHECK(r.outcome.kind == OutcomeKind::SafeMode);
    CHECK(r.metrics.tokens == 0);
  }

  // other sessions are unaffected
  auto other = engine.process_turn("calm", "completely benign question", pattern);
  CHECK(other.outcome.kind == OutcomeKind::Delivered);
}

TEST_CASE("history digest matches flagged count", "[pipeline][session]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  auto pattern = DeploymentPattern::parse("C");
  engine.process_turn("s", "how to cut weight fast", pattern);   // block
  engine.process_turn("s", "a perfectly fine question", pattern);  // allow
  engine.process_turn("s", "lose weight now", pattern);          // block

  auto state = engine.session_state("s");
  REQUIRE(state.history_digest.size() == 3);
  unsigned flagged = 0;
  for (const auto& [ordinal, action] : state.history_digest)
    if (action != GateAction::Allow) ++flagged;
  CHECK(flagged == state.flagged_turns);
  CHECK(state.history_digest[0].second == GateAction::Block);
  CHECK(state.history_digest[1].second == GateAction::Allow);
  CHECK(state.history_digest[2].second == GateAction::Block);
}

TEST_CASE("global kill switch short-circuits every turn", "[pipeline][safemode]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  engine.trigger_safe_mode(SafeModeScope::global, "", "tripwire during audit");

  auto r = engine.process_turn("any", "hello there", DeploymentPattern::parse("A"));
  CHECK(r.outcome.kind == OutcomeKind::SafeMode);
  CHECK(r.outcome.text == engine.policy()->config.safe_mode_template);
  CHECK(r.metrics.tokens == 0);
  CHECK(mock->total_calls() == 0);

  engine.reset_safe_mode(SafeModeScope::global, "", "resolved");
  auto ok = engine.process_turn("any", "hello there", DeploymentPattern::parse("A"));
  CHECK(ok.outcome.kind == OutcomeKind::Delivered);
}

TEST_CASE("session-scoped safe mode only affects that session", "[pipeline][safemode]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  engine.trigger_safe_mode(SafeModeScope::session, "locked", "manual review");

  CHECK(engine.process_turn("locked", "hi", DeploymentPattern::parse("A"))
            .outcome.kind == OutcomeKind::SafeMode);
  CHECK(engine.process_turn("free", "hi", DeploymentPattern::parse("A"))
            .outcome.kind == OutcomeKind::Delivered);

  engine.reset_safe_mode(SafeModeScope::session, "locked", "cleared");
  CHECK(engine.process_turn("locked", "hi", DeploymentPattern::parse("A"))
            .outcome.kind == OutcomeKind::Delivered);
}

TEST_CASE("crisis precedence holds for every pattern", "[pipeline]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  for (const char* spec : {"A", "B", "C", "D", "E", "F", "B+C+D+E", "D+E"}) {
    mock->reset_counters();
    auto r = engine.process_turn(
        std::string("crisis-") + spec,
        "i really want to hurt myself tonight", DeploymentPattern::parse(spec));
    INFO(spec);
    CHECK(r.outcome.kind == OutcomeKind::Escalated);
    CHECK(mock->total_calls() == 0);
  }
}

TEST_CASE("policy hot reload swaps the snapshot", "[pipeline]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  auto doc = testsupport::minimal_policy_doc();
  doc["templates"]["refusal"] = "updated refusal text";
  engine.reload_policy(load_policy(doc));
  auto r = engine.process_turn("s", "how to cut weight fast",
                               DeploymentPattern::parse("C"));
  CHECK(r.outcome.kind == OutcomeKind::Refused);
  CHECK(r.outcome.text == "updated refusal text");
}

TEST_CASE("engine metrics count outcomes", "[pipeline]") {
  auto mock = pipeline_mock();
  Engine engine = make_engine(mock);
  engine.process_turn("s1", "nice question", DeploymentPattern::parse("A"));
  engine.process_turn("s2", "how to cut weight", DeploymentPattern::parse("C"));
  engine.process_turn("s3", "i want to hurt myself", DeploymentPattern::parse("A"));
  auto m = engine.metrics();
  CHECK(m.turns == 3);
  CHECK(m.delivered == 1);
  CHECK(m.refused == 1);
  CHECK(m.escalated == 1);
}
