#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "redline/judge.hpp"
#include "support/policies.hpp"

using namespace redline;

namespace {

// In-test backend returning one canned completion.
class CannedBackend : public ModelBackend {
 public:
  explicit CannedBackend(std::string text) : text_(std::move(text)) {}
  ModelReply complete(std::string_view, std::string_view) override {
    ModelReply r;
    r.text = text_;
    r.prompt_tokens = 100;
    r.completion_tokens = 50;
    return r;
  }

 private:
  std::string text_;
};

class DownBackend : public ModelBackend {
 public:
  ModelReply complete(std::string_view, std::string_view) override {
    throw BackendUnavailable("down");
  }
};

}  // namespace

TEST_CASE("judge_input passes through an unsafe verdict", "[judge]") {
  Policy p = testsupport::minimal_policy();
  CannedBackend backend(
      R"({"is_safe": false, "categories": ["dieting/weight-loss guidance"], "confidence": 0.93})");
  auto judged = judge_input("please help me crash diet", p, backend);
  CHECK_FALSE(judged.verdict.is_safe);
  CHECK(judged.verdict.violations ==
        std::vector<std::string>{"dieting/weight-loss guidance"});
  CHECK(judged.verdict.risk == 0.93);
  CHECK(judged.verdict.source == VerdictSource::input_judge);
  REQUIRE(judged.reply.has_value());
}

TEST_CASE("judge_input fails closed on non-JSON replies", "[judge]") {
  Policy p = testsupport::minimal_policy();
  CannedBackend backend("I think it's fine");
  auto judged = judge_input("anything", p, backend);
  CHECK_FALSE(judged.verdict.is_safe);
  CHECK(judged.verdict.violations ==
        std::vector<std::string>{"unparsable_verdict"});
}

TEST_CASE("judge_input maps confidence to risk", "[judge]") {
  Policy p = testsupport::minimal_policy();
  CannedBackend backend(
      R"({"is_safe": true, "categories": [], "confidence": 0.05})");
  auto judged = judge_input("how do I find a therapist", p, backend);
  CHECK(judged.verdict.is_safe);
  CHECK(judged.verdict.violations.empty());
  CHECK(judged.verdict.risk == 0.05);
}

TEST_CASE("judge verdict parsing is strict", "[judge]") {
  auto unsafe = [](std::string_view text) {
    Verdict v = parse_judge_verdict(text, VerdictSource::input_judge);
    return !v.is_safe &&
           v.violations == std::vector<std::string>{"unparsable_verdict"};
  };
  CHECK(unsafe(R"({"is_safe": "yes", "categories": []})"));     // mistyped
  CHECK(unsafe(R"({"is_safe": true})"));                        // missing key
  CHECK(unsafe(R"({"is_safe": true, "categories": ["x"]})"));   // inconsistent
  CHECK(unsafe(R"({"is_safe": true, "categories": [], "confidence": 1.5})"));
  CHECK(unsafe(R"({"is_safe": true, "categories": [1]})"));     // non-string
  CHECK(unsafe(R"([1,2,3])"));
  CHECK(unsafe(""));

  // unknown extra keys are tolerated
  Verdict v = parse_judge_verdict(
      R"({"is_safe": true, "categories": [], "confidence": 0.1, "note": "hi"})",
      VerdictSource::input_judge);
  CHECK(v.is_safe);
}

TEST_CASE("missing confidence defaults by safety", "[judge]") {
  Verdict safe = parse_judge_verdict(R"({"is_safe": true, "categories": []})",
                                     VerdictSource::input_judge);
  CHECK(safe.risk == 0.0);
  Verdict bad = parse_judge_verdict(
      R"({"is_safe": false, "categories": ["x"]})", VerdictSource::input_judge);
  CHECK(bad.risk == 1.0);
}

TEST_CASE("judge_output adjudicates an empty answer safe without a call", "[judge]") {
  Policy p = testsupport::minimal_policy();
  DownBackend backend;  // would throw if contacted
  auto judged = judge_output("", p, backend);
  CHECK(judged.verdict.is_safe);
  CHECK(judged.verdict.violations.empty());
  CHECK_FALSE(judged.reply.has_value());
}

TEST_CASE("judge_output fails closed on truncated JSON", "[judge]") {
  Policy p = testsupport::minimal_policy();
  CannedBackend backend(R"({"is_safe": false, "categories": ["cal)");
  auto judged = judge_output("some answer", p, backend);
  CHECK_FALSE(judged.verdict.is_safe);
  CHECK(judged.verdict.violations ==
        std::vector<std::string>{"unparsable_verdict"});
}

TEST_CASE("backend faults propagate for the caller to fail closed", "[judge]") {
  Policy p = testsupport::minimal_policy();
  DownBackend backend;
  CHECK_THROWS_AS(judge_input("hello", p, backend), BackendUnavailable);
  CHECK_THROWS_AS(judge_output("an answer", p, backend), BackendUnavailable);
}

// ---------------------------------------------------------------------------
// route_by_risk
// ---------------------------------------------------------------------------

TEST_CASE("route_by_risk boundaries", "[judge]") {
  Policy p = testsupport::minimal_policy();  // t_lo=0.2 t_hi=0.8
  CHECK(route_by_risk(1.0, p) == GateAction::Block);
  CHECK(route_by_risk(0.0, p) == GateAction::Allow);
  CHECK(route_by_risk(0.8, p) == GateAction::Block);   // boundary inclusive
  CHECK(route_by_risk(0.2, p) == GateAction::Allow);   // boundary inclusive
  CHECK(route_by_risk(0.5, p) == GateAction::Review);
}

TEST_CASE("route_by_risk is monotone", "[judge][property]") {
  Policy p = testsupport::minimal_policy();
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    double a = dist(rng), b = dist(rng);
    if (a > b) std::swap(a, b);
    CHECK(static_cast<int>(route_by_risk(a, p)) <=
          static_cast<int>(route_by_risk(b, p)));
  }
}

TEST_CASE("count_tokens sums prompt and completion", "[judge]") {
  CHECK(count_tokens({}) == 0);
  std::vector<ModelReply> one{{"", 100, 50, {}}};
  CHECK(count_tokens(one) == 150);
  std::vector<ModelReply> two{{"", 100, 50, {}}, {"", 80, 20, {}}};
  CHECK(count_tokens(two) == 250);
}

// ---------------------------------------------------------------------------
// extract_trailing_verdict
// ---------------------------------------------------------------------------

TEST_CASE("single-object harmful verdict: answer dropped", "[singlecall]") {
  auto r = extract_trailing_verdict(
      "{\"response\": null,\n \"is_safe\": false,\n \"violations\": [\n"
      "   \"dieting/weight-loss guidance\", \n   \"calorie targets\"\n ]\n}");
  CHECK(r.parse_ok);
  CHECK(r.shape == SingleCallResult::Shape::single_object);
  CHECK_FALSE(r.answer.has_value());
  CHECK_FALSE(r.verdict.is_safe);
  CHECK(r.verdict.violations ==
        std::vector<std::string>{"dieting/weight-loss guidance",
                                 "calorie targets"});
}

TEST_CASE("single-object safe verdict: answer present", "[singlecall]") {
  auto r = extract_trailing_verdict(
      "{\"response\": \"<assistant_answer_text>\",\n \"is_safe\": true,\n"
      " \"violations\": []\n}");
  CHECK(r.parse_ok);
  CHECK(r.shape == SingleCallResult::Shape::single_object);
  REQUIRE(r.answer.has_value());
  CHECK(*r.answer == "<assistant_answer_text>");
  CHECK(r.verdict.is_safe);
  CHECK(r.verdict.violations.empty());
}

TEST_CASE("trailing shape: answer text then verdict", "[singlecall]") {
  auto r = extract_trailing_verdict(
      "Here are some coping strategies that may help.\n"
      "{\"is_safe\": true, \"violations\": []}");
  CHECK(r.parse_ok);
  CHECK(r.shape == SingleCallResult::Shape::trailing);
  REQUIRE(r.answer.has_value());
  CHECK(*r.answer == "Here are some coping strategies that may help.");
  CHECK(r.verdict.is_safe);
}

TEST_CASE("unterminated trailing JSON fails closed", "[singlecall]") {
  auto r = extract_trailing_verdict(
      "Here are coping strategies... {\"is_safe\": true, \"violations\": [");
  CHECK_FALSE(r.parse_ok);
  CHECK_FALSE(r.verdict.is_safe);
  CHECK_FALSE(r.answer.has_value());
  CHECK(r.verdict.violations ==
        std::vector<std::string>{"unparsable_verdict"});
}

TEST_CASE("verdict JSON in the answer body never shadows the trailing object",
          "[singlecall]") {
  auto r = extract_trailing_verdict(
      "A verdict looks like {\"is_safe\": true, \"violations\": []} for example.\n"
      "{\"is_safe\": false, \"violations\": [\"calorie targets\"]}");
  CHECK(r.parse_ok);
  CHECK_FALSE(r.verdict.is_safe);
  CHECK(r.verdict.violations == std::vector<std::string>{"calorie targets"});
  CHECK_FALSE(r.answer.has_value());  // unsafe => no deliverable answer
}

TEST_CASE("unsafe trailing verdict drops a present answer", "[singlecall]") {
  auto r = extract_trailing_verdict(
      "Try a 500 kcal deficit.\n{\"is_safe\": false, \"violations\": [\"calorie targets\"]}");
  CHECK(r.parse_ok);
  CHECK_FALSE(r.verdict.is_safe);
  CHECK_FALSE(r.answer.has_value());
}

TEST_CASE("text after the last object fails closed", "[singlecall]") {
  auto r = extract_trailing_verdict(
      "answer {\"is_safe\": true, \"violations\": []} trailing prose");
  CHECK_FALSE(r.parse_ok);
  CHECK_FALSE(r.verdict.is_safe);
}

TEST_CASE("nested objects resolve to the outermost trailing object", "[singlecall]") {
  auto r = extract_trailing_verdict(
      R"({"response": "ok", "is_safe": true, "violations": [], "meta": {"model": "x"}})");
  CHECK(r.parse_ok);
  REQUIRE(r.answer.has_value());
  CHECK(*r.answer == "ok");
}

TEST_CASE("braces inside JSON strings do not confuse extraction", "[singlecall]") {
  auto r = extract_trailing_verdict(
      R"(answer text {"is_safe": false, "violations": ["has { and } inside"]})");
  CHECK(r.parse_ok);
  CHECK_FALSE(r.verdict.is_safe);
  CHECK(r.verdict.violations == std::vector<std::string>{"has { and } inside"});
}

TEST_CASE("missing or mistyped required keys fail closed", "[singlecall]") {
  for (const char* raw : {
           R"({"violations": []})",
           R"({"is_safe": "true", "violations": []})",
           R"({"is_safe": true})",
           R"({"is_safe": true, "violations": [1]})",
           R"({"is_safe": true, "violations": "none"})",
           R"({"response": 5, "is_safe": true, "violations": []})",
           R"(answer {"response": "dup", "is_safe": true, "violations": []})",
           R"({"is_safe": true, "violations": ["x"]})",
           "no json here at all",
           "",
           "}{",
       }) {
    auto r = extract_trailing_verdict(raw);
    INFO(raw);
    CHECK_FALSE(r.parse_ok);
    CHECK_FALSE(r.verdict.is_safe);
    CHECK_FALSE(r.answer.has_value());
  }
}

TEST_CASE("lone verdict object is a trailing shape with empty answer", "[singlecall]") {
  auto r = extract_trailing_verdict(R"({"is_safe": true, "violations": []})");
  CHECK(r.parse_ok);
  CHECK(r.shape == SingleCallResult::Shape::trailing);
  REQUIRE(r.answer.has_value());
  CHECK(r.answer->empty());
}

TEST_CASE("extraction is total over fuzzed completions", "[singlecall][property]") {
  std::mt19937 rng(20260810);
  const std::string pieces[] = {
      "{", "}", "\"is_safe\"", "\"violations\"", ":", "true", "false", "[",
      "]", ",", "null", "\"response\"", "text ", "\\", "\"", "1200 calories",
      "{\"is_safe\": true, \"violations\": []}", "\n", " "};
  for (int i = 0; i < 5000; ++i) {
    std::string raw;
    int n = std::uniform_int_distribution<int>(0, 12)(rng);
    for (int k = 0; k < n; ++k)
      raw += pieces[std::uniform_int_distribution<std::size_t>(
          0, std::size(pieces) - 1)(rng)];
    auto r = extract_trailing_verdict(raw);
    // fail-closed totality: parse_ok=false implies unsafe and no answer
    if (!r.parse_ok) {
      REQUIRE_FALSE(r.verdict.is_safe);
      REQUIRE_FALSE(r.answer.has_value());
    }
    if (!r.verdict.is_safe) REQUIRE_FALSE(r.answer.has_value());
  }
}
