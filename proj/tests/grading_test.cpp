#include <doctest.h>

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "support.hpp"
#include "vqaflow/agents.hpp"
#include "vqaflow/errors.hpp"
#include "vqaflow/grading.hpp"
#include "vqaflow/mock_backend.hpp"
#include "vqaflow/textutil.hpp"

using namespace vqaflow;
using testsupport::test_prompts;

TEST_CASE("normalize_answer lowers, collapses, trims punctuation and rewrites numbers") {
  CHECK(normalize_answer("Two.") == "2");
  CHECK(normalize_answer("  YES!! ") == "yes");
  CHECK(normalize_answer("A   red \t car") == "a red car");
  CHECK(normalize_answer("seven apples") == "7 apples");
  CHECK(normalize_answer("Twenty") == "20");
  CHECK(normalize_answer("It is a cat?!") == "it is a cat");
  CHECK(normalize_answer("") == "");
  CHECK(normalize_answer(" .!?,;: ") == "");
  // Only trailing punctuation is stripped; interior stays put.
  CHECK(normalize_answer("a.b.") == "a.b");
  // Number words rewrite only as standalone tokens.
  CHECK(normalize_answer("stones") == "stones");
  CHECK(normalize_answer("one, two") == "one, 2");
}

TEST_CASE("parse_vote reads the last non-empty line, INCORRECT first") {
  CHECK(parse_vote("CORRECT") == GradeVote::Correct);
  CHECK(parse_vote("INCORRECT") == GradeVote::Incorrect);
  CHECK(parse_vote("ABSTAIN") == GradeVote::Abstain);
  CHECK(parse_vote("correct") == GradeVote::Correct);
  CHECK(parse_vote("The answer matches.\nCORRECT") == GradeVote::Correct);
  CHECK(parse_vote("CORRECT\nINCORRECT") == GradeVote::Incorrect);
  CHECK(parse_vote("reasoning...\nIt is INCORRECT\n\n  \n") == GradeVote::Incorrect);
  // "INCORRECT" contains "CORRECT": the incorrect check must win.
  CHECK(parse_vote("definitely incorrect") == GradeVote::Incorrect);
  CHECK(parse_vote("no verdict offered") == GradeVote::Abstain);
  CHECK(parse_vote("") == GradeVote::Abstain);
  CHECK(parse_vote("\n\n") == GradeVote::Abstain);
}

TEST_CASE("majority requires two correct votes; abstentions count against") {
  using V = GradeVote;
  CHECK(majority(std::array<V, 3>{V::Correct, V::Correct, V::Incorrect}) == Majority::Correct);
  CHECK(majority(std::array<V, 3>{V::Incorrect, V::Abstain, V::Correct}) == Majority::Incorrect);
  CHECK(majority(std::array<V, 3>{V::Abstain, V::Abstain, V::Abstain}) == Majority::Incorrect);
  CHECK(majority(std::array<V, 3>{V::Correct, V::Correct, V::Correct}) == Majority::Correct);

  // Brute force over all 27 combinations against the counting rule.
  const std::array<V, 3> values = {V::Correct, V::Incorrect, V::Abstain};
  for (V a : values) {
    for (V b : values) {
      for (V c : values) {
        const int correct = (a == V::Correct) + (b == V::Correct) + (c == V::Correct);
        const Majority expected = correct >= 2 ? Majority::Correct : Majority::Incorrect;
        CHECK(majority(std::array<V, 3>{a, b, c}) == expected);
        // Vote order never matters.
        CHECK(majority(std::array<V, 3>{c, a, b}) == expected);
        CHECK(majority(std::vector<V>{a, b, c}) == expected);
      }
    }
  }

  CHECK_THROWS_AS(majority(std::vector<V>{V::Correct}), Error);
  CHECK_THROWS_AS(majority(std::vector<V>{V::Correct, V::Correct, V::Correct, V::Correct}),
                  Error);
}

TEST_CASE("grade_answer makes three salted judge calls over one prompt") {
  VisualQuestion question;
  question.id = "g1";
  question.question = "What is on the table?";
  question.gold_answers = {"a cup", "cup"};

  std::vector<std::string> prompts_seen;
  std::vector<std::optional<int>> salts_seen;
  auto judge = std::make_shared<ScriptedMockBackend>(
      AgentKind::Llm, [&](const AgentRequest& request) {
        prompts_seen.push_back(request.prompt);
        salts_seen.push_back(request.salt);
        return AgentResponse::text(request.salt == 1 ? "INCORRECT" : "CORRECT");
      });
  const AgentBackends backends{judge, judge, judge, judge};
  TraceRecorder recorder;
  AgentSession session(backends, RetryPolicy{3, 1, 2.0}, &recorder);

  const GradeVerdict verdict = grade_answer(question, "A cup.", test_prompts(), session);
  CHECK(verdict.votes == std::array<GradeVote, 3>{GradeVote::Correct, GradeVote::Incorrect,
                                                  GradeVote::Correct});
  CHECK(verdict.majority == Majority::Correct);

  REQUIRE(prompts_seen.size() == 3);
  CHECK(prompts_seen[0] == prompts_seen[1]);
  CHECK(prompts_seen[1] == prompts_seen[2]);
  CHECK(salts_seen == std::vector<std::optional<int>>{0, 1, 2});
  CHECK(text::contains(prompts_seen[0], "What is on the table?"));
  CHECK(text::contains(prompts_seen[0], "a cup\ncup"));
  CHECK(text::contains(prompts_seen[0], "A cup."));

  REQUIRE(recorder.events().size() == 3);
  for (const TraceEvent& event : recorder.events()) {
    CHECK(event.stage == TraceStage::Grade);
    CHECK(event.agent_kind == AgentKind::Llm);
  }
  // Distinct salts give the three calls distinct fingerprints.
  CHECK(recorder.events()[0].request_fingerprint != recorder.events()[1].request_fingerprint);
  CHECK(recorder.events()[1].request_fingerprint != recorder.events()[2].request_fingerprint);
}

TEST_CASE("grade_answer with the default mock grader is consistent across salts") {
  VisualQuestion question;
  question.id = "g2";
  question.question = "How many cups?";
  question.gold_answers = {"seven"};

  TraceRecorder recorder;
  AgentSession session(make_mock_backends(), RetryPolicy{3, 1, 2.0}, &recorder);
  const GradeVerdict correct = grade_answer(question, "7", test_prompts(), session);
  CHECK(correct.majority == Majority::Correct);
  CHECK(correct.votes ==
        std::array<GradeVote, 3>{GradeVote::Correct, GradeVote::Correct, GradeVote::Correct});

  const GradeVerdict wrong = grade_answer(question, "9", test_prompts(), session);
  CHECK(wrong.majority == Majority::Incorrect);
}

TEST_CASE("grading an answer without references is rejected") {
  VisualQuestion question;
  question.id = "empty-golds";
  question.question = "Q?";

  TraceRecorder recorder;
  AgentSession session(make_mock_backends(), RetryPolicy{3, 1, 2.0}, &recorder);
  try {
    grade_answer(question, "candidate", test_prompts(), session);
    FAIL("expected an invalid-input error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidInput);
    CHECK(text::contains(e.what(), "empty-golds"));
  }
  CHECK(recorder.events().empty());
}
