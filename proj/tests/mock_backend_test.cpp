#include <doctest.h>

#include <string>
#include <vector>

#include "support.hpp"
#include "vqaflow/errors.hpp"
#include "vqaflow/imaging.hpp"
#include "vqaflow/mock_backend.hpp"
#include "vqaflow/protocol.hpp"

using namespace vqaflow;
using testsupport::pattern_image;

namespace {

std::vector<std::uint8_t> image_bytes(int width = 24, int height = 18) {
  return encode_canonical(pattern_image(width, height, 4));
}

std::string ask(const std::string& question) {
  const AgentRequest request = AgentRequest::lvlm(
      image_bytes(), "TASK: ANSWER VISUAL QUESTION\nQuestion: " + question + "\nAnswer.");
  return default_mock_lvlm(request).as_text();
}

}  // namespace

TEST_CASE("the mock vision model answers plain questions with the last word") {
  CHECK(ask("What color is the plate?") == "It is plate.");
  CHECK(ask("Is this a lamp?") == "It is lamp.");
  CHECK(ask("What?") == "It is what.");
}

TEST_CASE("the mock vision model fails on obscured scenes with a MISSING list") {
  CHECK(ask("Something is behind the obscured plate and cup here, right?") ==
        "The area looks blurry and I cannot resolve the key items.\n"
        "[Answer Failed]\n"
        "MISSING: plate, cup");
  // Stop words after "obscured" are skipped; at most two names.
  CHECK(ask("Look at the obscured the a an cup bowl dish") ==
        "The area looks blurry and I cannot resolve the key items.\n"
        "[Answer Failed]\n"
        "MISSING: cup, bowl");
  // Nothing usable after "obscured" falls back to a generic name.
  CHECK(ask("Everything here is obscured") ==
        "The area looks blurry and I cannot resolve the key items.\n"
        "[Answer Failed]\n"
        "MISSING: object");
}

TEST_CASE("the mock vision model counts via the last integer in the question") {
  CHECK(ask("How many plates can you spot, roughly 3?") == "I count 3 plates in the image.");
  CHECK(ask("How many birds are there?") == "I count 2 birds in the image.");  // default 2
  CHECK(ask("How many cups, maybe 10 or 12?") == "I count 12 cups in the image.");
  CHECK(ask("How many plates are visible, I am unsure about it?") ==
        "I am not sure of the exact quantity here.");
  // "how many" must start the question for the counting script.
  CHECK(ask("Tell me how many plates?") == "It is plates.");
}

TEST_CASE("the mock vision model describes the labeled object") {
  const AgentRequest request = AgentRequest::lvlm(
      image_bytes(),
      "TASK: DESCRIBE OBJECT\nThe crop shows one object: cup.\nDescribe it briefly.");
  CHECK(default_mock_lvlm(request).as_text() ==
        "A cup with plain markings, resting near the center of the crop.");
}

TEST_CASE("the mock vision model reattempts from the description list") {
  const auto reattempt = [&](const std::string& body) {
    const AgentRequest request =
        AgentRequest::lvlm(image_bytes(), "TASK: REATTEMPT VISUAL QUESTION\n" + body);
    return default_mock_lvlm(request).as_text();
  };

  CHECK(reattempt("Question: Where is it?\n- plate: A plate.\n- cup: A cup.") ==
        "It is beside the cup.");
  CHECK(reattempt("Question: Where is it?\n- cup: A cup.\n- plate: A plate.") ==
        "It is beside the cup.");  // alphabetical, not positional
  CHECK(reattempt("Question: Where is the fork?\n(no additional objects were found)") ==
        "It is fork.");
  CHECK(reattempt("Question: the doublefail case?\n- cup: A cup.") ==
        "Even with the extra detail I cannot resolve it.\n[Answer Failed]\nMISSING: detail");
}

TEST_CASE("unknown vision prompts get a fixed reply") {
  const AgentRequest request = AgentRequest::lvlm(image_bytes(), "TASK: SOMETHING ELSE\nhm");
  CHECK(default_mock_lvlm(request).as_text() == "mock answer");
}

TEST_CASE("the mock language model analyzes the embedded response span") {
  const auto analyze = [](const std::string& question, const std::string& response) {
    const AgentRequest request = AgentRequest::llm(
        "TASK: ANALYZE RESPONSE\nQuestion: " + question + "\nRESPONSE_BEGIN\n" + response +
        "\nRESPONSE_END\nReply in KEY=VALUE form.");
    return default_mock_llm(request).as_text();
  };

  CHECK(analyze("What is it?", "It is a cat.") == "FAILED=no\nMISSING=none\nCOUNTING=no\nTARGET=none");
  CHECK(analyze("What is it?", "Blurry.\n[Answer Failed]\nMISSING: cup, dish") ==
        "FAILED=yes\nMISSING=cup, dish\nCOUNTING=no\nTARGET=none");
  CHECK(analyze("How many plates are set?", "I count 5 plates in the image.") ==
        "FAILED=no\nMISSING=none\nCOUNTING=yes\nTARGET=plates");
  CHECK(analyze("How many obscured crates are stacked?",
                "Blurry.\n[Answer Failed]\nMISSING: crates") ==
        "FAILED=yes\nMISSING=crates\nCOUNTING=yes\nTARGET=obscured");
}

TEST_CASE("the mock language model grades by normalized comparison") {
  const auto grade = [](const std::string& candidate, const std::string& golds) {
    const AgentRequest request = AgentRequest::llm(
        "TASK: GRADE ANSWER\nQuestion: q\nGOLD_BEGIN\n" + golds + "\nGOLD_END\nCANDIDATE_BEGIN\n" +
        candidate + "\nCANDIDATE_END\nJudge it.");
    return default_mock_llm(request).as_text();
  };

  CHECK(grade("yes", "yes") == "Compared against the references.\nCORRECT");
  CHECK(grade("Yes.", "yes") == "Compared against the references.\nCORRECT");
  CHECK(grade("7", "seven") == "Compared against the references.\nCORRECT");
  CHECK(grade("maybe", "yes\nno") == "Compared against the references.\nINCORRECT");
  CHECK(grade("no", "yes\nno") == "Compared against the references.\nCORRECT");

  const AgentRequest other = AgentRequest::llm("TASK: CHAT\nhello");
  CHECK(default_mock_llm(other).as_text() == "OK");
}

TEST_CASE("mock detections are deterministic, valid and reasonably confident") {
  const Detection first = mock_detection_for("cup", 64, 48);
  const Detection second = mock_detection_for("cup", 64, 48);
  CHECK(first.label == "cup");
  CHECK(first.box.x_min == second.box.x_min);
  CHECK(first.confidence == second.confidence);

  for (const char* name : {"cup", "plate", "bowl", "widget", "x"}) {
    for (int width : {8, 33, 64, 100}) {
      for (int height : {8, 24, 57}) {
        const Detection d = mock_detection_for(name, width, height);
        CHECK(d.box.valid_for(width, height));
        CHECK(d.confidence >= 0.5);
        CHECK(d.confidence <= 0.99);
      }
    }
  }

  CHECK(mock_detection_for("cup", 64, 48).box.x_min !=
        mock_detection_for("plaque", 64, 48).box.x_min);
}

TEST_CASE("the mock detector emits one box per name and skips 'void'") {
  const auto bytes = image_bytes(64, 48);
  const AgentRequest request = AgentRequest::detect(bytes, {"cup", "void", "plate"});
  const auto detections = default_mock_detector(request).as_detections();
  REQUIRE(detections.size() == 2);
  CHECK(detections[0].label == "cup");
  CHECK(detections[1].label == "plate");
  CHECK(detections[0].box.x_min == mock_detection_for("cup", 64, 48).box.x_min);
}

TEST_CASE("the mock counter returns target length plus 0.7") {
  CHECK(default_mock_counter(AgentRequest::count(image_bytes(), "plates")).as_count() ==
        doctest::Approx(6.7));
  CHECK(default_mock_counter(AgentRequest::count(image_bytes(), "obscured")).as_count() ==
        doctest::Approx(8.7));
  CHECK(default_mock_counter(AgentRequest::count(image_bytes(), "ab")).as_count() ==
        doctest::Approx(2.7));
}

TEST_CASE("kind-only construction wires the default script") {
  ScriptedMockBackend lvlm(AgentKind::Lvlm);
  const auto reply = lvlm.call(AgentRequest::lvlm(
      image_bytes(), "TASK: ANSWER VISUAL QUESTION\nQuestion: Where is the dog?\nAnswer."));
  CHECK(reply.response.as_text() == "It is dog.");
  CHECK(reply.latency_ms == 0);
  CHECK(lvlm.calls() == 1);

  ScriptedMockBackend counter(AgentKind::Counter);
  CHECK(counter.call(AgentRequest::count(image_bytes(), "abc")).response.as_count() ==
        doctest::Approx(3.7));

  ScriptedMockBackend detector(AgentKind::Detector);
  CHECK(detector.call(AgentRequest::detect(image_bytes(), {"cup"})).response.as_detections().size() ==
        1);

  ScriptedMockBackend llm(AgentKind::Llm);
  CHECK(llm.call(AgentRequest::llm("TASK: CHAT")).response.as_text() == "OK");
}

TEST_CASE("scripted latency is metadata, handlers are swappable") {
  ScriptedMockBackend mock(AgentKind::Llm);
  mock.set_latency_ms(77);
  CHECK(mock.call(AgentRequest::llm("TASK: CHAT")).latency_ms == 77);

  mock.set_handler([](const AgentRequest&) { return AgentResponse::text("swapped"); });
  CHECK(mock.call(AgentRequest::llm("anything")).response.as_text() == "swapped");
  CHECK(mock.calls() == 2);
}

TEST_CASE("make_mock_backends serves the full quartet deterministically") {
  const AgentBackends backends = make_mock_backends();
  const auto bytes = image_bytes();
  const auto again = make_mock_backends();
  const AgentRequest question = AgentRequest::lvlm(
      bytes, "TASK: ANSWER VISUAL QUESTION\nQuestion: Where is the cat?\nAnswer.");
  CHECK(backends.lvlm->call(question).response == again.lvlm->call(question).response);
  CHECK(backends.counter->call(AgentRequest::count(bytes, "cats")).response ==
        again.counter->call(AgentRequest::count(bytes, "cats")).response);
}
