#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <string>

#include "vqaflow/agents.hpp"

namespace vqaflow {

/// Deterministic in-process backend. The default script is a pure function
/// of the request, so recording it and replaying the cassette reproduces a
/// run bit for bit; tests can swap in custom handlers or inject transport
/// failures.
class ScriptedMockBackend : public AgentBackend {
 public:
  using Handler = std::function<AgentResponse(const AgentRequest&)>;

  explicit ScriptedMockBackend(AgentKind kind);
  ScriptedMockBackend(AgentKind kind, Handler handler);

  void set_handler(Handler handler);
  /// The next `count` calls throw an agent-unavailable error before the
  /// handler runs (transport-failure injection).
  void fail_next(int count);
  void set_latency_ms(std::int64_t value);
  /// Total calls made, including injected failures.
  int calls() const { return calls_.load(); }

  AgentCallResult call(const AgentRequest& request) override;

 private:
  AgentKind kind_;
  mutable std::mutex mutex_;
  Handler handler_;
  std::atomic<int> fail_budget_{0};
  std::atomic<int> calls_{0};
  std::int64_t latency_ms_ = 0;
};

/// The default scripts, exposed for reuse and for composing custom handlers.
///
/// Vision-language model:
///  - answer prompts: a question containing "obscured" yields the failure
///    token plus a MISSING line naming up to two words that follow
///    "obscured"; a question starting with "how many" yields "I count N ..."
///    where N is the last integer in the question (2 when absent), unless
///    the question contains "unsure", which yields a reply with no number at
///    all; anything else yields "It is <last word>."
///  - description prompts: a fixed sentence naming the label.
///  - reattempt prompts: a question containing "doublefail" fails again;
///    otherwise "It is beside the <alphabetically first described label>."
///    or, with no descriptions, the plain "It is <last word>." form.
/// Language model:
///  - analysis prompts are answered by actually analyzing the embedded
///    response span (failure token, MISSING line) and question ("how many").
///  - grading prompts compare the normalized candidate against the
///    normalized references: CORRECT on any match, INCORRECT otherwise.
/// Detector: one box per requested name (skipping the name "void"), with
/// position and confidence derived from a hash of the name.
/// Counter: density sum = length(target_object) + 0.7.
AgentResponse default_mock_lvlm(const AgentRequest& request);
AgentResponse default_mock_llm(const AgentRequest& request);
AgentResponse default_mock_detector(const AgentRequest& request);
AgentResponse default_mock_counter(const AgentRequest& request);

/// The deterministic box/confidence the default detector emits for a name.
Detection mock_detection_for(const std::string& name, int image_width, int image_height);

/// All four roles backed by the default scripts.
AgentBackends make_mock_backends();

}  // namespace vqaflow
