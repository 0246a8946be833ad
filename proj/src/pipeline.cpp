#include "vqaflow/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "vqaflow/imaging.hpp"
#include "vqaflow/textutil.hpp"

namespace vqaflow {

const char* to_string(PipelineState state) {
  switch (state) {
    case PipelineState::Init:
      return "init";
    case PipelineState::InitialAttempted:
      return "initial-attempted";
    case PipelineState::Parsed:
      return "parsed";
    case PipelineState::Detected:
      return "detected";
    case PipelineState::Described:
      return "described";
    case PipelineState::Reattempted:
      return "reattempted";
    case PipelineState::Counted:
      return "counted";
    case PipelineState::Done:
      return "done";
    case PipelineState::Graded:
      return "graded";
  }
  return "?";
}

bool transition_allowed(PipelineState from, PipelineState to) {
  using S = PipelineState;
  switch (from) {
    case S::Init:
      return to == S::InitialAttempted;
    case S::InitialAttempted:
      return to == S::Done || to == S::Parsed;
    case S::Parsed:
      return to == S::Done || to == S::Detected || to == S::Counted;
    case S::Detected:
      return to == S::Described;
    case S::Described:
      return to == S::Reattempted;
    case S::Reattempted:
      return to == S::Done || to == S::Counted;
    case S::Counted:
      return to == S::Done;
    case S::Done:
      return to == S::Graded;
    case S::Graded:
      return false;
  }
  return false;
}

void validate(const PipelineConfig& config) {
  if (config.counter_trigger_threshold < 0)
    throw Error(ErrorKind::Config, "counter trigger threshold must be >= 0");
  if (config.description_fanout_limit < 1)
    throw Error(ErrorKind::Config, "description fan-out limit must be >= 1");
  if (config.pad_frac < 0.0) throw Error(ErrorKind::Config, "crop padding must be >= 0");
  if (config.detector.threshold < 0.0 || config.detector.threshold > 1.0)
    throw Error(ErrorKind::Config, "detector threshold must lie in [0, 1]");
  if (config.detector.max_boxes < 1)
    throw Error(ErrorKind::Config, "detector box cap must be >= 1");
  if (config.budget_seconds < 0.0)
    throw Error(ErrorKind::Config, "time budget must be >= 0");
}

PipelineError::PipelineError(const Error& cause, PipelineTrace partial)
    : Error(cause.kind(), cause.what()), trace_(std::move(partial)) {}

namespace {

/// Tracks the current milestone and rejects illegal jumps. Violations are
/// programming errors; the check keeps them loud.
class StateMachine {
 public:
  void advance(PipelineState to) {
    if (!transition_allowed(state_, to))
      throw Error(ErrorKind::InvalidInput, std::string("illegal pipeline transition ") +
                                               to_string(state_) + " -> " + to_string(to));
    state_ = to;
  }
  PipelineState state() const { return state_; }

 private:
  PipelineState state_ = PipelineState::Init;
};

struct DescribeSlot {
  TraceRecorder recorder;
  std::optional<ObjectDescription> description;
};

/// Describe every detection from its padded crop, at most `fanout` calls in
/// flight. Events land in the main recorder in detection order regardless of
/// completion order; a description that keeps failing is dropped with a
/// warning event rather than sinking the question. Budget exhaustion still
/// aborts.
std::vector<ObjectDescription> describe_detections(
    const Image& image, const std::vector<Detection>& detections, const VisualQuestion& question,
    const PipelineConfig& config, const PipelineRuntime& runtime, TraceRecorder& recorder,
    std::optional<AgentSession::Clock::time_point> deadline) {
  std::vector<DescribeSlot> slots(detections.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> aborted{false};
  std::exception_ptr fatal;
  std::mutex fatal_mutex;

  auto worker = [&] {
    while (!aborted.load()) {
      const std::size_t index = next.fetch_add(1);
      if (index >= detections.size()) return;
      DescribeSlot& slot = slots[index];
      const Detection& detection = detections[index];
      AgentSession session(runtime.backends, runtime.retry, &slot.recorder, deadline);
      try {
        const Image view = crop(image, detection.box, config.pad_frac);
        const std::string prompt =
            runtime.prompts->render_description(question.question, detection.label);
        const std::string described =
            session.lvlm_query(TraceStage::Describe, encode_canonical(view), prompt);
        slot.description = ObjectDescription{detection.label, detection.box, described};
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::BudgetExceeded) {
          std::lock_guard<std::mutex> lock(fatal_mutex);
          if (!fatal) fatal = std::current_exception();
          aborted.store(true);
          return;
        }
        // Keep going with the descriptions we do get.
        TraceEvent warning;
        warning.stage = TraceStage::Describe;
        warning.response_summary = "description of '" + detection.label +
                                   "' dropped: " + text::summarize(e.what());
        slot.recorder.add(std::move(warning));
      } catch (...) {
        std::lock_guard<std::mutex> lock(fatal_mutex);
        if (!fatal) fatal = std::current_exception();
        aborted.store(true);
        return;
      }
    }
  };

  const std::size_t fanout = std::min<std::size_t>(
      detections.size(), static_cast<std::size_t>(config.description_fanout_limit));
  std::vector<std::thread> pool;
  pool.reserve(fanout);
  for (std::size_t i = 0; i < fanout; ++i) pool.emplace_back(worker);
  for (std::thread& thread : pool) thread.join();

  std::vector<ObjectDescription> descriptions;
  for (DescribeSlot& slot : slots) {
    recorder.extend(slot.recorder);
    if (slot.description.has_value()) descriptions.push_back(std::move(*slot.description));
  }
  if (fatal) std::rethrow_exception(fatal);
  return descriptions;
}

}  // namespace

PipelineResult run_question(const VisualQuestion& question, const PipelineConfig& config,
                            const PipelineRuntime& runtime) {
  validate(config);
  if (runtime.prompts == nullptr)
    throw Error(ErrorKind::Config, "pipeline runtime carries no prompt library");
  if (question.id.empty()) throw Error(ErrorKind::InvalidInput, "question has no id");
  if (text::trim(question.question).empty())
    throw Error(ErrorKind::InvalidInput, "question " + question.id + " has empty text");

  TraceRecorder recorder;
  std::optional<AgentSession::Clock::time_point> deadline;
  if (config.budget_seconds > 0.0)
    deadline = AgentSession::Clock::now() +
               std::chrono::milliseconds(static_cast<std::int64_t>(config.budget_seconds * 1000.0));

  try {
    const Image image = load_image(question.image_ref);
    const std::vector<std::uint8_t> canonical = encode_canonical(image);

    AgentSession session(runtime.backends, runtime.retry, &recorder, deadline);
    StateMachine state;

    // (1) Direct attempt.
    const std::string initial_prompt =
        runtime.prompts->render_initial(question.question, config.ablation.detailed_cot);
    const std::string initial_raw =
        session.lvlm_query(TraceStage::Initial, canonical, initial_prompt);
    state.advance(PipelineState::InitialAttempted);

    if (!config.ablation.use_multi_agent) {
      // Single-model mode: the direct reply is final, markup scrubbed.
      state.advance(PipelineState::Done);
      return PipelineResult{FinalAnswer{strip_failure_markup(initial_raw), Provenance::Direct},
                            recorder.finish(question.id)};
    }

    // (2) Response analysis.
    const ParseDirective directive = parse_directive(
        question.question, initial_raw,
        [&](const std::string& prompt) { return session.llm_query(TraceStage::Parse, prompt); },
        *runtime.prompts);
    state.advance(PipelineState::Parsed);

    FinalAnswer answer{text::trim(initial_raw), Provenance::Direct};

    if (directive.failure_detected) {
      // (3) Locate the missed objects. An empty name list leaves both
      // phases trivially complete.
      std::vector<Detection> detections;
      if (!directive.missing_objects.empty())
        detections = session.detect_objects(canonical, image.width, image.height,
                                            directive.missing_objects, config.detector);
      state.advance(PipelineState::Detected);

      // (4) Describe each located object from its own padded crop.
      std::vector<ObjectDescription> descriptions;
      if (!detections.empty())
        descriptions = describe_detections(image, detections, question, config, runtime,
                                           recorder, deadline);
      state.advance(PipelineState::Described);

      // (5) Reattempt with the gathered evidence.
      const std::string reattempt_prompt =
          runtime.prompts->render_reattempt(question.question, initial_raw, descriptions);
      const std::string reattempt_raw =
          session.lvlm_query(TraceStage::Reattempt, canonical, reattempt_prompt);
      state.advance(PipelineState::Reattempted);

      if (detect_failure_token(reattempt_raw))
        answer = FinalAnswer{strip_failure_markup(reattempt_raw), Provenance::BestEffort};
      else
        answer = FinalAnswer{text::trim(reattempt_raw), Provenance::Reattempt};
    }

    // (6) Counting questions: a numeric answer that is missing or names
    // more objects than the trigger threshold goes to the dedicated
    // counter, whose result overrides everything before it.
    if (directive.counting.has_value() && config.ablation.use_counter) {
      const std::optional<long long> n = directive.counting->initial_count;
      if (!n.has_value() || *n > config.counter_trigger_threshold) {
        const long long count =
            session.count_objects(canonical, directive.counting->target_object);
        state.advance(PipelineState::Counted);
        answer = FinalAnswer{std::to_string(count), Provenance::Counter};
      }
    }

    state.advance(PipelineState::Done);
    return PipelineResult{std::move(answer), recorder.finish(question.id)};
  } catch (const PipelineError&) {
    throw;
  } catch (const Error& e) {
    throw PipelineError(e, recorder.finish(question.id));
  }
}

}  // namespace vqaflow
