#pragma once

#include <string>
#include <vector>

#include "vqaflow/agents.hpp"
#include "vqaflow/errors.hpp"
#include "vqaflow/protocol.hpp"
#include "vqaflow/types.hpp"

namespace vqaflow {

// ---------------------------------------------------------------------------
// State machine
// ---------------------------------------------------------------------------

/// Milestones of one question's journey. Detected/Described mark the end of
/// those phases even when the phase issued no calls (nothing to detect,
/// nothing to describe).
enum class PipelineState {
  Init,
  InitialAttempted,
  Parsed,
  Detected,
  Described,
  Reattempted,
  Counted,
  Done,
  Graded,
};

const char* to_string(PipelineState state);

/// The legal transitions:
///   Init -> InitialAttempted -> Done | Parsed
///   Parsed -> Done | Detected | Counted
///   Detected -> Described -> Reattempted -> Done | Counted
///   Counted -> Done -> Graded
bool transition_allowed(PipelineState from, PipelineState to);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct PipelineConfig {
  AblationConfig ablation;
  /// The counting service runs when the initial numeric answer is absent or
  /// exceeds this many objects.
  int counter_trigger_threshold = 3;
  /// Worker cap for the per-detection description fan-out.
  int description_fanout_limit = 4;
  /// Fractional padding applied around detection boxes before cropping.
  double pad_frac = 0.1;
  DetectorOptions detector;
  /// Per-question wall-clock budget; 0 disables the limit.
  double budget_seconds = 300.0;
};

/// Throws a config error if any field is out of range.
void validate(const PipelineConfig& config);

struct PipelineRuntime {
  AgentBackends backends;
  const PromptLibrary* prompts = nullptr;
  RetryPolicy retry;
};

struct PipelineResult {
  FinalAnswer answer;
  PipelineTrace trace;
};

/// Raised when a question's run dies partway; carries whatever trace had
/// accumulated so the failure stays diagnosable.
class PipelineError : public Error {
 public:
  PipelineError(const Error& cause, PipelineTrace partial);
  const PipelineTrace& partial_trace() const { return trace_; }

 private:
  PipelineTrace trace_;
};

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

/// Run one question end to end: direct attempt, failure analysis, and — when
/// the attempt failed — detection, per-object description and a reattempt;
/// counting questions may finish with the dedicated counter. Returns the
/// final answer with its provenance and the full call trace. Any error
/// surfaces as PipelineError with the partial trace attached.
PipelineResult run_question(const VisualQuestion& question, const PipelineConfig& config,
                            const PipelineRuntime& runtime);

}  // namespace vqaflow
