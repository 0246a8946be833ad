#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vqaflow {

// ---------------------------------------------------------------------------
// Question / answer domain
// ---------------------------------------------------------------------------

enum class QuestionType { YesNo, Number, Other, Unknown };

const char* to_string(QuestionType t);
QuestionType question_type_from_string(const std::string& s);

/// Where a question's image lives: a file on disk or an in-memory encoded
/// payload (PNG/JPEG bytes). Exactly one of the two is set.
struct ImageRef {
  std::string path;
  std::vector<std::uint8_t> bytes;

  static ImageRef from_path(std::string p) { return ImageRef{std::move(p), {}}; }
  static ImageRef from_bytes(std::vector<std::uint8_t> b) { return ImageRef{{}, std::move(b)}; }
  bool is_path() const { return !path.empty(); }

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct VisualQuestion {
  std::string id;
  ImageRef image_ref;
  std::string question;
  QuestionType question_type = QuestionType::Unknown;
  std::vector<std::string> gold_answers;

  friend bool operator==(const VisualQuestion&, const VisualQuestion&) = default;
};

// ---------------------------------------------------------------------------
// Detection domain
// ---------------------------------------------------------------------------

/// Pixel-coordinate box, half-open on neither end: valid iff
/// 0 <= x_min < x_max <= width and 0 <= y_min < y_max <= height.
struct BoundingBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const { return x_max - x_min; }
  int height() const { return y_max - y_min; }
  bool valid_for(int image_width, int image_height) const {
    return 0 <= x_min && x_min < x_max && x_max <= image_width && 0 <= y_min && y_min < y_max &&
           y_max <= image_height;
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Detection {
  std::string label;
  BoundingBox box;
  double confidence = 0.0;
  std::optional<std::string> mask_ref;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct ObjectDescription {
  std::string label;
  BoundingBox box;
  std::string description;

  friend bool operator==(const ObjectDescription&, const ObjectDescription&) = default;
};

// ---------------------------------------------------------------------------
// Pipeline routing domain
// ---------------------------------------------------------------------------

/// The LVLM's first response, split into outcome per the failure-token
/// contract: failed iff the raw response contains the failure token.
struct InitialAttempt {
  std::string raw_response;
  bool failed = false;
  std::string answer;                        // set when !failed
  std::vector<std::string> missing_objects;  // set when failed (may be empty)

  friend bool operator==(const InitialAttempt&, const InitialAttempt&) = default;
};

struct CountingDirective {
  std::string target_object;
  std::optional<long long> initial_count;

  friend bool operator==(const CountingDirective&, const CountingDirective&) = default;
};

/// Routing decision produced by the LLM parsing agent.
struct ParseDirective {
  bool failure_detected = false;
  std::vector<std::string> missing_objects;
  std::optional<CountingDirective> counting;

  friend bool operator==(const ParseDirective&, const ParseDirective&) = default;
};

enum class Provenance { Direct, Reattempt, Counter, BestEffort };

const char* to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct FinalAnswer {
  std::string text;
  Provenance provenance = Provenance::Direct;

  friend bool operator==(const FinalAnswer&, const FinalAnswer&) = default;
};

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

enum class AgentKind { Lvlm, Llm, Detector, Counter };

const char* to_string(AgentKind k);
AgentKind agent_kind_from_string(const std::string& s);

enum class TraceStage { Initial, Parse, Detect, Describe, Reattempt, Count, Grade };

const char* to_string(TraceStage s);
TraceStage trace_stage_from_string(const std::string& s);

struct TraceEvent {
  TraceStage stage = TraceStage::Initial;
  std::optional<AgentKind> agent_kind;  // absent for non-call events (warnings)
  std::string request_fingerprint;      // empty for non-call events
  std::string response_summary;
  std::int64_t latency_ms = 0;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

/// Ordered, replayable log of everything one question's run did.
struct PipelineTrace {
  std::string question_id;
  std::vector<TraceEvent> events;
  int total_agent_calls = 0;  // == count of events carrying an agent_kind

  /// Stage names in event order, consecutive duplicates collapsed.
  std::vector<std::string> stage_sequence() const;

  friend bool operator==(const PipelineTrace&, const PipelineTrace&) = default;
};

// ---------------------------------------------------------------------------
// Grading
// ---------------------------------------------------------------------------

enum class GradeVote { Correct, Incorrect, Abstain };

const char* to_string(GradeVote v);
GradeVote grade_vote_from_string(const std::string& s);

enum class Majority { Correct, Incorrect };

const char* to_string(Majority m);
Majority majority_from_string(const std::string& s);

struct GradeVerdict {
  std::array<GradeVote, 3> votes{GradeVote::Abstain, GradeVote::Abstain, GradeVote::Abstain};
  Majority majority = Majority::Incorrect;

  friend bool operator==(const GradeVerdict&, const GradeVerdict&) = default;
};

// ---------------------------------------------------------------------------
// Benchmark reporting
// ---------------------------------------------------------------------------

/// Ablation switches of the pipeline. use_multi_agent=false forces
/// single-LVLM answering regardless of the other flags.
struct AblationConfig {
  bool detailed_cot = true;
  bool use_counter = true;
  bool use_multi_agent = true;

  friend bool operator==(const AblationConfig&, const AblationConfig&) = default;
};

/// Human-readable row label for a report ("final", "w/o counter", ...).
std::string ablation_label(const AblationConfig& a);

struct TypeBucket {
  long long correct = 0;
  long long total = 0;

  friend bool operator==(const TypeBucket&, const TypeBucket&) = default;
};

/// Percent with two decimals, round half up, as integer hundredths.
/// 50% -> 5000. Exact integer arithmetic; total must be > 0.
long long percent_hundredths(long long correct, long long total);

/// "78.02" style rendering of integer hundredths.
std::string format_hundredths(long long hundredths);

struct QuestionRecord {
  std::string id;
  std::string final_answer;
  Provenance provenance = Provenance::Direct;
  std::optional<GradeVerdict> verdict;  // absent when the item errored
  std::vector<std::string> stage_sequence;
  int agent_call_count = 0;
  // Calls by stage name; values sum to agent_call_count. Kept on the record
  // so resumed runs can rebuild the report's cost breakdown exactly.
  std::map<std::string, int> calls_per_stage;
  std::optional<std::string> error;

  bool counted_correct() const {
    return verdict.has_value() && verdict->majority == Majority::Correct;
  }

  friend bool operator==(const QuestionRecord&, const QuestionRecord&) = default;
};

struct BenchmarkReport {
  std::string dataset_name;
  AblationConfig ablation;
  TypeBucket overall;
  // Keys: "yes/no", "number", "other", plus "unknown" only when such items
  // exist, so bucket totals always sum to the dataset size.
  std::map<std::string, TypeBucket> per_type;
  std::map<std::string, long long> agent_calls_per_stage;
  long long total_agent_calls = 0;
  std::vector<QuestionRecord> records;

  friend bool operator==(const BenchmarkReport&, const BenchmarkReport&) = default;
};

// ---------------------------------------------------------------------------
// JSON serde (nlohmann ADL hooks). Canonical form: object keys sorted,
// optionals omitted when absent. Every container type carries "v": 1 at the
// file-format layer (trace lines, record lines, cassette lines, report).
// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const ImageRef& v);
void from_json(const nlohmann::json& j, ImageRef& v);
void to_json(nlohmann::json& j, const VisualQuestion& v);
void from_json(const nlohmann::json& j, VisualQuestion& v);
void to_json(nlohmann::json& j, const BoundingBox& v);
void from_json(const nlohmann::json& j, BoundingBox& v);
void to_json(nlohmann::json& j, const Detection& v);
void from_json(const nlohmann::json& j, Detection& v);
void to_json(nlohmann::json& j, const ObjectDescription& v);
void from_json(const nlohmann::json& j, ObjectDescription& v);
void to_json(nlohmann::json& j, const InitialAttempt& v);
void from_json(const nlohmann::json& j, InitialAttempt& v);
void to_json(nlohmann::json& j, const CountingDirective& v);
void from_json(const nlohmann::json& j, CountingDirective& v);
void to_json(nlohmann::json& j, const ParseDirective& v);
void from_json(const nlohmann::json& j, ParseDirective& v);
void to_json(nlohmann::json& j, const FinalAnswer& v);
void from_json(const nlohmann::json& j, FinalAnswer& v);
void to_json(nlohmann::json& j, const TraceEvent& v);
void from_json(const nlohmann::json& j, TraceEvent& v);
void to_json(nlohmann::json& j, const PipelineTrace& v);
void from_json(const nlohmann::json& j, PipelineTrace& v);
void to_json(nlohmann::json& j, const GradeVerdict& v);
void from_json(const nlohmann::json& j, GradeVerdict& v);
void to_json(nlohmann::json& j, const AblationConfig& v);
void from_json(const nlohmann::json& j, AblationConfig& v);
void to_json(nlohmann::json& j, const TypeBucket& v);
void from_json(const nlohmann::json& j, TypeBucket& v);
void to_json(nlohmann::json& j, const QuestionRecord& v);
void from_json(const nlohmann::json& j, QuestionRecord& v);
void to_json(nlohmann::json& j, const BenchmarkReport& v);
void from_json(const nlohmann::json& j, BenchmarkReport& v);

/// Current schema version stamped on every serialized file record.
inline constexpr int kSchemaVersion = 1;

/// One-line serialization used by the line-delimited file formats.
std::string trace_to_line(const PipelineTrace& trace);
PipelineTrace trace_from_line(const std::string& line);

}  // namespace vqaflow
