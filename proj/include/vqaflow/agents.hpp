#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "vqaflow/types.hpp"

namespace vqaflow {

// ---------------------------------------------------------------------------
// Requests and responses
// ---------------------------------------------------------------------------

/// One request to any of the four agent kinds. Field presence matches the
/// kind; the factory functions below are the only intended constructors.
struct AgentRequest {
  AgentKind kind = AgentKind::Llm;
  std::string prompt;                       // Lvlm, Llm
  std::vector<std::uint8_t> image;          // Lvlm, Detector, Counter (encoded image)
  std::vector<std::string> object_names;    // Detector
  std::string target_object;                // Counter
  std::optional<int> salt;                  // Llm: grader call index

  static AgentRequest lvlm(std::vector<std::uint8_t> image, std::string prompt);
  static AgentRequest llm(std::string prompt, std::optional<int> salt = std::nullopt);
  static AgentRequest detect(std::vector<std::uint8_t> image, std::vector<std::string> names);
  static AgentRequest count(std::vector<std::uint8_t> image, std::string target);

  /// Canonical serialization: sorted keys, kind embedded, no timestamps.
  /// This string is the fingerprint input and the live HTTP request body.
  std::string canonical_bytes() const;

  /// fingerprint_request over canonical_bytes().
  std::string fingerprint() const;
};

/// Typed response payload: text (Lvlm/Llm), detections (Detector) or a raw
/// density-map sum (Counter).
class AgentResponse {
 public:
  static AgentResponse text(std::string value);
  static AgentResponse detections(std::vector<Detection> value);
  static AgentResponse count(double value);

  const std::string& as_text() const;
  const std::vector<Detection>& as_detections() const;
  double as_count() const;

  std::string canonical_json() const;
  static AgentResponse from_canonical_json(const std::string& serialized);

  friend bool operator==(const AgentResponse&, const AgentResponse&) = default;

 private:
  std::variant<std::string, std::vector<Detection>, double> payload_;
};

struct AgentCallResult {
  AgentResponse response;
  std::int64_t latency_ms = 0;
};

/// Uniform backend contract. Implementations: HttpBackend (live JSON/HTTP),
/// ReplayBackend (cassette), ScriptedMockBackend, RecordingBackend
/// (wrapper). All implementations are safe for concurrent call()s.
class AgentBackend {
 public:
  virtual ~AgentBackend() = default;
  virtual AgentCallResult call(const AgentRequest& request) = 0;
};

/// The four agent roles a pipeline run needs.
struct AgentBackends {
  std::shared_ptr<AgentBackend> lvlm;
  std::shared_ptr<AgentBackend> llm;
  std::shared_ptr<AgentBackend> detector;
  std::shared_ptr<AgentBackend> counter;
};

// ---------------------------------------------------------------------------
// Cassette: fingerprint-keyed record/replay store
// ---------------------------------------------------------------------------

struct CassetteEntry {
  std::string fingerprint;
  AgentKind kind = AgentKind::Llm;
  std::string response_json;  // canonical serialized response
  std::int64_t recorded_latency_ms = 0;
};

/// In-memory cassette. File form is line-delimited JSON records; duplicate
/// fingerprints resolve to the latest entry.
class Cassette {
 public:
  Cassette() = default;
  static Cassette load(const std::string& path);

  const CassetteEntry* find(const std::string& fingerprint) const;
  void put(CassetteEntry entry);
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, CassetteEntry> entries_;
};

/// Append-only cassette writer shared by the four recording wrappers of a
/// run; appends are serialized and flushed per entry.
class CassetteRecorder {
 public:
  explicit CassetteRecorder(const std::string& path);
  void append(const CassetteEntry& entry);

 private:
  std::mutex mutex_;
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> out_;
};

std::string cassette_entry_to_line(const CassetteEntry& entry);
CassetteEntry cassette_entry_from_line(const std::string& line);

/// Replays recorded responses by fingerprint, order-independent. Performs no
/// network activity; a lookup miss raises CassetteMiss naming the
/// fingerprint.
class ReplayBackend : public AgentBackend {
 public:
  explicit ReplayBackend(std::shared_ptr<const Cassette> cassette);
  AgentCallResult call(const AgentRequest& request) override;

 private:
  std::shared_ptr<const Cassette> cassette_;
};

/// Forwards to an inner backend and appends every (fingerprint, response,
/// latency) to the cassette.
class RecordingBackend : public AgentBackend {
 public:
  RecordingBackend(std::shared_ptr<AgentBackend> inner, std::shared_ptr<CassetteRecorder> recorder);
  AgentCallResult call(const AgentRequest& request) override;

 private:
  std::shared_ptr<AgentBackend> inner_;
  std::shared_ptr<CassetteRecorder> recorder_;
};

/// Wrap one backend for recording into the given cassette file.
std::shared_ptr<AgentBackend> record_mode(std::shared_ptr<AgentBackend> inner,
                                          std::shared_ptr<CassetteRecorder> recorder);

/// Wrap all four backends for recording into one shared cassette file.
AgentBackends wrap_recording(const AgentBackends& inner, std::shared_ptr<CassetteRecorder> recorder);

/// A single replay backend instance serving all four roles.
AgentBackends make_replay_backends(const std::string& cassette_path);

// ---------------------------------------------------------------------------
// Session: retries, budget, trace recording
// ---------------------------------------------------------------------------

struct RetryPolicy {
  int attempts = 3;  // total attempts per call
  int backoff_base_ms = 250;
  double backoff_multiplier = 2.0;
};

struct DetectorOptions {
  double threshold = 0.3;
  int max_boxes = 10;  // per label
};

/// Collects the ordered trace events of one question's run.
class TraceRecorder {
 public:
  TraceRecorder() = default;
  /// Resume recording after the given events (e.g. to append grading).
  explicit TraceRecorder(std::vector<TraceEvent> events) : events_(std::move(events)) {}

  void add(TraceEvent event) { events_.push_back(std::move(event)); }
  void extend(const TraceRecorder& other) {
    events_.insert(events_.end(), other.events_.begin(), other.events_.end());
  }
  const std::vector<TraceEvent>& events() const { return events_; }
  TraceEvent* last() { return events_.empty() ? nullptr : &events_.back(); }

  PipelineTrace finish(std::string question_id) const;

 private:
  std::vector<TraceEvent> events_;
};

/// Per-run facade over the four backends: retries transport failures with
/// exponential backoff (every attempt is a trace event, so total calls stay
/// observable), enforces the wall-clock budget, sanitizes detector output,
/// and applies the counter's rounding rule.
class AgentSession {
 public:
  using Clock = std::chrono::steady_clock;

  AgentSession(const AgentBackends& backends, RetryPolicy retry, TraceRecorder* recorder,
               std::optional<Clock::time_point> deadline = std::nullopt);

  std::string lvlm_query(TraceStage stage, const std::vector<std::uint8_t>& image,
                         const std::string& prompt);
  std::string llm_query(TraceStage stage, const std::string& prompt,
                        std::optional<int> salt = std::nullopt);

  /// Raw hits are sanitized: foreign labels dropped, confidence clamped to
  /// [0,1], boxes clamped to the image (unsalvageable ones dropped), then
  /// filtered to confidence >= threshold, ordered by descending confidence
  /// and capped at max_boxes per label.
  std::vector<Detection> detect_objects(const std::vector<std::uint8_t>& image, int image_width,
                                        int image_height, const std::vector<std::string>& names,
                                        const DetectorOptions& options);

  /// Counting service's real-valued density sum rounded half up, floored at 0.
  long long count_objects(const std::vector<std::uint8_t>& image, const std::string& target);

  TraceRecorder* recorder() { return recorder_; }

 private:
  AgentCallResult call_with_retry(AgentBackend& backend, const AgentRequest& request,
                                  TraceStage stage, const std::string& summary_hint);
  void check_deadline() const;

  const AgentBackends& backends_;
  RetryPolicy retry_;
  TraceRecorder* recorder_;
  std::optional<Clock::time_point> deadline_;
};

/// Round half up to a non-negative integer (counter rule).
long long round_count(double density_sum);

}  // namespace vqaflow
