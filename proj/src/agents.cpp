#include "vqaflow/agents.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "vqaflow/errors.hpp"
#include "vqaflow/fingerprint.hpp"
#include "vqaflow/imaging.hpp"
#include "vqaflow/textutil.hpp"

namespace vqaflow {

using nlohmann::json;

// ---------------------------------------------------------------------------
// AgentRequest
// ---------------------------------------------------------------------------

AgentRequest AgentRequest::lvlm(std::vector<std::uint8_t> image, std::string prompt) {
  AgentRequest request;
  request.kind = AgentKind::Lvlm;
  request.image = std::move(image);
  request.prompt = std::move(prompt);
  return request;
}

AgentRequest AgentRequest::llm(std::string prompt, std::optional<int> salt) {
  AgentRequest request;
  request.kind = AgentKind::Llm;
  request.prompt = std::move(prompt);
  request.salt = salt;
  return request;
}

AgentRequest AgentRequest::detect(std::vector<std::uint8_t> image, std::vector<std::string> names) {
  AgentRequest request;
  request.kind = AgentKind::Detector;
  request.image = std::move(image);
  request.object_names = std::move(names);
  return request;
}

AgentRequest AgentRequest::count(std::vector<std::uint8_t> image, std::string target) {
  AgentRequest request;
  request.kind = AgentKind::Counter;
  request.image = std::move(image);
  request.target_object = std::move(target);
  return request;
}

std::string AgentRequest::canonical_bytes() const {
  // nlohmann orders object keys lexicographically, so dump() is canonical as
  // long as the same fields are set for the same logical request. Only the
  // fields meaningful for the kind are serialized.
  json j;
  j["kind"] = json(kind);
  switch (kind) {
    case AgentKind::Lvlm:
      j["image"] = text::base64_encode(image);
      j["prompt"] = prompt;
      break;
    case AgentKind::Llm:
      j["prompt"] = prompt;
      if (salt.has_value()) j["salt"] = *salt;
      break;
    case AgentKind::Detector:
      j["image"] = text::base64_encode(image);
      j["object_names"] = object_names;
      break;
    case AgentKind::Counter:
      j["image"] = text::base64_encode(image);
      j["target_object"] = target_object;
      break;
  }
  return j.dump();
}

std::string AgentRequest::fingerprint() const { return fingerprint_request(kind, canonical_bytes()); }

// ---------------------------------------------------------------------------
// AgentResponse
// ---------------------------------------------------------------------------

AgentResponse AgentResponse::text(std::string value) {
  AgentResponse response;
  response.payload_ = std::move(value);
  return response;
}

AgentResponse AgentResponse::detections(std::vector<Detection> value) {
  AgentResponse response;
  response.payload_ = std::move(value);
  return response;
}

AgentResponse AgentResponse::count(double value) {
  AgentResponse response;
  response.payload_ = value;
  return response;
}

const std::string& AgentResponse::as_text() const {
  if (const auto* value = std::get_if<std::string>(&payload_)) return *value;
  throw Error(ErrorKind::Format, "agent response does not carry text");
}

const std::vector<Detection>& AgentResponse::as_detections() const {
  if (const auto* value = std::get_if<std::vector<Detection>>(&payload_)) return *value;
  throw Error(ErrorKind::Format, "agent response does not carry detections");
}

double AgentResponse::as_count() const {
  if (const auto* value = std::get_if<double>(&payload_)) return *value;
  throw Error(ErrorKind::Format, "agent response does not carry a count");
}

std::string AgentResponse::canonical_json() const {
  json j;
  if (const auto* value = std::get_if<std::string>(&payload_)) {
    j["text"] = *value;
  } else if (const auto* value = std::get_if<std::vector<Detection>>(&payload_)) {
    j["detections"] = *value;
  } else {
    j["count"] = std::get<double>(payload_);
  }
  return j.dump();
}

AgentResponse AgentResponse::from_canonical_json(const std::string& serialized) {
  json j;
  try {
    j = json::parse(serialized);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed agent response: ") + e.what());
  }
  if (j.contains("text")) return AgentResponse::text(j.at("text").get<std::string>());
  if (j.contains("detections"))
    return AgentResponse::detections(j.at("detections").get<std::vector<Detection>>());
  if (j.contains("count")) return AgentResponse::count(j.at("count").get<double>());
  throw Error(ErrorKind::Format, "agent response carries none of text/detections/count");
}

// ---------------------------------------------------------------------------
// Cassette
// ---------------------------------------------------------------------------

std::string cassette_entry_to_line(const CassetteEntry& entry) {
  json j;
  j["v"] = kSchemaVersion;
  j["fingerprint"] = entry.fingerprint;
  j["kind"] = json(entry.kind);
  j["recorded_latency_ms"] = entry.recorded_latency_ms;
  j["response"] = entry.response_json;
  return j.dump();
}

CassetteEntry cassette_entry_from_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed cassette line: ") + e.what());
  }
  CassetteEntry entry;
  try {
    entry.fingerprint = j.at("fingerprint").get<std::string>();
    entry.kind = j.at("kind").get<AgentKind>();
    entry.recorded_latency_ms = j.at("recorded_latency_ms").get<std::int64_t>();
    entry.response_json = j.at("response").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("cassette line missing field: ") + e.what());
  }
  return entry;
}

Cassette Cassette::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open cassette: " + path);
  Cassette cassette;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (text::trim(line).empty()) continue;
    try {
      cassette.put(cassette_entry_from_line(line));
    } catch (const Error& e) {
      throw Error(ErrorKind::Format,
                  path + ":" + std::to_string(line_number) + ": " + e.what());
    }
  }
  return cassette;
}

const CassetteEntry* Cassette::find(const std::string& fingerprint) const {
  auto it = entries_.find(fingerprint);
  return it == entries_.end() ? nullptr : &it->second;
}

void Cassette::put(CassetteEntry entry) {
  // Latest entry for a fingerprint wins; file order is insertion order.
  entries_.insert_or_assign(entry.fingerprint, std::move(entry));
}

CassetteRecorder::CassetteRecorder(const std::string& path)
    : out_(std::fopen(path.c_str(), "ab"), &std::fclose) {
  if (!out_) throw Error(ErrorKind::Io, "cannot open cassette for writing: " + path);
}

void CassetteRecorder::append(const CassetteEntry& entry) {
  const std::string line = cassette_entry_to_line(entry) + "\n";
  std::lock_guard<std::mutex> lock(mutex_);
  if (std::fwrite(line.data(), 1, line.size(), out_.get()) != line.size())
    throw Error(ErrorKind::Io, "cassette write failed");
  std::fflush(out_.get());
}

ReplayBackend::ReplayBackend(std::shared_ptr<const Cassette> cassette)
    : cassette_(std::move(cassette)) {}

AgentCallResult ReplayBackend::call(const AgentRequest& request) {
  const std::string fingerprint = request.fingerprint();
  const CassetteEntry* entry = cassette_->find(fingerprint);
  if (entry == nullptr)
    throw Error(ErrorKind::CassetteMiss,
                "no recorded response for fingerprint " + fingerprint);
  return AgentCallResult{AgentResponse::from_canonical_json(entry->response_json),
                         entry->recorded_latency_ms};
}

RecordingBackend::RecordingBackend(std::shared_ptr<AgentBackend> inner,
                                   std::shared_ptr<CassetteRecorder> recorder)
    : inner_(std::move(inner)), recorder_(std::move(recorder)) {}

AgentCallResult RecordingBackend::call(const AgentRequest& request) {
  AgentCallResult result = inner_->call(request);
  CassetteEntry entry;
  entry.fingerprint = request.fingerprint();
  entry.kind = request.kind;
  entry.response_json = result.response.canonical_json();
  entry.recorded_latency_ms = result.latency_ms;
  recorder_->append(entry);
  return result;
}

std::shared_ptr<AgentBackend> record_mode(std::shared_ptr<AgentBackend> inner,
                                          std::shared_ptr<CassetteRecorder> recorder) {
  return std::make_shared<RecordingBackend>(std::move(inner), std::move(recorder));
}

AgentBackends wrap_recording(const AgentBackends& inner, std::shared_ptr<CassetteRecorder> recorder) {
  AgentBackends wrapped;
  wrapped.lvlm = record_mode(inner.lvlm, recorder);
  wrapped.llm = record_mode(inner.llm, recorder);
  wrapped.detector = record_mode(inner.detector, recorder);
  wrapped.counter = record_mode(inner.counter, recorder);
  return wrapped;
}

AgentBackends make_replay_backends(const std::string& cassette_path) {
  auto cassette = std::make_shared<const Cassette>(Cassette::load(cassette_path));
  auto backend = std::make_shared<ReplayBackend>(cassette);
  return AgentBackends{backend, backend, backend, backend};
}

// ---------------------------------------------------------------------------
// TraceRecorder
// ---------------------------------------------------------------------------

PipelineTrace TraceRecorder::finish(std::string question_id) const {
  PipelineTrace trace;
  trace.question_id = std::move(question_id);
  trace.events = events_;
  trace.total_agent_calls = 0;
  for (const TraceEvent& event : events_)
    if (event.agent_kind.has_value()) ++trace.total_agent_calls;
  return trace;
}

// ---------------------------------------------------------------------------
// AgentSession
// ---------------------------------------------------------------------------

AgentSession::AgentSession(const AgentBackends& backends, RetryPolicy retry,
                           TraceRecorder* recorder, std::optional<Clock::time_point> deadline)
    : backends_(backends), retry_(retry), recorder_(recorder), deadline_(deadline) {
  if (retry_.attempts < 1) throw Error(ErrorKind::Config, "retry attempts must be >= 1");
}

void AgentSession::check_deadline() const {
  if (deadline_.has_value() && Clock::now() >= *deadline_)
    throw Error(ErrorKind::BudgetExceeded, "per-question time budget exhausted");
}

AgentCallResult AgentSession::call_with_retry(AgentBackend& backend, const AgentRequest& request,
                                              TraceStage stage, const std::string& summary_hint) {
  const std::string fingerprint = request.fingerprint();
  double backoff_ms = static_cast<double>(retry_.backoff_base_ms);
  for (int attempt = 1;; ++attempt) {
    check_deadline();
    const auto started = Clock::now();
    try {
      AgentCallResult result = backend.call(request);
      if (recorder_ != nullptr) {
        TraceEvent event;
        event.stage = stage;
        event.agent_kind = request.kind;
        event.request_fingerprint = fingerprint;
        event.response_summary = summary_hint.empty()
                                     ? text::summarize(result.response.canonical_json())
                                     : summary_hint;
        event.latency_ms = result.latency_ms;
        recorder_->add(std::move(event));
      }
      return result;
    } catch (const Error& e) {
      const auto elapsed =
          std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - started);
      if (recorder_ != nullptr) {
        TraceEvent event;
        event.stage = stage;
        event.agent_kind = request.kind;
        event.request_fingerprint = fingerprint;
        event.response_summary = std::string("error (") + to_string(e.kind()) + "): " +
                                 text::summarize(e.what());
        event.latency_ms = elapsed.count();
        recorder_->add(std::move(event));
      }
      // Only transport failures are retryable; contract and replay errors
      // would fail identically on every attempt.
      if (e.kind() != ErrorKind::AgentUnavailable || attempt >= retry_.attempts) throw;
      std::this_thread::sleep_for(
          std::chrono::milliseconds(static_cast<std::int64_t>(backoff_ms)));
      backoff_ms *= retry_.backoff_multiplier;
    }
  }
}

std::string AgentSession::lvlm_query(TraceStage stage, const std::vector<std::uint8_t>& image,
                                     const std::string& prompt) {
  if (prompt.empty()) throw Error(ErrorKind::InvalidInput, "empty prompt for vision-language query");
  if (image.empty()) throw Error(ErrorKind::InvalidInput, "empty image for vision-language query");
  AgentCallResult result =
      call_with_retry(*backends_.lvlm, AgentRequest::lvlm(image, prompt), stage, "");
  return result.response.as_text();
}

std::string AgentSession::llm_query(TraceStage stage, const std::string& prompt,
                                    std::optional<int> salt) {
  if (prompt.empty()) throw Error(ErrorKind::InvalidInput, "empty prompt for language query");
  AgentCallResult result =
      call_with_retry(*backends_.llm, AgentRequest::llm(prompt, salt), stage, "");
  return result.response.as_text();
}

std::vector<Detection> AgentSession::detect_objects(const std::vector<std::uint8_t>& image,
                                                    int image_width, int image_height,
                                                    const std::vector<std::string>& names,
                                                    const DetectorOptions& options) {
  if (image.empty()) throw Error(ErrorKind::InvalidInput, "empty image for detection");
  if (names.empty()) throw Error(ErrorKind::InvalidInput, "empty object-name list for detection");
  for (const std::string& name : names)
    if (text::trim(name).empty())
      throw Error(ErrorKind::InvalidInput, "blank object name in detection request");
  if (image_width <= 0 || image_height <= 0)
    throw Error(ErrorKind::InvalidInput, "non-positive image dimensions for detection");

  AgentCallResult result = call_with_retry(
      *backends_.detector, AgentRequest::detect(image, names), TraceStage::Detect, "");
  const std::vector<Detection>& raw = result.response.as_detections();

  // Sanitize: requested labels only, confidence clamped, boxes clamped to
  // the image (hopeless ones dropped).
  std::vector<Detection> kept;
  kept.reserve(raw.size());
  for (const Detection& hit : raw) {
    bool known = false;
    for (const std::string& name : names) known = known || name == hit.label;
    if (!known) continue;
    Detection cleaned = hit;
    cleaned.confidence = std::min(1.0, std::max(0.0, hit.confidence));
    if (cleaned.confidence < options.threshold) continue;
    try {
      cleaned.box = clamp_box(hit.box.x_min, hit.box.y_min, hit.box.x_max, hit.box.y_max,
                              image_width, image_height);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::UnsalvageableBox) continue;
      throw;
    }
    kept.push_back(std::move(cleaned));
  }

  std::stable_sort(kept.begin(), kept.end(), [](const Detection& a, const Detection& b) {
    return a.confidence > b.confidence;
  });

  // Cap per label, preserving the confidence ordering.
  std::vector<Detection> capped;
  capped.reserve(kept.size());
  std::unordered_map<std::string, int> per_label;
  for (Detection& hit : kept) {
    if (++per_label[hit.label] > options.max_boxes) continue;
    capped.push_back(std::move(hit));
  }

  if (recorder_ != nullptr && recorder_->last() != nullptr) {
    // Rewrite the generic summary of the event call_with_retry just appended.
    recorder_->last()->response_summary = std::to_string(capped.size()) +
                                          " detections after filtering (" +
                                          std::to_string(raw.size()) + " raw)";
  }
  return capped;
}

long long round_count(double density_sum) {
  if (!std::isfinite(density_sum)) return 0;
  const double rounded = std::floor(density_sum + 0.5);
  if (rounded <= 0.0) return 0;
  return static_cast<long long>(rounded);
}

long long AgentSession::count_objects(const std::vector<std::uint8_t>& image,
                                      const std::string& target) {
  if (image.empty()) throw Error(ErrorKind::InvalidInput, "empty image for counting");
  if (text::trim(target).empty())
    throw Error(ErrorKind::InvalidInput, "blank target object for counting");
  AgentCallResult result = call_with_retry(
      *backends_.counter, AgentRequest::count(image, target), TraceStage::Count, "");
  const long long count = round_count(result.response.as_count());
  if (recorder_ != nullptr && recorder_->last() != nullptr) {
    recorder_->last()->response_summary = "count " + std::to_string(count) + " (raw " +
                                          std::to_string(result.response.as_count()) + ")";
  }
  return count;
}

}  // namespace vqaflow
