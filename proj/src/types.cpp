#include "vqaflow/types.hpp"

#include <cstdio>

#include "vqaflow/errors.hpp"
#include "vqaflow/textutil.hpp"

namespace vqaflow {

namespace {

using nlohmann::json;

[[noreturn]] void bad_enum(const char* what, const std::string& value) {
  throw Error(ErrorKind::Format, std::string("unknown ") + what + " value '" + value + "'");
}

}  // namespace

const char* to_string(QuestionType t) {
  switch (t) {
    case QuestionType::YesNo: return "yes/no";
    case QuestionType::Number: return "number";
    case QuestionType::Other: return "other";
    case QuestionType::Unknown: return "unknown";
  }
  return "unknown";
}

QuestionType question_type_from_string(const std::string& s) {
  if (s == "yes/no") return QuestionType::YesNo;
  if (s == "number") return QuestionType::Number;
  if (s == "other") return QuestionType::Other;
  if (s == "unknown") return QuestionType::Unknown;
  bad_enum("question type", s);
}

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::Direct: return "direct";
    case Provenance::Reattempt: return "reattempt";
    case Provenance::Counter: return "counter";
    case Provenance::BestEffort: return "best_effort";
  }
  return "direct";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "direct") return Provenance::Direct;
  if (s == "reattempt") return Provenance::Reattempt;
  if (s == "counter") return Provenance::Counter;
  if (s == "best_effort") return Provenance::BestEffort;
  bad_enum("provenance", s);
}

const char* to_string(AgentKind k) {
  switch (k) {
    case AgentKind::Lvlm: return "lvlm";
    case AgentKind::Llm: return "llm";
    case AgentKind::Detector: return "detector";
    case AgentKind::Counter: return "counter";
  }
  return "lvlm";
}

AgentKind agent_kind_from_string(const std::string& s) {
  if (s == "lvlm") return AgentKind::Lvlm;
  if (s == "llm") return AgentKind::Llm;
  if (s == "detector") return AgentKind::Detector;
  if (s == "counter") return AgentKind::Counter;
  bad_enum("agent kind", s);
}

const char* to_string(TraceStage s) {
  switch (s) {
    case TraceStage::Initial: return "initial";
    case TraceStage::Parse: return "parse";
    case TraceStage::Detect: return "detect";
    case TraceStage::Describe: return "describe";
    case TraceStage::Reattempt: return "reattempt";
    case TraceStage::Count: return "count";
    case TraceStage::Grade: return "grade";
  }
  return "initial";
}

TraceStage trace_stage_from_string(const std::string& s) {
  if (s == "initial") return TraceStage::Initial;
  if (s == "parse") return TraceStage::Parse;
  if (s == "detect") return TraceStage::Detect;
  if (s == "describe") return TraceStage::Describe;
  if (s == "reattempt") return TraceStage::Reattempt;
  if (s == "count") return TraceStage::Count;
  if (s == "grade") return TraceStage::Grade;
  bad_enum("trace stage", s);
}

const char* to_string(GradeVote v) {
  switch (v) {
    case GradeVote::Correct: return "correct";
    case GradeVote::Incorrect: return "incorrect";
    case GradeVote::Abstain: return "abstain";
  }
  return "abstain";
}

GradeVote grade_vote_from_string(const std::string& s) {
  if (s == "correct") return GradeVote::Correct;
  if (s == "incorrect") return GradeVote::Incorrect;
  if (s == "abstain") return GradeVote::Abstain;
  bad_enum("grade vote", s);
}

const char* to_string(Majority m) {
  return m == Majority::Correct ? "correct" : "incorrect";
}

Majority majority_from_string(const std::string& s) {
  if (s == "correct") return Majority::Correct;
  if (s == "incorrect") return Majority::Incorrect;
  bad_enum("majority", s);
}

std::vector<std::string> PipelineTrace::stage_sequence() const {
  std::vector<std::string> out;
  for (const auto& ev : events) {
    std::string name = to_string(ev.stage);
    if (out.empty() || out.back() != name) out.push_back(std::move(name));
  }
  return out;
}

std::string ablation_label(const AblationConfig& a) {
  if (!a.use_multi_agent) return "w/o multi-agent";
  std::vector<std::string> parts;
  if (!a.detailed_cot) parts.push_back("w/o detailed CoT");
  if (!a.use_counter) parts.push_back("w/o counter");
  if (parts.empty()) return "final";
  std::string out = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) out += ", " + parts[i];
  return out;
}

long long percent_hundredths(long long correct, long long total) {
  if (total <= 0) throw Error(ErrorKind::InvalidInput, "percent of empty bucket");
  // round half up of 10000*correct/total
  return (20000 * correct + total) / (2 * total);
}

std::string format_hundredths(long long hundredths) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%lld.%02lld", hundredths / 100, hundredths % 100);
  return buf;
}

// ---------------------------------------------------------------------------
// JSON serde
// ---------------------------------------------------------------------------

void to_json(json& j, const ImageRef& v) {
  j = json::object();
  if (v.is_path()) {
    j["path"] = v.path;
  } else {
    j["bytes_b64"] = text::base64_encode(v.bytes);
  }
}

void from_json(const json& j, ImageRef& v) {
  v = ImageRef{};
  if (j.contains("path")) {
    v.path = j.at("path").get<std::string>();
  } else {
    v.bytes = text::base64_decode(j.at("bytes_b64").get<std::string>());
  }
}

void to_json(json& j, const VisualQuestion& v) {
  j = json{{"id", v.id},
           {"image_ref", v.image_ref},
           {"question", v.question},
           {"question_type", to_string(v.question_type)},
           {"gold_answers", v.gold_answers}};
}

void from_json(const json& j, VisualQuestion& v) {
  v.id = j.at("id").get<std::string>();
  v.image_ref = j.at("image_ref").get<ImageRef>();
  v.question = j.at("question").get<std::string>();
  v.question_type = question_type_from_string(j.at("question_type").get<std::string>());
  v.gold_answers = j.at("gold_answers").get<std::vector<std::string>>();
}

void to_json(json& j, const BoundingBox& v) {
  j = json::array({v.x_min, v.y_min, v.x_max, v.y_max});
}

void from_json(const json& j, BoundingBox& v) {
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorKind::Format, "bounding box must be [x_min,y_min,x_max,y_max]");
  }
  v.x_min = j[0].get<int>();
  v.y_min = j[1].get<int>();
  v.x_max = j[2].get<int>();
  v.y_max = j[3].get<int>();
}

void to_json(json& j, const Detection& v) {
  j = json{{"box", v.box}, {"confidence", v.confidence}, {"label", v.label}};
  if (v.mask_ref) j["mask_ref"] = *v.mask_ref;
}

void from_json(const json& j, Detection& v) {
  v.box = j.at("box").get<BoundingBox>();
  v.confidence = j.at("confidence").get<double>();
  v.label = j.at("label").get<std::string>();
  v.mask_ref.reset();
  if (j.contains("mask_ref")) v.mask_ref = j.at("mask_ref").get<std::string>();
}

void to_json(json& j, const ObjectDescription& v) {
  j = json{{"box", v.box}, {"description", v.description}, {"label", v.label}};
}

void from_json(const json& j, ObjectDescription& v) {
  v.box = j.at("box").get<BoundingBox>();
  v.description = j.at("description").get<std::string>();
  v.label = j.at("label").get<std::string>();
}

void to_json(json& j, const InitialAttempt& v) {
  j = json{{"raw_response", v.raw_response}, {"failed", v.failed}};
  if (v.failed) {
    j["missing_objects"] = v.missing_objects;
  } else {
    j["answer"] = v.answer;
  }
}

void from_json(const json& j, InitialAttempt& v) {
  v = InitialAttempt{};
  v.raw_response = j.at("raw_response").get<std::string>();
  v.failed = j.at("failed").get<bool>();
  if (v.failed) {
    v.missing_objects = j.at("missing_objects").get<std::vector<std::string>>();
  } else {
    v.answer = j.at("answer").get<std::string>();
  }
}

void to_json(json& j, const CountingDirective& v) {
  j = json{{"target_object", v.target_object}};
  if (v.initial_count) j["initial_count"] = *v.initial_count;
}

void from_json(const json& j, CountingDirective& v) {
  v.target_object = j.at("target_object").get<std::string>();
  v.initial_count.reset();
  if (j.contains("initial_count")) v.initial_count = j.at("initial_count").get<long long>();
}

void to_json(json& j, const ParseDirective& v) {
  j = json{{"failure_detected", v.failure_detected}, {"missing_objects", v.missing_objects}};
  if (v.counting) j["counting"] = *v.counting;
}

void from_json(const json& j, ParseDirective& v) {
  v.failure_detected = j.at("failure_detected").get<bool>();
  v.missing_objects = j.at("missing_objects").get<std::vector<std::string>>();
  v.counting.reset();
  if (j.contains("counting")) v.counting = j.at("counting").get<CountingDirective>();
}

void to_json(json& j, const FinalAnswer& v) {
  j = json{{"provenance", to_string(v.provenance)}, {"text", v.text}};
}

void from_json(const json& j, FinalAnswer& v) {
  v.provenance = provenance_from_string(j.at("provenance").get<std::string>());
  v.text = j.at("text").get<std::string>();
}

void to_json(json& j, const TraceEvent& v) {
  j = json{{"stage", to_string(v.stage)},
           {"fingerprint", v.request_fingerprint},
           {"summary", v.response_summary},
           {"latency_ms", v.latency_ms}};
  if (v.agent_kind) j["agent_kind"] = to_string(*v.agent_kind);
}

void from_json(const json& j, TraceEvent& v) {
  v.stage = trace_stage_from_string(j.at("stage").get<std::string>());
  v.request_fingerprint = j.at("fingerprint").get<std::string>();
  v.response_summary = j.at("summary").get<std::string>();
  v.latency_ms = j.at("latency_ms").get<std::int64_t>();
  v.agent_kind.reset();
  if (j.contains("agent_kind")) {
    v.agent_kind = agent_kind_from_string(j.at("agent_kind").get<std::string>());
  }
}

void to_json(json& j, const PipelineTrace& v) {
  j = json{{"question_id", v.question_id},
           {"events", v.events},
           {"total_agent_calls", v.total_agent_calls}};
}

void from_json(const json& j, PipelineTrace& v) {
  v.question_id = j.at("question_id").get<std::string>();
  v.events = j.at("events").get<std::vector<TraceEvent>>();
  v.total_agent_calls = j.at("total_agent_calls").get<int>();
}

void to_json(json& j, const GradeVerdict& v) {
  j = json{{"majority", to_string(v.majority)},
           {"votes", json::array({to_string(v.votes[0]), to_string(v.votes[1]),
                                  to_string(v.votes[2])})}};
}

void from_json(const json& j, GradeVerdict& v) {
  const auto& votes = j.at("votes");
  if (!votes.is_array() || votes.size() != 3) {
    throw Error(ErrorKind::Format, "verdict must carry exactly 3 votes");
  }
  for (std::size_t i = 0; i < 3; ++i) {
    v.votes[i] = grade_vote_from_string(votes[i].get<std::string>());
  }
  v.majority = majority_from_string(j.at("majority").get<std::string>());
}

void to_json(json& j, const AblationConfig& v) {
  j = json{{"detailed_cot", v.detailed_cot},
           {"use_counter", v.use_counter},
           {"use_multi_agent", v.use_multi_agent}};
}

void from_json(const json& j, AblationConfig& v) {
  v.detailed_cot = j.at("detailed_cot").get<bool>();
  v.use_counter = j.at("use_counter").get<bool>();
  v.use_multi_agent = j.at("use_multi_agent").get<bool>();
}

void to_json(json& j, const TypeBucket& v) {
  j = json{{"correct", v.correct}, {"total", v.total}};
  if (v.total > 0) j["accuracy"] = percent_hundredths(v.correct, v.total) / 100.0;
}

void from_json(const json& j, TypeBucket& v) {
  v.correct = j.at("correct").get<long long>();
  v.total = j.at("total").get<long long>();
}

void to_json(json& j, const QuestionRecord& v) {
  j = json{{"v", kSchemaVersion},
           {"id", v.id},
           {"final_answer", v.final_answer},
           {"provenance", to_string(v.provenance)},
           {"stage_sequence", v.stage_sequence},
           {"agent_call_count", v.agent_call_count},
           {"calls_per_stage", v.calls_per_stage}};
  if (v.verdict) {
    j["verdict"] = to_string(v.verdict->majority);
    j["votes"] = json::array({to_string(v.verdict->votes[0]), to_string(v.verdict->votes[1]),
                              to_string(v.verdict->votes[2])});
  }
  if (v.error) j["error"] = *v.error;
}

void from_json(const json& j, QuestionRecord& v) {
  v = QuestionRecord{};
  v.id = j.at("id").get<std::string>();
  v.final_answer = j.at("final_answer").get<std::string>();
  v.provenance = provenance_from_string(j.at("provenance").get<std::string>());
  v.stage_sequence = j.at("stage_sequence").get<std::vector<std::string>>();
  v.agent_call_count = j.at("agent_call_count").get<int>();
  if (j.contains("calls_per_stage"))
    v.calls_per_stage = j.at("calls_per_stage").get<std::map<std::string, int>>();
  if (j.contains("verdict")) {
    GradeVerdict verdict;
    verdict.majority = majority_from_string(j.at("verdict").get<std::string>());
    const auto& votes = j.at("votes");
    if (!votes.is_array() || votes.size() != 3) {
      throw Error(ErrorKind::Format, "record votes must have 3 entries");
    }
    for (std::size_t i = 0; i < 3; ++i) {
      verdict.votes[i] = grade_vote_from_string(votes[i].get<std::string>());
    }
    v.verdict = verdict;
  }
  if (j.contains("error")) v.error = j.at("error").get<std::string>();
}

void to_json(json& j, const BenchmarkReport& v) {
  j = json{{"v", kSchemaVersion},
           {"dataset", v.dataset_name},
           {"ablation", v.ablation},
           {"overall", v.overall},
           {"per_type", v.per_type},
           {"cost",
            json{{"total_agent_calls", v.total_agent_calls},
                 {"per_stage", v.agent_calls_per_stage}}},
           {"records", v.records}};
}

void from_json(const json& j, BenchmarkReport& v) {
  v = BenchmarkReport{};
  v.dataset_name = j.at("dataset").get<std::string>();
  v.ablation = j.at("ablation").get<AblationConfig>();
  v.overall = j.at("overall").get<TypeBucket>();
  v.per_type = j.at("per_type").get<std::map<std::string, TypeBucket>>();
  const auto& cost = j.at("cost");
  v.total_agent_calls = cost.at("total_agent_calls").get<long long>();
  v.agent_calls_per_stage = cost.at("per_stage").get<std::map<std::string, long long>>();
  v.records = j.at("records").get<std::vector<QuestionRecord>>();
}

std::string trace_to_line(const PipelineTrace& trace) {
  json j = trace;
  j["v"] = kSchemaVersion;
  return j.dump();
}

PipelineTrace trace_from_line(const std::string& line) {
  json j = json::parse(line);
  return j.get<PipelineTrace>();
}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::Io: return "io";
    case ErrorKind::Format: return "format";
    case ErrorKind::Config: return "config";
    case ErrorKind::ProtocolViolation: return "protocol-violation";
    case ErrorKind::AgentUnavailable: return "agent-unavailable";
    case ErrorKind::CassetteMiss: return "cassette-miss";
    case ErrorKind::UnsalvageableBox: return "unsalvageable-box";
    case ErrorKind::BudgetExceeded: return "budget-exceeded";
  }
  return "error";
}

}  // namespace vqaflow
