#include "vqaflow/bench.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "vqaflow/grading.hpp"
#include "vqaflow/textutil.hpp"

namespace vqaflow {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Dataset loading
// ---------------------------------------------------------------------------

namespace {

QuestionType question_type_from_field(const json& value) {
  if (value.is_null()) return QuestionType::Unknown;
  const std::string name = value.get<std::string>();
  if (name == "yes/no") return QuestionType::YesNo;
  if (name == "number") return QuestionType::Number;
  if (name == "other") return QuestionType::Other;
  if (name == "unknown") return QuestionType::Unknown;
  throw Error(ErrorKind::Format, "unknown question type '" + name + "'");
}

std::string resolve_image_path(const std::string& image, const std::string& image_root) {
  if (image_root.empty() || image.starts_with('/')) return image;
  return image_root + "/" + image;
}

}  // namespace

Dataset load_dataset(const DatasetManifest& manifest) {
  if (manifest.format != DatasetFormat::NormalizedJsonl)
    throw Error(ErrorKind::Config, "unsupported dataset format");
  std::ifstream in(manifest.path);
  if (!in) throw Error(ErrorKind::Io, "cannot open dataset: " + manifest.path);

  Dataset dataset;
  dataset.name = manifest.name;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (text::trim(line).empty()) continue;
    const std::string where = manifest.path + ":" + std::to_string(line_number);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Format, where + ": malformed dataset line: " + e.what());
    }
    VisualQuestion question;
    try {
      question.id = j.at("id").get<std::string>();
      question.question = j.at("question").get<std::string>();
      question.question_type =
          j.contains("type") ? question_type_from_field(j.at("type")) : QuestionType::Unknown;
      if (j.contains("answers"))
        question.gold_answers = j.at("answers").get<std::vector<std::string>>();
      const std::string image = j.at("image").get<std::string>();
      question.image_ref =
          ImageRef::from_path(resolve_image_path(image, manifest.image_root));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Format, where + ": bad dataset record: " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorKind::Format, where + ": " + e.what());
    }
    if (question.id.empty()) throw Error(ErrorKind::Format, where + ": empty question id");
    if (text::trim(question.question).empty())
      throw Error(ErrorKind::Format, where + ": question '" + question.id + "' has empty text");
    if (!seen_ids.insert(question.id).second)
      throw Error(ErrorKind::Format, where + ": duplicate question id '" + question.id + "'");
    if (!std::filesystem::exists(question.image_ref.path))
      throw Error(ErrorKind::Io, "question '" + question.id +
                                     "': image not found: " + question.image_ref.path);
    dataset.questions.push_back(std::move(question));
  }

  if (manifest.declared_size.has_value() && *manifest.declared_size != dataset.questions.size())
    dataset.warnings.push_back("dataset " + dataset.name + " declares " +
                               std::to_string(*manifest.declared_size) + " questions but holds " +
                               std::to_string(dataset.questions.size()));
  return dataset;
}

// ---------------------------------------------------------------------------
// Benchmark runs
// ---------------------------------------------------------------------------

namespace {

std::map<std::string, int> calls_by_stage(const PipelineTrace& trace) {
  std::map<std::string, int> counts;
  for (const TraceEvent& event : trace.events)
    if (event.agent_kind.has_value()) ++counts[std::string(to_string(event.stage))];
  return counts;
}

struct ItemResult {
  QuestionRecord record;
  PipelineTrace trace;
};

/// Run and grade one question; every failure mode ends in a record, never an
/// exception.
ItemResult process_question(const VisualQuestion& question, const PipelineConfig& config,
                            const PipelineRuntime& runtime) {
  ItemResult item;
  item.record.id = question.id;
  try {
    PipelineResult result = run_question(question, config, runtime);
    item.record.final_answer = result.answer.text;
    item.record.provenance = result.answer.provenance;
    TraceRecorder recorder(std::move(result.trace.events));
    try {
      AgentSession session(runtime.backends, runtime.retry, &recorder);
      item.record.verdict = grade_answer(question, item.record.final_answer, *runtime.prompts,
                                         session);
    } catch (const Error& e) {
      item.record.error = std::string("grading failed (") + to_string(e.kind()) + "): " +
                          text::summarize(e.what());
    }
    item.trace = recorder.finish(question.id);
  } catch (const PipelineError& e) {
    item.record.provenance = Provenance::BestEffort;
    item.record.error =
        std::string(to_string(e.kind())) + ": " + text::summarize(e.what());
    item.trace = e.partial_trace();
  } catch (const std::exception& e) {
    item.record.error = std::string("unexpected: ") + text::summarize(e.what());
    item.trace = TraceRecorder{}.finish(question.id);
  }
  item.record.stage_sequence = item.trace.stage_sequence();
  item.record.agent_call_count = item.trace.total_agent_calls;
  item.record.calls_per_stage = calls_by_stage(item.trace);
  return item;
}

}  // namespace

BenchmarkReport aggregate_records(const Dataset& dataset, const AblationConfig& ablation,
                                  const std::vector<QuestionRecord>& records) {
  std::unordered_map<std::string, QuestionType> types;
  for (const VisualQuestion& question : dataset.questions)
    types.emplace(question.id, question.question_type);

  BenchmarkReport report;
  report.dataset_name = dataset.name;
  report.ablation = ablation;
  report.records = records;
  for (const QuestionRecord& record : records) {
    const auto it = types.find(record.id);
    if (it == types.end())
      throw Error(ErrorKind::Format,
                  "record id '" + record.id + "' does not appear in dataset " + dataset.name);
    TypeBucket& bucket = report.per_type[std::string(to_string(it->second))];
    bucket.total += 1;
    report.overall.total += 1;
    if (record.counted_correct()) {
      bucket.correct += 1;
      report.overall.correct += 1;
    }
    report.total_agent_calls += record.agent_call_count;
    for (const auto& [stage, calls] : record.calls_per_stage)
      report.agent_calls_per_stage[stage] += calls;
  }
  return report;
}

BenchmarkOutcome run_benchmark(const Dataset& dataset, const BenchmarkOptions& options,
                               const PipelineRuntime& runtime) {
  validate(options.pipeline);
  if (options.parallelism < 1) throw Error(ErrorKind::Config, "parallelism must be >= 1");
  if (options.resume && options.records_path.empty())
    throw Error(ErrorKind::Config, "resume requires a records file");
  if (runtime.prompts == nullptr)
    throw Error(ErrorKind::Config, "benchmark runtime carries no prompt library");

  // Working set: the dataset in order, optionally capped.
  std::vector<const VisualQuestion*> items;
  for (const VisualQuestion& question : dataset.questions) {
    if (options.limit.has_value() && items.size() >= *options.limit) break;
    items.push_back(&question);
  }
  if (items.empty()) throw Error(ErrorKind::InvalidInput, "benchmark over an empty dataset");

  // Resume: answers already on disk are reused, not re-run.
  std::unordered_map<std::string, QuestionRecord> existing;
  if (options.resume && std::filesystem::exists(options.records_path)) {
    std::unordered_set<std::string> dataset_ids;
    for (const VisualQuestion& question : dataset.questions) dataset_ids.insert(question.id);
    for (QuestionRecord& record : load_records(options.records_path)) {
      if (!dataset_ids.contains(record.id))
        throw Error(ErrorKind::Format, "records file " + options.records_path +
                                           " holds id '" + record.id +
                                           "' which is not in dataset " + dataset.name);
      existing.insert_or_assign(record.id, std::move(record));
    }
  }

  struct Slot {
    QuestionRecord record;
    PipelineTrace trace;
    bool resumed = false;
    bool ready = false;
  };
  std::vector<Slot> slots(items.size());
  std::mutex mutex;
  std::condition_variable ready_cv;
  std::size_t resumed_count = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto it = existing.find(items[i]->id);
    if (it == existing.end()) continue;
    slots[i].record = it->second;
    slots[i].resumed = true;
    slots[i].ready = true;
    ++resumed_count;
  }

  std::optional<std::ofstream> records_out;
  if (!options.records_path.empty()) {
    records_out.emplace(options.records_path,
                        options.resume ? std::ios::app : std::ios::trunc);
    if (!*records_out)
      throw Error(ErrorKind::Io, "cannot open records file: " + options.records_path);
  }
  std::optional<std::ofstream> trace_out;
  if (!options.trace_path.empty()) {
    trace_out.emplace(options.trace_path, options.resume ? std::ios::app : std::ios::trunc);
    if (!*trace_out) throw Error(ErrorKind::Io, "cannot open trace file: " + options.trace_path);
  }

  // Workers fill slots in whatever order they finish ...
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t index = next.fetch_add(1);
      if (index >= items.size()) return;
      if (slots[index].resumed) continue;
      ItemResult result = process_question(*items[index], options.pipeline, runtime);
      {
        std::lock_guard<std::mutex> lock(mutex);
        slots[index].record = std::move(result.record);
        slots[index].trace = std::move(result.trace);
        slots[index].ready = true;
      }
      ready_cv.notify_all();
    }
  };
  const std::size_t pool_size =
      std::min<std::size_t>(static_cast<std::size_t>(options.parallelism),
                            std::max<std::size_t>(items.size(), 1));
  std::vector<std::thread> pool;
  pool.reserve(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) pool.emplace_back(worker);

  // ... while this thread drains them strictly in dataset order, so the
  // output files come out identical no matter the parallelism, and an
  // interrupted run always leaves a resumable prefix.
  std::vector<QuestionRecord> records;
  records.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    Slot& slot = slots[i];
    {
      std::unique_lock<std::mutex> lock(mutex);
      ready_cv.wait(lock, [&] { return slot.ready; });
    }
    if (!slot.resumed) {
      if (records_out.has_value()) {
        *records_out << json(slot.record).dump() << "\n";
        records_out->flush();
        if (!*records_out)
          throw Error(ErrorKind::Io, "write to records file failed: " + options.records_path);
      }
      if (trace_out.has_value()) {
        *trace_out << trace_to_line(slot.trace) << "\n";
        trace_out->flush();
      }
    }
    if (options.on_record) options.on_record(slot.record);
    records.push_back(slot.record);
  }
  for (std::thread& thread : pool) thread.join();

  Dataset working;
  working.name = dataset.name;
  for (const VisualQuestion* question : items) working.questions.push_back(*question);
  BenchmarkOutcome outcome;
  outcome.report = aggregate_records(working, options.pipeline.ablation, records);
  outcome.resumed = resumed_count;
  return outcome;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

std::string bucket_cell(const std::map<std::string, TypeBucket>& per_type,
                        const std::string& key) {
  const auto it = per_type.find(key);
  if (it == per_type.end() || it->second.total == 0) return "— (0 items)";
  return format_hundredths(percent_hundredths(it->second.correct, it->second.total));
}

}  // namespace

std::string emit_report(const BenchmarkReport& report, ReportFormat format) {
  if (format == ReportFormat::StructuredText) return json(report).dump();

  std::ostringstream out;
  const std::string method = ablation_label(report.ablation);
  std::string accuracy;
  if (report.overall.total == 0) {
    accuracy = "— (0 items)";
  } else {
    accuracy = format_hundredths(percent_hundredths(report.overall.correct,
                                                    report.overall.total)) +
               " (" + bucket_cell(report.per_type, "yes/no") + ", " +
               bucket_cell(report.per_type, "number") + ", " +
               bucket_cell(report.per_type, "other") + ")";
    const auto unknown = report.per_type.find("unknown");
    if (unknown != report.per_type.end() && unknown->second.total > 0)
      accuracy += " [unknown-type: " + bucket_cell(report.per_type, "unknown") + "]";
  }
  out << "Dataset: " << report.dataset_name << "  (" << report.overall.total << " questions)\n";
  out << "\n";
  const std::size_t width = std::max<std::size_t>(method.size(), 6) + 2;
  out << "Method" << std::string(width - 6, ' ') << "Accuracy % overall (yes/no, number, other)\n";
  out << std::string(width - 2, '-') << "  " << std::string(42, '-') << "\n";
  out << method << std::string(width - method.size(), ' ') << accuracy << "\n";
  out << "\n";
  out << "Agent calls: " << report.total_agent_calls;
  if (!report.agent_calls_per_stage.empty()) {
    out << " (";
    bool first = true;
    for (const auto& [stage, calls] : report.agent_calls_per_stage) {
      if (!first) out << ", ";
      out << stage << " " << calls;
      first = false;
    }
    out << ")";
  }
  out << "\n";
  return out.str();
}

BenchmarkReport parse_report(const std::string& serialized) {
  try {
    return json::parse(serialized).get<BenchmarkReport>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed report: ") + e.what());
  }
}

std::vector<QuestionRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open records file: " + path);
  std::vector<QuestionRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (text::trim(line).empty()) continue;
    try {
      records.push_back(json::parse(line).get<QuestionRecord>());
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Format, path + ":" + std::to_string(line_number) +
                                         ": malformed record line: " + e.what());
    }
  }
  return records;
}

}  // namespace vqaflow
