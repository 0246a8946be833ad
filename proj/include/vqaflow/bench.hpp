#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vqaflow/pipeline.hpp"
#include "vqaflow/types.hpp"

namespace vqaflow {

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

enum class DatasetFormat { NormalizedJsonl };

struct DatasetManifest {
  std::string name;
  DatasetFormat format = DatasetFormat::NormalizedJsonl;
  std::string path;        // line-delimited JSON questions
  std::string image_root;  // prefix for relative image paths; "" = as-is
  std::optional<std::size_t> declared_size;
};

struct Dataset {
  std::string name;
  std::vector<VisualQuestion> questions;
  std::vector<std::string> warnings;  // non-fatal findings (e.g. size mismatch)
};

/// Load and validate a normalized dataset: every line an object with id,
/// image, question, type (may be null) and answers. Malformed lines and
/// duplicate ids fail with the line number; a question whose image file does
/// not exist fails naming the record. A declared-size mismatch is returned
/// as a warning, not an error.
Dataset load_dataset(const DatasetManifest& manifest);

// ---------------------------------------------------------------------------
// Benchmark runs
// ---------------------------------------------------------------------------

struct BenchmarkOptions {
  PipelineConfig pipeline;
  int parallelism = 1;
  std::string records_path;  // per-question records (line-delimited JSON); "" = keep in memory
  std::string trace_path;    // full call traces; "" = do not write
  /// Keep the records already in records_path and run only the missing
  /// questions. Works because records are always written in dataset order,
  /// so an interrupted run leaves a clean prefix.
  bool resume = false;
  std::optional<std::size_t> limit;  // cap on questions taken from the dataset
  std::function<void(const QuestionRecord&)> on_record;  // progress hook, called in dataset order
};

struct BenchmarkOutcome {
  BenchmarkReport report;
  std::size_t resumed = 0;  // questions answered from the existing records file
};

/// Run every dataset question through the pipeline, grade each final answer,
/// and aggregate accuracy per question type plus agent-call cost. Individual
/// failures never abort the run: the question gets a record with the error
/// noted and no verdict, which counts as incorrect. Records and traces are
/// written in dataset order whatever the parallelism, so output files are
/// byte-stable and resumable.
BenchmarkOutcome run_benchmark(const Dataset& dataset, const BenchmarkOptions& options,
                               const PipelineRuntime& runtime);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

enum class ReportFormat { PlainTable, StructuredText };

/// PlainTable renders the accuracy summary for reading; StructuredText is a
/// single JSON line that parse_report restores exactly.
std::string emit_report(const BenchmarkReport& report, ReportFormat format);
BenchmarkReport parse_report(const std::string& serialized);

/// Load the records file written by a benchmark run (e.g. for reporting).
std::vector<QuestionRecord> load_records(const std::string& path);

/// Aggregate records into a report; types come from the paired dataset.
BenchmarkReport aggregate_records(const Dataset& dataset, const AblationConfig& ablation,
                                  const std::vector<QuestionRecord>& records);

}  // namespace vqaflow
