#include "vqaflow/cli_commands.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "vqaflow/bench.hpp"
#include "vqaflow/errors.hpp"
#include "vqaflow/grading.hpp"
#include "vqaflow/pipeline.hpp"
#include "vqaflow/protocol.hpp"
#include "vqaflow/run_config.hpp"

namespace vqaflow::cli {

using nlohmann::json;

AblationConfig apply_ablations(AblationConfig base, const std::vector<std::string>& names) {
  for (const std::string& name : names) {
    if (name == "no-cot")
      base.detailed_cot = false;
    else if (name == "no-counter")
      base.use_counter = false;
    else if (name == "no-multi-agent")
      base.use_multi_agent = false;
    else
      throw Error(ErrorKind::Config, "unknown ablation '" + name +
                                         "' (valid: no-cot, no-counter, no-multi-agent)");
  }
  return base;
}

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

/// Everything parsed from the command line; empty strings mean "not given".
struct CliArgs {
  std::string config_path;
  bool quiet = false;

  std::string backend;
  std::string endpoint;
  std::string auth_env;
  std::string cassette;
  std::string templates_dir;
  int parallelism = 0;  // 0 = keep config value

  std::vector<std::string> ablations;

  // ask
  std::string image;
  std::string question;
  std::string id = "q1";

  // bench / record / report
  std::string dataset_path;
  std::string image_root;
  std::string dataset_name;
  std::optional<std::size_t> limit;
  bool resume = false;
  std::string records_path;
  std::string report_path;
  std::string trace_path;
  std::string format = "table";
};

/// Merge file config (if any) with command-line overrides.
RunConfig effective_config(const CliArgs& args) {
  RunConfig config;
  if (!args.config_path.empty()) config = load_run_config(args.config_path);
  if (!args.backend.empty()) {
    // A flag selects one mode for all four agents, overriding any per-kind
    // file settings.
    config.backend = backend_mode_from_string(args.backend);
    config.backend_per_kind.clear();
  }
  if (!args.endpoint.empty()) config.endpoint = args.endpoint;
  if (!args.auth_env.empty()) config.auth_env = args.auth_env;
  if (!args.cassette.empty()) config.cassette = args.cassette;
  if (!args.templates_dir.empty()) config.templates_dir = args.templates_dir;
  if (args.parallelism > 0) config.parallelism = args.parallelism;
  if (!args.records_path.empty()) config.records_path = args.records_path;
  if (!args.report_path.empty()) config.report_path = args.report_path;
  if (!args.trace_path.empty()) config.trace_path = args.trace_path;
  config.pipeline.ablation = apply_ablations(config.pipeline.ablation, args.ablations);

  if (!args.dataset_path.empty() || config.dataset.has_value()) {
    DatasetManifest manifest = config.dataset.value_or(DatasetManifest{});
    if (!args.dataset_path.empty()) manifest.path = args.dataset_path;
    if (!args.image_root.empty()) manifest.image_root = args.image_root;
    if (!args.dataset_name.empty()) manifest.name = args.dataset_name;
    if (manifest.name.empty()) manifest.name = "dataset";
    config.dataset = std::move(manifest);
  }
  return config;
}

PromptLibrary load_prompts(const RunConfig& config) {
  return PromptLibrary::load(config.templates_dir.empty() ? PromptLibrary::default_dir()
                                                          : config.templates_dir);
}

void write_line(const std::string& path, const std::string& line) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open output file: " + path);
  out << line << "\n";
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

int fail(int code, const std::string& message) {
  std::cerr << "error: " << message << "\n";
  return code;
}

// ---------------------------------------------------------------------------
// ask
// ---------------------------------------------------------------------------

int cmd_ask(const CliArgs& args) {
  RunConfig config;
  std::optional<PromptLibrary> prompts;
  AgentBackends backends;
  try {
    config = effective_config(args);
    validate(config);
    if (!std::filesystem::exists(args.image))
      throw Error(ErrorKind::Config, "image file does not exist: " + args.image);
    prompts.emplace(load_prompts(config));
    backends = build_backends(config);
  } catch (const Error& e) {
    return fail(kExitUsage, e.what());
  }

  VisualQuestion question;
  question.id = args.id;
  question.image_ref = ImageRef::from_path(args.image);
  question.question = args.question;
  question.question_type = QuestionType::Unknown;

  try {
    PipelineRuntime runtime{backends, &*prompts, RetryPolicy{}};
    const PipelineResult result = run_question(question, config.pipeline, runtime);
    if (!config.trace_path.empty()) write_line(config.trace_path, trace_to_line(result.trace));
    if (!args.quiet) {
      std::cout << "answer: " << result.answer.text << "\n";
      std::cout << "provenance: " << to_string(result.answer.provenance) << "\n";
      std::cout << "agent calls: " << result.trace.total_agent_calls << "\n";
    }
    const json machine{{"id", question.id},
                       {"answer", result.answer.text},
                       {"provenance", to_string(result.answer.provenance)}};
    std::cout << machine.dump() << "\n";
    return kExitOk;
  } catch (const PipelineError& e) {
    if (!config.trace_path.empty()) {
      // Best effort: keep the partial trace around for diagnosis.
      try {
        write_line(config.trace_path, trace_to_line(e.partial_trace()));
      } catch (const Error&) {
      }
    }
    return fail(kExitRuntime, e.what());
  } catch (const Error& e) {
    return fail(kExitRuntime, e.what());
  }
}

// ---------------------------------------------------------------------------
// bench / record
// ---------------------------------------------------------------------------

int run_bench_like(const CliArgs& args, bool record) {
  RunConfig config;
  std::optional<PromptLibrary> prompts;
  AgentBackends backends;
  Dataset dataset;
  try {
    config = effective_config(args);
    if (!config.dataset.has_value() || config.dataset->path.empty())
      throw Error(ErrorKind::Config, "no dataset given (use --dataset or the config file)");
    if (record) {
      if (config.cassette.empty())
        throw Error(ErrorKind::Config, "record needs a cassette path (--cassette)");
      for (const AgentKind kind :
           {AgentKind::Lvlm, AgentKind::Llm, AgentKind::Detector, AgentKind::Counter})
        if (mode_for(config, kind) == BackendMode::Replay)
          throw Error(ErrorKind::Config, "recording from a replay backend is circular");
    }
    if (args.format != "table" && args.format != "json")
      throw Error(ErrorKind::Config, "unknown --format '" + args.format +
                                         "' (valid: table, json)");
    validate(config);
    prompts.emplace(load_prompts(config));
    backends = build_backends(config);
    if (record)
      backends = wrap_recording(backends, std::make_shared<CassetteRecorder>(config.cassette));
    dataset = load_dataset(*config.dataset);
    for (const std::string& warning : dataset.warnings)
      std::cerr << "warning: " << warning << "\n";
  } catch (const Error& e) {
    return fail(kExitUsage, e.what());
  }

  try {
    PipelineRuntime runtime{backends, &*prompts, RetryPolicy{}};
    BenchmarkOptions options;
    options.pipeline = config.pipeline;
    options.parallelism = config.parallelism;
    options.records_path = config.records_path;
    options.trace_path = config.trace_path;
    options.resume = args.resume;
    options.limit = args.limit;
    const std::size_t total =
        args.limit.has_value() ? std::min(*args.limit, dataset.questions.size())
                               : dataset.questions.size();
    std::size_t done = 0;
    if (!args.quiet)
      options.on_record = [&](const QuestionRecord& record) {
        ++done;
        std::string status = "error";
        if (record.verdict.has_value())
          status = record.verdict->majority == Majority::Correct ? "correct" : "incorrect";
        std::cerr << "[" << done << "/" << total << "] " << record.id << " " << status << " ("
                  << to_string(record.provenance) << ")\n";
      };

    const BenchmarkOutcome outcome = run_benchmark(dataset, options, runtime);
    if (!args.quiet && outcome.resumed > 0)
      std::cerr << "resumed " << outcome.resumed << " previously answered questions\n";

    // The report file always gets the parseable single-line form.
    if (!config.report_path.empty())
      write_line(config.report_path, emit_report(outcome.report, ReportFormat::StructuredText));
    if (args.quiet || args.format == "json")
      std::cout << emit_report(outcome.report, ReportFormat::StructuredText) << "\n";
    else
      std::cout << emit_report(outcome.report, ReportFormat::PlainTable);
    return kExitOk;
  } catch (const Error& e) {
    return fail(kExitRuntime, e.what());
  }
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const CliArgs& args) {
  RunConfig config;
  Dataset dataset;
  std::vector<QuestionRecord> records;
  try {
    config = effective_config(args);
    if (!config.dataset.has_value() || config.dataset->path.empty())
      throw Error(ErrorKind::Config, "no dataset given (use --dataset or the config file)");
    if (config.records_path.empty())
      throw Error(ErrorKind::Config, "no records file given (--records)");
    if (args.format != "table" && args.format != "json")
      throw Error(ErrorKind::Config, "unknown --format '" + args.format +
                                         "' (valid: table, json)");
    dataset = load_dataset(*config.dataset);
    records = load_records(config.records_path);
  } catch (const Error& e) {
    return fail(kExitUsage, e.what());
  }

  try {
    const BenchmarkReport report =
        aggregate_records(dataset, config.pipeline.ablation, records);
    if (!config.report_path.empty())
      write_line(config.report_path, emit_report(report, ReportFormat::StructuredText));
    if (args.quiet || args.format == "json")
      std::cout << emit_report(report, ReportFormat::StructuredText) << "\n";
    else
      std::cout << emit_report(report, ReportFormat::PlainTable);
    return kExitOk;
  } catch (const Error& e) {
    return fail(kExitRuntime, e.what());
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Adaptive multi-agent visual question answering"};
  app.require_subcommand(1);
  // Let --config / --quiet appear after the subcommand name as well.
  app.fallthrough();

  CliArgs args;
  app.add_option("--config", args.config_path, "JSON run configuration file");
  app.add_flag("--quiet", args.quiet, "print only the final machine-readable line");

  const auto add_backend_options = [&](CLI::App* sub) {
    sub->add_option("--backend", args.backend, "agent backend: mock, replay or live");
    sub->add_option("--endpoint", args.endpoint, "live backend base URL (scheme://host:port)");
    sub->add_option("--auth-env", args.auth_env,
                    "name of the environment variable holding the bearer token");
    sub->add_option("--cassette", args.cassette, "cassette file for replay or recording");
    sub->add_option("--templates", args.templates_dir, "prompt template directory");
    sub->add_option("--ablation", args.ablations,
                    "disable a pipeline part: no-cot, no-counter, no-multi-agent (repeatable)");
  };
  const auto add_dataset_options = [&](CLI::App* sub) {
    sub->add_option("--dataset", args.dataset_path, "normalized dataset (line-delimited JSON)");
    sub->add_option("--images", args.image_root, "directory that relative image paths resolve in");
    sub->add_option("--name", args.dataset_name, "dataset display name");
  };
  const auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("--parallelism", args.parallelism, "questions processed concurrently");
    sub->add_option("--limit", args.limit, "only the first N questions");
    sub->add_flag("--resume", args.resume, "reuse answers already in the records file");
    sub->add_option("--records", args.records_path, "per-question records output");
    sub->add_option("--report", args.report_path, "report output file (single JSON line)");
    sub->add_option("--trace", args.trace_path, "full call-trace output");
    sub->add_option("--format", args.format, "stdout report format: table or json");
  };

  CLI::App* ask = app.add_subcommand("ask", "answer one question about one image");
  ask->add_option("--image", args.image, "image file")->required();
  ask->add_option("--question", args.question, "question text")->required();
  ask->add_option("--id", args.id, "question id used in outputs");
  ask->add_option("--trace,--trace-out", args.trace_path, "write the call trace to this file");
  add_backend_options(ask);

  CLI::App* bench = app.add_subcommand("bench", "run and grade a whole dataset");
  add_backend_options(bench);
  add_dataset_options(bench);
  add_run_options(bench);

  CLI::App* record = app.add_subcommand(
      "record", "run a dataset while recording every agent response to a cassette");
  add_backend_options(record);
  add_dataset_options(record);
  add_run_options(record);

  CLI::App* report = app.add_subcommand("report", "re-aggregate an existing records file");
  report->add_option("--records", args.records_path, "records file to aggregate")->required();
  report->add_option("--report", args.report_path, "report output file (single JSON line)");
  report->add_option("--format", args.format, "stdout report format: table or json");
  report->add_option("--ablation", args.ablations,
                     "ablation labels the records were produced under (repeatable)");
  add_dataset_options(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (ask->parsed()) return cmd_ask(args);
  if (bench->parsed()) return run_bench_like(args, /*record=*/false);
  if (record->parsed()) return run_bench_like(args, /*record=*/true);
  if (report->parsed()) return cmd_report(args);
  return kExitUsage;
}

}  // namespace vqaflow::cli
