#pragma once

#include <map>
#include <optional>
#include <string>

#include "vqaflow/agents.hpp"
#include "vqaflow/bench.hpp"
#include "vqaflow/pipeline.hpp"

namespace vqaflow {

enum class BackendMode { Mock, Replay, Live };

const char* to_string(BackendMode mode);
BackendMode backend_mode_from_string(const std::string& name);

/// Everything a run needs beyond the dataset itself. Loadable from a JSON
/// file whose string values may interpolate ${ENV_VAR}; credentials are
/// configured by environment-variable *name* and resolved only when the live
/// backend is built, so no secret ever lands in a file this program writes.
struct RunConfig {
  BackendMode backend = BackendMode::Mock;  // default for all four agent kinds
  // Per-kind overrides, keyed "lvlm"/"llm"/"detector"/"counter" (e.g. live
  // models with a mock counter).
  std::map<std::string, BackendMode> backend_per_kind;
  std::string endpoint;  // live: shared scheme://host:port
  std::map<std::string, std::string> endpoint_per_kind;
  std::string auth_env;      // live: name of the env var holding the bearer token
  int timeout_seconds = 60;  // live: per-request timeout
  std::string cassette;      // replay source / recording target
  std::string templates_dir;  // "" = built-in default resolution
  PipelineConfig pipeline;
  int parallelism = 1;
  std::string records_path;
  std::string report_path;  // "" = stdout only
  std::string trace_path;   // "" = no trace file
  std::optional<DatasetManifest> dataset;
};

/// Backend mode / endpoint a given agent kind resolves to.
BackendMode mode_for(const RunConfig& config, AgentKind kind);
std::string endpoint_for(const RunConfig& config, AgentKind kind);

/// Parse a config file. Unknown keys fail loudly; missing keys keep their
/// defaults; a ${VAR} whose variable is unset is an error naming the
/// variable.
RunConfig load_run_config(const std::string& path);

/// Substitute ${VAR} occurrences from the environment.
std::string interpolate_env(const std::string& value);

/// Reject configs that cannot run: replay without a readable cassette, live
/// without endpoint or credential variable name.
void validate(const RunConfig& config);

/// Construct the four agent backends for the configured mode.
AgentBackends build_backends(const RunConfig& config);

}  // namespace vqaflow
