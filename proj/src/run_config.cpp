#include "vqaflow/run_config.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "vqaflow/http_backend.hpp"
#include "vqaflow/mock_backend.hpp"

namespace vqaflow {

using nlohmann::json;

const char* to_string(BackendMode mode) {
  switch (mode) {
    case BackendMode::Mock:
      return "mock";
    case BackendMode::Replay:
      return "replay";
    case BackendMode::Live:
      return "live";
  }
  return "?";
}

BackendMode backend_mode_from_string(const std::string& name) {
  if (name == "mock") return BackendMode::Mock;
  if (name == "replay") return BackendMode::Replay;
  if (name == "live") return BackendMode::Live;
  throw Error(ErrorKind::Config,
              "unknown backend mode '" + name + "' (valid: mock, replay, live)");
}

BackendMode mode_for(const RunConfig& config, AgentKind kind) {
  const auto it = config.backend_per_kind.find(to_string(kind));
  return it == config.backend_per_kind.end() ? config.backend : it->second;
}

std::string endpoint_for(const RunConfig& config, AgentKind kind) {
  const auto it = config.endpoint_per_kind.find(to_string(kind));
  return it == config.endpoint_per_kind.end() ? config.endpoint : it->second;
}

std::string interpolate_env(const std::string& value) {
  std::string out;
  std::size_t pos = 0;
  while (pos < value.size()) {
    const std::size_t open = value.find("${", pos);
    if (open == std::string::npos) {
      out.append(value, pos, std::string::npos);
      break;
    }
    const std::size_t close = value.find('}', open + 2);
    if (close == std::string::npos)
      throw Error(ErrorKind::Config, "unterminated ${...} in config value: " + value);
    out.append(value, pos, open - pos);
    const std::string name = value.substr(open + 2, close - open - 2);
    if (name.empty()) throw Error(ErrorKind::Config, "empty ${} in config value: " + value);
    const char* resolved = std::getenv(name.c_str());
    if (resolved == nullptr)
      throw Error(ErrorKind::Config,
                  "config references environment variable " + name + ", which is not set");
    out += resolved;
    pos = close + 1;
  }
  return out;
}

namespace {

std::string get_string(const json& j, const char* key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  return interpolate_env(j.at(key).get<std::string>());
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* name : known) ok = ok || key == name;
    if (!ok) throw Error(ErrorKind::Config, "unknown config key '" + key + "' in " + where);
  }
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config file: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, path + ": malformed config: " + e.what());
  }

  RunConfig config;
  try {
    reject_unknown_keys(j,
                        {"backend", "endpoint", "auth_env", "timeout_seconds", "cassette",
                         "templates_dir", "pipeline", "parallelism", "outputs", "dataset"},
                        path);
    if (j.contains("backend")) {
      const json& b = j.at("backend");
      if (b.is_string()) {
        config.backend = backend_mode_from_string(b.get<std::string>());
      } else {
        // Per-kind selection, e.g. {"default": "mock", "lvlm": "live"}.
        reject_unknown_keys(b, {"default", "lvlm", "llm", "detector", "counter"},
                            path + " backend block");
        if (b.contains("default"))
          config.backend = backend_mode_from_string(b.at("default").get<std::string>());
        for (const char* kind : {"lvlm", "llm", "detector", "counter"})
          if (b.contains(kind))
            config.backend_per_kind[kind] =
                backend_mode_from_string(b.at(kind).get<std::string>());
      }
    }
    if (j.contains("endpoint") && j.at("endpoint").is_object()) {
      const json& e = j.at("endpoint");
      reject_unknown_keys(e, {"default", "lvlm", "llm", "detector", "counter"},
                          path + " endpoint block");
      config.endpoint = get_string(e, "default", "");
      for (const char* kind : {"lvlm", "llm", "detector", "counter"})
        if (e.contains(kind))
          config.endpoint_per_kind[kind] = interpolate_env(e.at(kind).get<std::string>());
    } else {
      config.endpoint = get_string(j, "endpoint", "");
    }
    config.auth_env = get_string(j, "auth_env", "");
    if (j.contains("timeout_seconds")) config.timeout_seconds = j.at("timeout_seconds").get<int>();
    config.cassette = get_string(j, "cassette", "");
    config.templates_dir = get_string(j, "templates_dir", "");
    if (j.contains("parallelism")) config.parallelism = j.at("parallelism").get<int>();

    if (j.contains("pipeline")) {
      const json& p = j.at("pipeline");
      reject_unknown_keys(p,
                          {"ablation", "counter_trigger_threshold", "description_fanout_limit",
                           "pad_frac", "detector_threshold", "max_boxes", "budget_seconds"},
                          path + " pipeline block");
      if (p.contains("ablation")) config.pipeline.ablation = p.at("ablation").get<AblationConfig>();
      if (p.contains("counter_trigger_threshold"))
        config.pipeline.counter_trigger_threshold = p.at("counter_trigger_threshold").get<int>();
      if (p.contains("description_fanout_limit"))
        config.pipeline.description_fanout_limit = p.at("description_fanout_limit").get<int>();
      if (p.contains("pad_frac")) config.pipeline.pad_frac = p.at("pad_frac").get<double>();
      if (p.contains("detector_threshold"))
        config.pipeline.detector.threshold = p.at("detector_threshold").get<double>();
      if (p.contains("max_boxes")) config.pipeline.detector.max_boxes = p.at("max_boxes").get<int>();
      if (p.contains("budget_seconds"))
        config.pipeline.budget_seconds = p.at("budget_seconds").get<double>();
    }

    if (j.contains("outputs")) {
      const json& o = j.at("outputs");
      reject_unknown_keys(o, {"records", "report", "trace"}, path + " outputs block");
      config.records_path = get_string(o, "records", "");
      config.report_path = get_string(o, "report", "");
      config.trace_path = get_string(o, "trace", "");
    }

    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      reject_unknown_keys(d, {"name", "path", "image_root", "declared_size"},
                          path + " dataset block");
      DatasetManifest manifest;
      manifest.name = get_string(d, "name", "dataset");
      manifest.path = get_string(d, "path", "");
      manifest.image_root = get_string(d, "image_root", "");
      if (d.contains("declared_size"))
        manifest.declared_size = d.at("declared_size").get<std::size_t>();
      config.dataset = std::move(manifest);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, path + ": bad config value: " + e.what());
  }
  return config;
}

namespace {

constexpr AgentKind kAllKinds[] = {AgentKind::Lvlm, AgentKind::Llm, AgentKind::Detector,
                                   AgentKind::Counter};

}  // namespace

void validate(const RunConfig& config) {
  validate(config.pipeline);
  if (config.parallelism < 1) throw Error(ErrorKind::Config, "parallelism must be >= 1");
  if (config.timeout_seconds < 1) throw Error(ErrorKind::Config, "timeout must be >= 1 second");
  for (const AgentKind kind : kAllKinds) {
    switch (mode_for(config, kind)) {
      case BackendMode::Mock:
        break;
      case BackendMode::Replay:
        if (config.cassette.empty())
          throw Error(ErrorKind::Config, "replay backend requires a cassette path");
        if (!std::filesystem::exists(config.cassette))
          throw Error(ErrorKind::Config, "replay cassette does not exist: " + config.cassette);
        break;
      case BackendMode::Live:
        if (endpoint_for(config, kind).empty())
          throw Error(ErrorKind::Config, std::string("live ") + to_string(kind) +
                                             " backend requires an endpoint URL");
        if (config.auth_env.empty())
          throw Error(ErrorKind::Config,
                      "live backend requires auth_env, the name of the environment variable "
                      "holding the bearer token");
        break;
    }
  }
}

AgentBackends build_backends(const RunConfig& config) {
  validate(config);

  // All replay slots share one backend so the cassette loads once.
  std::shared_ptr<ReplayBackend> replay;
  const auto replay_slot = [&] {
    if (!replay)
      replay = std::make_shared<ReplayBackend>(
          std::make_shared<const Cassette>(Cassette::load(config.cassette)));
    return replay;
  };

  // The bearer token resolves once, here; backends only ever see its value.
  std::string token;
  const auto bearer_token = [&]() -> const std::string& {
    if (token.empty()) {
      const char* value = std::getenv(config.auth_env.c_str());
      if (value == nullptr)
        throw Error(ErrorKind::Config, "environment variable " + config.auth_env +
                                           " (configured via auth_env) is not set");
      token = value;
    }
    return token;
  };

  const auto slot = [&](AgentKind kind) -> std::shared_ptr<AgentBackend> {
    switch (mode_for(config, kind)) {
      case BackendMode::Mock:
        return std::make_shared<ScriptedMockBackend>(kind);
      case BackendMode::Replay:
        return replay_slot();
      case BackendMode::Live: {
        HttpEndpointConfig endpoint;
        endpoint.base_url = endpoint_for(config, kind);
        endpoint.bearer_token = bearer_token();
        endpoint.timeout_seconds = config.timeout_seconds;
        return std::make_shared<HttpBackend>(kind, endpoint);
      }
    }
    throw Error(ErrorKind::Config, "unknown backend mode");
  };

  AgentBackends backends;
  backends.lvlm = slot(AgentKind::Lvlm);
  backends.llm = slot(AgentKind::Llm);
  backends.detector = slot(AgentKind::Detector);
  backends.counter = slot(AgentKind::Counter);
  return backends;
}

}  // namespace vqaflow
