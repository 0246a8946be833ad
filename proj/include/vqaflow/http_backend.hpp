#pragma once

#include <memory>
#include <string>

#include "vqaflow/agents.hpp"

namespace vqaflow {

/// Connection settings for one live agent service.
struct HttpEndpointConfig {
  std::string base_url;      // scheme://host:port
  std::string bearer_token;  // empty = no Authorization header
  int timeout_seconds = 60;
};

/// Live JSON/HTTP backend. Each kind posts the request's canonical JSON body
/// to its own route (/v1/lvlm, /v1/llm, /v1/detect, /v1/count) and expects a
/// JSON object carrying "text", "detections" or "count". One attempt per
/// call: connection failures, timeouts and 5xx map to agent-unavailable (the
/// session's retry layer owns the retries); any other non-success status or
/// a malformed body maps to a protocol violation.
class HttpBackend : public AgentBackend {
 public:
  HttpBackend(AgentKind kind, HttpEndpointConfig config);
  AgentCallResult call(const AgentRequest& request) override;

  static std::string route_for(AgentKind kind);

 private:
  AgentKind kind_;
  HttpEndpointConfig config_;
};

/// Four live backends sharing one endpoint configuration.
AgentBackends make_http_backends(const HttpEndpointConfig& config);

}  // namespace vqaflow
