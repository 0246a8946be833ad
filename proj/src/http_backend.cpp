#include "vqaflow/http_backend.hpp"

#include <httplib.h>

#include <chrono>
#include <nlohmann/json.hpp>

#include "vqaflow/errors.hpp"

namespace vqaflow {

using nlohmann::json;

HttpBackend::HttpBackend(AgentKind kind, HttpEndpointConfig config)
    : kind_(kind), config_(std::move(config)) {
  if (config_.base_url.empty())
    throw Error(ErrorKind::Config, "live backend requires an endpoint URL");
}

std::string HttpBackend::route_for(AgentKind kind) {
  switch (kind) {
    case AgentKind::Lvlm:
      return "/v1/lvlm";
    case AgentKind::Llm:
      return "/v1/llm";
    case AgentKind::Detector:
      return "/v1/detect";
    case AgentKind::Counter:
      return "/v1/count";
  }
  throw Error(ErrorKind::InvalidInput, "unknown agent kind");
}

AgentCallResult HttpBackend::call(const AgentRequest& request) {
  if (request.kind != kind_)
    throw Error(ErrorKind::InvalidInput, "request kind does not match this backend");

  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  client.set_write_timeout(config_.timeout_seconds, 0);
  if (!config_.bearer_token.empty()) client.set_bearer_token_auth(config_.bearer_token);

  const auto started = std::chrono::steady_clock::now();
  httplib::Result result =
      client.Post(route_for(kind_), request.canonical_bytes(), "application/json");
  const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - started)
                           .count();

  if (!result)
    throw Error(ErrorKind::AgentUnavailable,
                "transport failure calling " + route_for(kind_) + ": " +
                    httplib::to_string(result.error()));
  if (result->status >= 500 || result->status == 408 || result->status == 429)
    throw Error(ErrorKind::AgentUnavailable,
                route_for(kind_) + " returned status " + std::to_string(result->status));
  if (result->status < 200 || result->status >= 300)
    throw Error(ErrorKind::ProtocolViolation,
                route_for(kind_) + " returned status " + std::to_string(result->status));

  json body;
  try {
    body = json::parse(result->body);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ProtocolViolation,
                route_for(kind_) + " returned a non-JSON body: " + e.what());
  }

  try {
    switch (kind_) {
      case AgentKind::Lvlm:
      case AgentKind::Llm:
        return {AgentResponse::text(body.at("text").get<std::string>()), latency};
      case AgentKind::Detector:
        return {AgentResponse::detections(body.at("detections").get<std::vector<Detection>>()),
                latency};
      case AgentKind::Counter:
        return {AgentResponse::count(body.at("count").get<double>()), latency};
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ProtocolViolation,
                route_for(kind_) + " body missing expected field: " + e.what());
  }
  throw Error(ErrorKind::InvalidInput, "unknown agent kind");
}

AgentBackends make_http_backends(const HttpEndpointConfig& config) {
  return AgentBackends{std::make_shared<HttpBackend>(AgentKind::Lvlm, config),
                       std::make_shared<HttpBackend>(AgentKind::Llm, config),
                       std::make_shared<HttpBackend>(AgentKind::Detector, config),
                       std::make_shared<HttpBackend>(AgentKind::Counter, config)};
}

}  // namespace vqaflow
