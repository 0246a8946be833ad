// Serves the deterministic scripted-mock agents over HTTP on the same four
// routes the live backend calls, so the whole live transport path can be
// exercised without real model endpoints:
//
//   vqaflow-mock-server --port 8089 &
//   VQAFLOW_LIVE_ENDPOINT=http://127.0.0.1:8089 ./build/acceptance --only 10
//   vqaflow ask --backend live --endpoint http://127.0.0.1:8089 ...

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "vqaflow/agents.hpp"
#include "vqaflow/http_backend.hpp"
#include "vqaflow/mock_backend.hpp"
#include "vqaflow/textutil.hpp"

using vqaflow::AgentKind;
using vqaflow::AgentRequest;
using vqaflow::AgentResponse;

namespace {

AgentRequest request_from_body(AgentKind kind, const nlohmann::json& body) {
  const auto image = [&] {
    return vqaflow::text::base64_decode(body.at("image").get<std::string>());
  };
  switch (kind) {
    case AgentKind::Lvlm:
      return AgentRequest::lvlm(image(), body.at("prompt").get<std::string>());
    case AgentKind::Llm:
      return AgentRequest::llm(body.at("prompt").get<std::string>(),
                               body.contains("salt")
                                   ? std::optional<int>(body.at("salt").get<int>())
                                   : std::nullopt);
    case AgentKind::Detector:
      return AgentRequest::detect(image(),
                                  body.at("object_names").get<std::vector<std::string>>());
    case AgentKind::Counter:
      return AgentRequest::count(image(), body.at("target_object").get<std::string>());
  }
  throw std::runtime_error("unreachable agent kind");
}

void mount(httplib::Server& server, AgentKind kind,
           AgentResponse (*script)(const AgentRequest&)) {
  server.Post(vqaflow::HttpBackend::route_for(kind),
              [kind, script](const httplib::Request& req, httplib::Response& res) {
                try {
                  const AgentRequest request =
                      request_from_body(kind, nlohmann::json::parse(req.body));
                  res.set_content(script(request).canonical_json(), "application/json");
                } catch (const std::exception& e) {
                  res.status = 400;
                  res.set_content(std::string("bad request: ") + e.what(), "text/plain");
                }
              });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HTTP server exposing the deterministic scripted-mock agents"};
  std::string host = "127.0.0.1";
  int port = 8089;
  app.add_option("--host", host, "address to bind");
  app.add_option("--port", port, "port to listen on (0 picks a free one)");
  CLI11_PARSE(app, argc, argv);

  httplib::Server server;
  mount(server, AgentKind::Lvlm, vqaflow::default_mock_lvlm);
  mount(server, AgentKind::Llm, vqaflow::default_mock_llm);
  mount(server, AgentKind::Detector, vqaflow::default_mock_detector);
  mount(server, AgentKind::Counter, vqaflow::default_mock_counter);

  if (port == 0) {
    port = server.bind_to_any_port(host);
    if (port < 0) {
      std::cerr << "failed to bind " << host << "\n";
      return 2;
    }
    std::cout << "serving mock agents on http://" << host << ":" << port << std::endl;
    return server.listen_after_bind() ? 0 : 2;
  }
  std::cout << "serving mock agents on http://" << host << ":" << port << std::endl;
  return server.listen(host, port) ? 0 : 2;
}
