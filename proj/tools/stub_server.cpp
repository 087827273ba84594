/*
 * Copyright 2026 The byovla Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Serves the in-process stubs over the wire protocol (stdin/stdout or HTTP).
// Fault modes misbehave on purpose so clients can be tested against them.

#include <chrono>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "byovla/backends/registry.hpp"
#include "byovla/backends/server.hpp"

using nlohmann::json;
using namespace byovla;

namespace {

// Corrupts a well-formed response according to `fault`.
std::string inject(const std::string& fault, const std::string& response, int sleep_ms) {
  if (fault == "garbage") return "this is not json";
  if (fault == "sleep") {
    std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms));
    return response;
  }
  if (fault == "exit") std::exit(7);
  json j = json::parse(response);
  if (fault == "wrong_id") {
    j["id"] = j.value("id", std::uint64_t{0}) + 1000;
  } else if (fault == "bad_k" && j.contains("chunks") && !j["chunks"].empty()) {
    j["chunks"].push_back(j["chunks"].back());
  } else if (fault == "bad_version") {
    j["v"] = "0";
  }
  return j.dump();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stub backends behind the JSON protocol"};
  std::string scene = "standard", vlm_fixture, host = "127.0.0.1", fault;
  int port = 0, horizon = 3, fault_on = 0, sleep_ms = 2000;
  app.add_option("--scene", scene, "Scene name or file");
  app.add_option("--vlm-fixture", vlm_fixture, "StubVLM answers (JSON)");
  app.add_option("--horizon", horizon, "Chunk horizon T_a")->check(CLI::NonNegativeNumber);
  app.add_option("--http", port, "Serve HTTP on this port instead of stdio");
  app.add_option("--host", host, "HTTP bind address");
  app.add_option("--fault", fault, "Misbehave: garbage, wrong_id, bad_k, bad_version, sleep, exit")
      ->check(CLI::IsMember({"garbage", "wrong_id", "bad_k", "bad_version", "sleep", "exit"}));
  app.add_option("--fault-on", fault_on, "Only the n-th request (1-based) misbehaves; 0 = all");
  app.add_option("--sleep-ms", sleep_ms, "Delay for --fault sleep");
  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig cfg;
    cfg.horizon = horizon;
    json spec{{"scene", scene}};
    if (!vlm_fixture.empty()) spec["vlm_fixture"] = vlm_fixture;
    BackendSet set = make_backends(spec, cfg);
    ProtocolServer server(set.view());

    if (port > 0) {
      serve_http(server, host, port);
      return 0;
    }
    std::string line;
    int n = 0;
    while (std::getline(std::cin, line)) {
      if (line.empty()) continue;
      ++n;
      std::string response = server.handle(line);
      if (!fault.empty() && (fault_on == 0 || fault_on == n)) response = inject(fault, response, sleep_ms);
      std::cout << response << "\n" << std::flush;
    }
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "startup"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }
  return 0;
}
