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

#include "byovla/backends/registry.hpp"

#include <fstream>

#include "byovla/backends/stubs.hpp"

namespace byovla {

using nlohmann::json;

BackendSet make_stub_backends(const testbed::SceneSpec& scene, const PipelineConfig& cfg) {
  BackendSet set;
  set.scene = scene;
  set.ids = std::make_shared<std::atomic<std::uint64_t>>(0);
  set.policy = std::make_shared<StubPolicy>(scene, cfg.horizon);
  set.vlm = std::make_shared<StubVLM>(testbed::scene_proposal(scene));
  set.seg = std::make_shared<testbed::SceneSegmenter>(scene);
  set.inpaint = std::make_shared<StubInpaint>();
  set.attn = std::make_shared<StubAttn>();
  return set;
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

BackendSet make_backends(const json& config, const PipelineConfig& cfg,
                         const std::filesystem::path& base_dir) {
  if (!config.is_object()) throw Error(ErrorCode::kInvalidArgument, "backends config must be an object");
  BackendSet stubs;
  BackendSet set;
  set.ids = std::make_shared<std::atomic<std::uint64_t>>(0);
  set.transcript = std::make_shared<Transcript>();

  try {
    if (config.contains("scene")) {
      const std::string scene = config.at("scene").get<std::string>();
      const bool builtin = scene == "standard" || scene == "clean" || scene == "background";
      stubs = make_stub_backends(
          builtin ? testbed::builtin_scene(scene) : testbed::load_scene(resolve(base_dir, scene)),
          cfg);
      set.scene = stubs.scene;
    }
    if (config.contains("vlm_fixture")) {
      std::ifstream in(resolve(base_dir, config.at("vlm_fixture").get<std::string>()));
      if (!in) throw Error(ErrorCode::kFixtureMissing, "cannot open vlm_fixture");
      stubs.vlm = std::make_shared<StubVLM>(StubVLM::from_json(json::parse(in)));
    }

    std::optional<Transcript> replay;
    if (config.contains("replay")) {
      replay = Transcript::load(resolve(base_dir, config.at("replay").get<std::string>()));
    }

    auto stub_server = std::make_shared<ProtocolServer>(stubs.view());
    set.keep_alive = {stubs.policy, stubs.vlm, stubs.seg, stubs.inpaint, stubs.attn, stub_server};

    // Returns a client for `name`, or null when the stub is used directly.
    auto client_for = [&](const std::string& name, bool* none) -> std::shared_ptr<Client> {
      const json ep = config.value(name, json::object());
      const std::string transport = ep.value("transport", std::string("stub"));
      *none = transport == "none";
      if (transport == "stub" || transport == "none") return nullptr;
      std::unique_ptr<Transport> t;
      if (replay) {
        t = std::make_unique<ReplayTransport>(replay->entries_for(name));
      } else if (transport == "loopback") {
        t = std::make_unique<LoopbackTransport>(
            [srv = stub_server](const std::string& line) { return srv->handle(line); });
      } else if (transport == "subprocess" || transport == "http") {
        BackendEndpoint endpoint;
        endpoint.kind = transport == "http" ? BackendEndpoint::Kind::kHttp
                                            : BackendEndpoint::Kind::kSubprocess;
        endpoint.command = ep.value("command", std::vector<std::string>{});
        endpoint.url = ep.value("url", std::string());
        endpoint.timeout_ms = ep.value("timeout_ms", 30000);
        endpoint.retries = ep.value("retries", 1);
        t = endpoint.make_transport();
      } else {
        throw Error(ErrorCode::kInvalidArgument, "unknown transport '" + transport + "' for " + name);
      }
      return std::make_shared<Client>(name, std::move(t), ep.value("retries", 1), set.ids,
                                      set.transcript, cfg.max_in_flight);
    };

    auto need_stub = [&](const std::string& name, const auto& stub) {
      if (!stub) {
        throw Error(ErrorCode::kFixtureMissing,
                    name + " uses a stub but the backends config names no scene");
      }
    };

    bool none = false;
    if (auto c = client_for("policy", &none)) {
      set.policy = std::make_shared<RemotePolicy>(c, cfg.chunk_length());
    } else {
      need_stub("policy", stubs.policy);
      set.policy = stubs.policy;
    }
    if (auto c = client_for("vlm", &none)) {
      set.vlm = std::make_shared<RemoteVLM>(c);
    } else if (!none) {
      need_stub("vlm", stubs.vlm);
      set.vlm = stubs.vlm;
    }
    if (auto c = client_for("seg", &none)) {
      set.seg = std::make_shared<RemoteSeg>(c);
    } else if (!none) {
      need_stub("seg", stubs.seg);
      set.seg = stubs.seg;
    }
    if (auto c = client_for("inpaint", &none)) {
      set.inpaint = std::make_shared<RemoteInpaint>(c);
    } else if (!none) {
      set.inpaint = stubs.inpaint ? stubs.inpaint : std::make_shared<StubInpaint>();
    }
    if (auto c = client_for("attn", &none)) {
      set.attn = std::make_shared<RemoteAttn>(c);
    } else if (!none) {
      set.attn = stubs.attn ? stubs.attn : std::make_shared<StubAttn>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("bad backends config: ") + e.what());
  }
  return set;
}

BackendSet load_backends(const std::filesystem::path& path, const PipelineConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open backends config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, path.string() + ": " + e.what());
  }
  return make_backends(j, cfg, path.parent_path());
}

}  // namespace byovla
