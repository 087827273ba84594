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

#pragma once

#include "json.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "byovla/backends/client.hpp"
#include "byovla/backends/server.hpp"
#include "byovla/config.hpp"
#include "byovla/testbed.hpp"

namespace byovla {

/// Owned backend instances for one run.
struct BackendSet {
  std::shared_ptr<PolicyBackend> policy;
  std::shared_ptr<VLMBackend> vlm;
  std::shared_ptr<SegBackend> seg;
  std::shared_ptr<InpaintBackend> inpaint;  // may be null: built-in fill
  std::shared_ptr<AttnBackend> attn;        // may be null: GradCAM unavailable
  std::optional<testbed::SceneSpec> scene;
  std::shared_ptr<Transcript> transcript;   // traffic of every protocol endpoint
  IdCounter ids;
  std::vector<std::shared_ptr<void>> keep_alive;

  BackendRefs view() const {
    return {policy.get(), vlm.get(), seg.get(), inpaint.get(), attn.get()};
  }
};

/// In-process stubs for `scene`: SimPolicy, scene-derived proposal,
/// SceneSegmenter, onion-peel inpainting and the toy attention model.
BackendSet make_stub_backends(const testbed::SceneSpec& scene, const PipelineConfig& cfg);

/// Builds backends from a JSON description:
///   {"scene": name-or-path,
///    "replay": transcript.jsonl,              (optional)
///    "vlm_fixture": fixture.json,             (optional StubVLM answers)
///    "<policy|vlm|seg|inpaint|attn>": {"transport": "stub" | "loopback" |
///        "subprocess" | "http" | "none", "command": [...], "url": "...",
///        "timeout_ms": 30000, "retries": 1}}
/// Missing endpoints default to "stub". "loopback" serves the stub through
/// the protocol in-process. With "replay", every protocol endpoint answers
/// from the transcript. Relative paths resolve against `base_dir`.
BackendSet make_backends(const nlohmann::json& config, const PipelineConfig& cfg,
                         const std::filesystem::path& base_dir = {});
BackendSet load_backends(const std::filesystem::path& path, const PipelineConfig& cfg);

}  // namespace byovla
