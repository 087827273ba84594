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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "byovla/attribution.hpp"
#include "byovla/core.hpp"
#include "byovla/mask.hpp"

namespace byovla {

/// End-effector x, y, z (m) and gripper state (1 = closed).
using Proprio = std::array<double, 4>;

/// What the policy is conditioned on besides the image.
struct TaskContext {
  std::string instruction;
  std::optional<Proprio> proprio;
};

struct PredictRequest {
  Image image;
  TaskContext context;
  int k = 1;
  std::uint64_t seed = 0;
};

/// A black-box policy f(o, l) returning k sampled action chunks.
class PolicyBackend {
 public:
  virtual ~PolicyBackend() = default;
  virtual std::vector<ActionChunk> predict(const PredictRequest& request) = 0;
};

struct ProposalResponse {
  std::vector<std::string> not_relevant_objects;
  std::vector<std::string> not_relevant_backgrounds;
  std::string raw;
};

class VLMBackend {
 public:
  virtual ~VLMBackend() = default;
  virtual ProposalResponse propose(const Image& image, const std::string& instruction,
                                   const std::string& template_id) = 0;
};

struct SegmentMask {
  std::string label;
  double score = 0.0;
  RLESpec rle;
};

class SegBackend {
 public:
  virtual ~SegBackend() = default;
  virtual std::vector<SegmentMask> segment(const Image& image,
                                           const std::vector<std::string>& labels,
                                           double box_threshold,
                                           double text_threshold) = 0;
};

class InpaintBackend {
 public:
  virtual ~InpaintBackend() = default;
  /// The mask arrives undilated; `dilation` is the radius to apply.
  virtual Image inpaint(const Image& image, const RLESpec& mask, int dilation) = 0;
};

class AttnBackend {
 public:
  virtual ~AttnBackend() = default;
  virtual AttentionTensors attention(const Image& image, const std::string& instruction,
                                     int layer) = 0;
};

/// Non-owning view of one set of backends. Null entries mean the backend is
/// not available.
struct BackendRefs {
  PolicyBackend* policy = nullptr;
  VLMBackend* vlm = nullptr;
  SegBackend* seg = nullptr;
  InpaintBackend* inpaint = nullptr;
  AttnBackend* attn = nullptr;
};

}  // namespace byovla
