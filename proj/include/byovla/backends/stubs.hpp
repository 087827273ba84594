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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "byovla/backends/interfaces.hpp"
#include "byovla/testbed.hpp"

// Deterministic, fixture-driven backends. The policy and attention stubs are
// the testbed models themselves.
namespace byovla {

using StubPolicy = testbed::SimPolicy;
using StubAttn = testbed::ToyAttentionPolicy;

/// Answers keyed by instruction, with an optional fallback answer.
class StubVLM : public VLMBackend {
 public:
  StubVLM() = default;
  explicit StubVLM(ProposalResponse fallback) : fallback_(std::move(fallback)) {}

  void add(const std::string& instruction, ProposalResponse answer);
  ProposalResponse propose(const Image& image, const std::string& instruction,
                           const std::string& template_id) override;

  /// {"fixtures": [{"instruction", "raw", "not_relevant_objects",
  /// "not_relevant_backgrounds"}], "default": {...}}
  static StubVLM from_json(const nlohmann::json& j);

 private:
  std::map<std::string, ProposalResponse> answers_;
  std::optional<ProposalResponse> fallback_;
};

/// Returns fixed masks for the labels it knows.
class StubSeg : public SegBackend {
 public:
  struct Fixture {
    std::string label;
    double score = 1.0;
    Bitmap bitmap;
  };

  explicit StubSeg(std::vector<Fixture> fixtures) : fixtures_(std::move(fixtures)) {}

  std::vector<SegmentMask> segment(const Image& image, const std::vector<std::string>& labels,
                                   double box_threshold, double text_threshold) override;

  /// Axis-aligned rectangle fixture, inclusive bounds.
  static Fixture rectangle(std::string label, int width, int height, int x0, int y0, int x1,
                           int y1, double score = 1.0);

 private:
  std::vector<Fixture> fixtures_;
};

/// Onion-peel fill of the dilated mask.
class StubInpaint : public InpaintBackend {
 public:
  Image inpaint(const Image& image, const RLESpec& mask, int dilation) override;
};

}  // namespace byovla
