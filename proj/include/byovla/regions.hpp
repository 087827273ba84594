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
#include <optional>
#include <string>
#include <vector>

#include "byovla/backends/interfaces.hpp"
#include "byovla/core.hpp"

namespace byovla {

struct RegionProposal {
  std::vector<std::string> not_relevant_objects;
  std::vector<std::string> not_relevant_backgrounds;

  bool empty() const {
    return not_relevant_objects.empty() && not_relevant_backgrounds.empty();
  }
  friend bool operator==(const RegionProposal&, const RegionProposal&) = default;
};

nlohmann::json to_json(const RegionProposal& p);

struct PromptExemplar {
  std::string image_ref;
  std::string task;
  std::vector<std::string> objects;
  std::vector<std::string> backgrounds;
};

/// Few-shot prompt for the region-proposal VLM.
///
/// On disk the template is a sectioned text file:
///
///     #! prompt-template <id> <version>
///     [preamble]
///     free text
///     [exemplar]
///     image: {IMAGE_1}
///     task: stack the red block on the blue one
///     objects: spoon; lid
///     backgrounds: shelf
///     [query]
///     free text containing {TASK} and {IMAGE_0}
///
/// {IMAGE_k} placeholders are replaced with caller-supplied image references
/// when rendering; {IMAGE_0} is the live observation.
struct PromptTemplate {
  std::string id;
  int version = 1;
  std::string preamble;
  std::vector<PromptExemplar> exemplars;
  std::string query;
};

PromptTemplate parse_prompt_template(const std::string& text);
PromptTemplate load_prompt_template(const std::filesystem::path& path);
/// The shipped five-exemplar template (data/prompts/irrelevant_regions_v1.txt).
const PromptTemplate& default_prompt_template();
/// `image_refs[k]` substitutes {IMAGE_k}; missing entries render as "<image k>".
std::string render_prompt(const PromptTemplate& tmpl, const std::string& task,
                          const std::vector<std::string>& image_refs = {});

enum class ParseStrictness { kStrictJson, kLenient };

/// Accepts a JSON object with the two list keys, or (lenient) prose holding
/// two bracketed lists of quoted strings, optionally introduced by the key
/// names. Labels must be non-empty and at most four words.
RegionProposal parse_proposal(const std::string& raw,
                              ParseStrictness strictness = ParseStrictness::kLenient);

struct ProposalResult {
  RegionProposal proposal;
  std::string raw;
};

/// Queries the VLM once. When the backend supplies raw text it is parsed;
/// otherwise its structured lists are validated and used.
ProposalResult propose_regions(VLMBackend& vlm, const Image& obs,
                               const std::string& instruction,
                               const PromptTemplate& tmpl,
                               ParseStrictness strictness = ParseStrictness::kLenient);

struct GroundingResult {
  std::vector<RegionMask> masks;
  std::vector<std::string> ungrounded;
  /// Labels whose masks were clipped against the exclusion mask.
  std::vector<std::string> clipped;
};

/// Segments every proposed label. Labels with several instances get "#1",
/// "#2", ... suffixes; masks scoring below `box_threshold` are dropped.
GroundingResult ground_regions(SegBackend& seg, const Image& obs,
                               const RegionProposal& proposal, double box_threshold,
                               double text_threshold,
                               const Bitmap* exclusion = nullptr);

}  // namespace byovla
