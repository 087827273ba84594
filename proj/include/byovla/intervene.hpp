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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "byovla/backends/interfaces.hpp"
#include "byovla/config.hpp"
#include "byovla/core.hpp"
#include "byovla/report.hpp"

namespace byovla {

/// Fills every masked pixel from the outside in: each pass assigns all
/// unfilled pixels that touch a filled 8-neighbour the rounded mean of those
/// neighbours, using values from the previous pass only. Pixels with no path
/// to an unmasked pixel keep their value.
Image onion_peel_fill(const Image& image, const Bitmap& mask);

/// Dilates the mask by cfg.dilation_radius and removes the object with the
/// backend when given, else with onion_peel_fill. Backend failures fall back
/// to onion_peel_fill; `warning` receives the reason.
Image inpaint_object(const Image& image, const RegionMask& mask,
                     const PipelineConfig& cfg, InpaintBackend* backend = nullptr,
                     std::string* warning = nullptr);

/// Random low-saturation colour: HSV with S <= 0.19 and V in [0.4, 0.9].
Rgb neutral_color(std::uint64_t seed);

/// HSV saturation of a byte colour, (max - min) / max; 0 for black.
double saturation(Rgb c);

struct RecolorResult {
  Image image;
  Rgb color;
  int attempts = 0;
  double delta = 0.0;
};

class RecolorExhausted : public Error {
 public:
  RecolorExhausted(RecolorResult best, int attempts)
      : Error(ErrorCode::kRecolorExhausted,
              "no neutral colour brought the region below threshold in " +
                  std::to_string(attempts) + " attempts"),
        best_(std::move(best)) {}

  /// Lowest-delta candidate seen.
  const RecolorResult& best() const noexcept { return best_; }

 private:
  RecolorResult best_;
};

/// Recolours a background region with fresh neutral colours until the policy
/// is insensitive to noise on the recoloured region (delta < tau_background).
RecolorResult recolor_until_insensitive(PolicyBackend& policy, const Image& image,
                                        const RegionMask& region, const TaskContext& ctx,
                                        const PipelineConfig& cfg, std::uint64_t seed);

struct InterventionRecord {
  std::string region;
  RegionKind kind = RegionKind::kObject;
  std::string action;  // inpaint | recolor | recolor_exhausted | recolor_cached | recolor_unverified
  int attempts = 0;
  std::optional<Rgb> color;
  double delta_before = 0.0;
  std::optional<double> delta_after;
  std::string warning;
  /// Pixels this edit was allowed to change.
  Bitmap footprint;
};

/// One JSON-lines audit record (footprint omitted).
nlohmann::json to_json(const InterventionRecord& r);

struct InterventionResult {
  Image image;
  std::vector<InterventionRecord> records;
};

struct InterventionOptions {
  /// Probe each recolouring candidate; when false the first neutral colour
  /// is used as is.
  bool verify_recolor = true;
  /// Colours chosen earlier in the episode, reused without probing.
  const std::map<std::string, Rgb>* reuse_colors = nullptr;
};

/// Edits sensitive regions in report order on a running copy of `image`.
/// Never throws for exhausted recolouring; the best candidate is kept.
InterventionResult apply_interventions(PolicyBackend& policy, const Image& image,
                                       const SensitivityReport& report,
                                       const std::vector<RegionMask>& regions,
                                       const TaskContext& ctx, const PipelineConfig& cfg,
                                       std::uint64_t seed,
                                       InpaintBackend* inpainter = nullptr,
                                       const InterventionOptions& options = {});

}  // namespace byovla
