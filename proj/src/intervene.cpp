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

#include "byovla/intervene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "byovla/mask.hpp"
#include "byovla/perturb.hpp"
#include "byovla/rng.hpp"
#include "byovla/sensitivity.hpp"

namespace byovla {

Image onion_peel_fill(const Image& image, const Bitmap& mask) {
  if (mask.cols() != image.width() || mask.rows() != image.height()) {
    throw Error(ErrorCode::kInvalidArgument, "mask does not match image size");
  }
  const int w = image.width();
  const int h = image.height();
  Image out = image;
  Bitmap filled = !mask;
  std::vector<std::pair<int, int>> pending;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask(y, x)) pending.emplace_back(x, y);

  struct Update {
    int x, y;
    Rgb color;
  };
  std::vector<Update> layer;
  while (!pending.empty()) {
    layer.clear();
    std::vector<std::pair<int, int>> next;
    for (auto [x, y] : pending) {
      int sum[3] = {0, 0, 0};
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h || !filled(ny, nx)) continue;
          for (int c = 0; c < 3; ++c) sum[c] += out.at(nx, ny, c);
          ++n;
        }
      }
      if (n == 0) {
        next.emplace_back(x, y);
        continue;
      }
      auto mean = [&](int c) { return static_cast<std::uint8_t>((sum[c] + n / 2) / n); };
      layer.push_back({x, y, {mean(0), mean(1), mean(2)}});
    }
    if (layer.empty()) break;  // remaining pixels are unreachable
    for (const auto& u : layer) {
      out.set_pixel(u.x, u.y, u.color);
      filled(u.y, u.x) = true;
    }
    pending.swap(next);
  }
  return out;
}

Image inpaint_object(const Image& image, const RegionMask& mask, const PipelineConfig& cfg,
                     InpaintBackend* backend, std::string* warning) {
  if (mask.kind != RegionKind::kObject) {
    throw Error(ErrorCode::kInvalidArgument, "inpaint_object needs an object region");
  }
  if (!mask.matches(image)) {
    throw Error(ErrorCode::kInvalidArgument, "mask does not match image size");
  }
  const Bitmap dilated = dilate(mask.bitmap, cfg.dilation_radius);
  if (!dilated.any()) return image;
  if (backend != nullptr) {
    try {
      const Image filled = backend->inpaint(image, rle_encode(mask.bitmap), cfg.dilation_radius);
      if (filled.width() != image.width() || filled.height() != image.height()) {
        throw Error(ErrorCode::kShapeError, "inpaint backend changed the image size");
      }
      // Only the dilated footprint may change.
      Image out = image;
      for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
          if (dilated(y, x)) out.set_pixel(x, y, filled.pixel(x, y));
      return out;
    } catch (const Error& e) {
      if (warning != nullptr) {
        *warning = "inpaint backend failed (" + std::string(e.what()) +
                   "); used onion-peel fill";
      }
    }
  }
  return onion_peel_fill(image, dilated);
}

double saturation(Rgb c) {
  const int mx = std::max({c.r, c.g, c.b});
  const int mn = std::min({c.r, c.g, c.b});
  return mx == 0 ? 0.0 : static_cast<double>(mx - mn) / mx;
}

Rgb neutral_color(std::uint64_t seed) {
  CounterRng rng(derive_seed(seed, "neutral_color"));
  const double h = rng.uniform() * 6.0;
  // 0.19 leaves room for byte rounding to stay under 0.2.
  const double s = rng.uniform(0.0, 0.19);
  const double v = rng.uniform(0.4, 0.9);
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
  auto byte = [](double x) { return static_cast<std::uint8_t>(std::lround(x * 255.0)); };
  return {byte(r), byte(g), byte(b)};
}

RecolorResult recolor_until_insensitive(PolicyBackend& policy, const Image& image,
                                        const RegionMask& region, const TaskContext& ctx,
                                        const PipelineConfig& cfg, std::uint64_t seed) {
  if (region.kind != RegionKind::kBackground) {
    throw Error(ErrorCode::kInvalidArgument, "recolouring needs a background region");
  }
  validate_region(region, &image);
  RecolorResult best{image, {}, 0, std::numeric_limits<double>::infinity()};
  for (int attempt = 1; attempt <= cfg.recolor_max_attempts; ++attempt) {
    const std::uint64_t s = derive_seed(seed, {static_cast<std::uint64_t>(attempt)});
    const Rgb color = neutral_color(s);
    const Image recolored = recolor_masked(image, region.bitmap, color);
    // The recoloured image is the new nominal; its noised copy the probe.
    const ProbeOutcome probe = probe_region(policy, recolored, ctx, region, cfg, s);
    if (probe.delta < best.delta) best = {recolored, color, attempt, probe.delta};
    if (probe.delta < cfg.tau_background) {
      return {recolored, color, attempt, probe.delta};
    }
  }
  best.attempts = cfg.recolor_max_attempts;
  throw RecolorExhausted(std::move(best), cfg.recolor_max_attempts);
}

nlohmann::json to_json(const InterventionRecord& r) {
  nlohmann::json j{{"region", r.region},
                   {"kind", std::string(to_string(r.kind))},
                   {"action", r.action},
                   {"attempts", r.attempts},
                   {"delta_before", r.delta_before},
                   {"delta_after", nullptr}};
  if (r.delta_after) j["delta_after"] = *r.delta_after;
  if (r.color) j["color"] = {r.color->r, r.color->g, r.color->b};
  if (!r.warning.empty()) j["warning"] = r.warning;
  return j;
}

InterventionResult apply_interventions(PolicyBackend& policy, const Image& image,
                                       const SensitivityReport& report,
                                       const std::vector<RegionMask>& regions,
                                       const TaskContext& ctx, const PipelineConfig& cfg,
                                       std::uint64_t seed, InpaintBackend* inpainter,
                                       const InterventionOptions& options) {
  InterventionResult result{image, {}};
  for (const auto& entry : report.entries) {
    if (!entry.sensitive) continue;
    auto it = std::find_if(regions.begin(), regions.end(),
                           [&](const RegionMask& r) { return r.label == entry.label; });
    if (it == regions.end()) continue;  // flagged earlier but not grounded now
    const RegionMask& region = *it;

    InterventionRecord rec;
    rec.region = region.label;
    rec.kind = region.kind;
    rec.delta_before = entry.score;
    if (region.kind == RegionKind::kObject) {
      rec.action = "inpaint";
      rec.attempts = 1;
      rec.footprint = dilate(region.bitmap, cfg.dilation_radius);
      result.image = inpaint_object(result.image, region, cfg, inpainter, &rec.warning);
    } else {
      rec.footprint = region.bitmap;
      const std::uint64_t s = derive_seed(seed, region.label);
      const auto cached = options.reuse_colors ? options.reuse_colors->find(region.label)
                                               : std::map<std::string, Rgb>::const_iterator{};
      if (options.reuse_colors && cached != options.reuse_colors->end()) {
        rec.action = "recolor_cached";
        rec.color = cached->second;
        result.image = recolor_masked(result.image, region.bitmap, cached->second);
      } else if (!options.verify_recolor) {
        rec.action = "recolor_unverified";
        rec.attempts = 1;
        rec.color = neutral_color(derive_seed(s, {1}));
        result.image = recolor_masked(result.image, region.bitmap, *rec.color);
      } else {
        try {
          auto rc = recolor_until_insensitive(policy, result.image, region, ctx, cfg, s);
          rec.action = "recolor";
          rec.attempts = rc.attempts;
          rec.delta_after = rc.delta;
          rec.color = rc.color;
          result.image = std::move(rc.image);
        } catch (const RecolorExhausted& e) {
          rec.action = "recolor_exhausted";
          rec.attempts = e.best().attempts;
          rec.delta_after = e.best().delta;
          rec.color = e.best().color;
          rec.warning = e.what();
          result.image = e.best().image;
        }
      }
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

}  // namespace byovla
