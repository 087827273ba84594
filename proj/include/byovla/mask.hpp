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
#include <vector>

#include "byovla/core.hpp"

namespace byovla {

/// Row-major run-length encoding. Runs alternate false/true and always start
/// with a (possibly empty) false run.
struct RLESpec {
  int width = 0;
  int height = 0;
  std::vector<std::int64_t> runs;

  friend bool operator==(const RLESpec&, const RLESpec&) = default;
};

RLESpec rle_encode(const Bitmap& bitmap);
inline RLESpec rle_encode(const RegionMask& mask) {
  return rle_encode(mask.bitmap);
}

/// Throws kMalformedRLE when the runs do not cover width*height exactly.
Bitmap rle_decode(const RLESpec& spec);

/// Wire form {"w","h","runs"}.
nlohmann::json to_json(const RLESpec& spec);
RLESpec rle_from_json(const nlohmann::json& j);

/// Square (Chebyshev) dilation. Radius 0 returns the input.
Bitmap dilate(const Bitmap& bitmap, int radius);
RegionMask dilate_mask(const RegionMask& mask, int radius);

}  // namespace byovla
