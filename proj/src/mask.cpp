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

#include "byovla/mask.hpp"

#include <numeric>

namespace byovla {

RLESpec rle_encode(const Bitmap& bitmap) {
  RLESpec spec{static_cast<int>(bitmap.cols()), static_cast<int>(bitmap.rows()), {}};
  const bool* p = bitmap.data();
  const Eigen::Index n = bitmap.size();
  bool current = false;
  std::int64_t run = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p[i] != current) {
      spec.runs.push_back(run);
      current = p[i];
      run = 0;
    }
    ++run;
  }
  spec.runs.push_back(run);
  return spec;
}

Bitmap rle_decode(const RLESpec& spec) {
  if (spec.width < 1 || spec.height < 1) {
    throw Error(ErrorCode::kMalformedRLE, "RLE dimensions must be positive");
  }
  const std::int64_t total = static_cast<std::int64_t>(spec.width) * spec.height;
  std::int64_t sum = 0;
  for (std::int64_t r : spec.runs) {
    if (r < 0) throw Error(ErrorCode::kMalformedRLE, "negative RLE run");
    sum += r;
  }
  if (sum != total) {
    throw Error(ErrorCode::kMalformedRLE,
                "RLE runs sum to " + std::to_string(sum) + ", expected " +
                    std::to_string(total));
  }
  Bitmap out = Bitmap::Constant(spec.height, spec.width, false);
  bool* p = out.data();
  bool value = false;
  std::int64_t pos = 0;
  for (std::int64_t r : spec.runs) {
    if (value) std::fill(p + pos, p + pos + r, true);
    pos += r;
    value = !value;
  }
  return out;
}

nlohmann::json to_json(const RLESpec& spec) {
  return {{"w", spec.width}, {"h", spec.height}, {"runs", spec.runs}};
}

RLESpec rle_from_json(const nlohmann::json& j) {
  try {
    return RLESpec{j.at("w").get<int>(), j.at("h").get<int>(),
                   j.at("runs").get<std::vector<std::int64_t>>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedRLE, std::string("bad RLE object: ") + e.what());
  }
}

Bitmap dilate(const Bitmap& bitmap, int radius) {
  if (radius < 0) {
    throw Error(ErrorCode::kInvalidArgument, "dilation radius must be >= 0");
  }
  if (radius == 0) return bitmap;
  const Eigen::Index rows = bitmap.rows();
  const Eigen::Index cols = bitmap.cols();
  // Separable: a square structuring element is a row pass then a column pass.
  Bitmap horizontal = Bitmap::Constant(rows, cols, false);
  for (Eigen::Index y = 0; y < rows; ++y) {
    for (Eigen::Index x = 0; x < cols; ++x) {
      if (!bitmap(y, x)) continue;
      const Eigen::Index lo = std::max<Eigen::Index>(0, x - radius);
      const Eigen::Index hi = std::min<Eigen::Index>(cols - 1, x + radius);
      horizontal.row(y).segment(lo, hi - lo + 1).setConstant(true);
    }
  }
  Bitmap out = Bitmap::Constant(rows, cols, false);
  for (Eigen::Index x = 0; x < cols; ++x) {
    for (Eigen::Index y = 0; y < rows; ++y) {
      if (!horizontal(y, x)) continue;
      const Eigen::Index lo = std::max<Eigen::Index>(0, y - radius);
      const Eigen::Index hi = std::min<Eigen::Index>(rows - 1, y + radius);
      out.col(x).segment(lo, hi - lo + 1).setConstant(true);
    }
  }
  return out;
}

RegionMask dilate_mask(const RegionMask& mask, int radius) {
  RegionMask out = mask;
  out.bitmap = dilate(mask.bitmap, radius);
  return out;
}

}  // namespace byovla
