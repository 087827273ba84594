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

#include "byovla/attribution.hpp"

#include <algorithm>
#include <cmath>

#include "byovla/perturb.hpp"

namespace byovla {

namespace {

Eigen::Index square_side(Eigen::Index j) {
  const auto side = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(j))));
  return side * side == j ? side : -1;
}

}  // namespace

void validate(const AttentionTensors& t) {
  if (t.attention.rows() < 1 || t.attention.cols() < 1 ||
      t.attention.rows() != t.gradient.rows() ||
      t.attention.cols() != t.gradient.cols()) {
    throw Error(ErrorCode::kShapeError, "attention and gradient shapes differ");
  }
  if (square_side(t.tokens()) < 0) {
    throw Error(ErrorCode::kShapeError,
                "token count " + std::to_string(t.tokens()) + " is not a perfect square");
  }
  if (!t.attention.allFinite() || !t.gradient.allFinite() ||
      (t.attention.array() < 0.0).any()) {
    throw Error(ErrorCode::kShapeError, "attention must be finite and nonnegative");
  }
}

Eigen::MatrixXd gradcam_map(const AttentionTensors& t) {
  validate(t);
  return gradcam_map(t.attention, t.gradient, square_side(t.tokens()));
}

Eigen::MatrixXd bilinear_resize(const Eigen::MatrixXd& map, int rows, int cols) {
  Eigen::MatrixXd out(rows, cols);
  const double sy = static_cast<double>(map.rows()) / rows;
  const double sx = static_cast<double>(map.cols()) / cols;
  const auto last_r = map.rows() - 1;
  const auto last_c = map.cols() - 1;
  for (int r = 0; r < rows; ++r) {
    const double fy = std::clamp((r + 0.5) * sy - 0.5, 0.0, static_cast<double>(last_r));
    const auto y0 = static_cast<Eigen::Index>(std::floor(fy));
    const auto y1 = std::min(y0 + 1, last_r);
    const double ty = fy - y0;
    for (int c = 0; c < cols; ++c) {
      const double fx = std::clamp((c + 0.5) * sx - 0.5, 0.0, static_cast<double>(last_c));
      const auto x0 = static_cast<Eigen::Index>(std::floor(fx));
      const auto x1 = std::min(x0 + 1, last_c);
      const double tx = fx - x0;
      out(r, c) = (1 - ty) * ((1 - tx) * map(y0, x0) + tx * map(y0, x1)) +
                  ty * ((1 - tx) * map(y1, x0) + tx * map(y1, x1));
    }
  }
  return out;
}

Eigen::MatrixXd smooth_map(const Eigen::MatrixXd& map, int kernel) {
  if (kernel == 1) return map;
  const auto taps = gaussian_taps(kernel);
  const int rows = static_cast<int>(map.rows());
  const int cols = static_cast<int>(map.cols());
  // blur_plane works on row-major planes with x = column.
  std::vector<double> src(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) src[static_cast<std::size_t>(r) * cols + c] = map(r, c);
  std::vector<double> dst(src.size());
  blur_plane(src, cols, rows, taps, dst, 0, 0, cols, rows);
  Eigen::MatrixXd out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out(r, c) = dst[static_cast<std::size_t>(r) * cols + c];
  return out;
}

Bitmap attribution_mask(const Eigen::MatrixXd& map, int width, int height,
                        double fraction, int smooth_kernel) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fraction must be in (0, 1)");
  }
  const Eigen::MatrixXd scores =
      bilinear_resize(smooth_map(map, smooth_kernel), height, width);
  const double lo = scores.minCoeff();
  const double hi = scores.maxCoeff();
  if (!(hi > lo)) {
    throw Error(ErrorCode::kFlatAttribution, "attribution map is constant");
  }
  const double cutoff = lo + (1.0 - fraction) * (hi - lo);
  Bitmap out(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out(y, x) = scores(y, x) >= cutoff;
  return out;
}

SensitivityReport gradcam_sensitive_regions(const AttentionTensors& t,
                                            const std::vector<RegionMask>& regions,
                                            double overlap_frac, double fraction,
                                            int smooth_kernel) {
  if (!(overlap_frac > 0.0 && overlap_frac <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "overlap fraction must be in (0, 1]");
  }
  SensitivityReport report;
  if (regions.empty()) return report;
  const Eigen::MatrixXd map = gradcam_map(t);
  Bitmap attributed;
  bool flat = false;
  try {
    attributed = attribution_mask(map, regions.front().width(),
                                  regions.front().height(), fraction, smooth_kernel);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kFlatAttribution) throw;
    flat = true;
  }
  for (const auto& region : regions) {
    double overlap = 0.0;
    if (!flat) {
      if (region.bitmap.rows() != attributed.rows() ||
          region.bitmap.cols() != attributed.cols()) {
        throw Error(ErrorCode::kShapeError, "regions must share one image size");
      }
      const auto hits = (region.bitmap && attributed).count();
      overlap = static_cast<double>(hits) / static_cast<double>(region.count());
    }
    report.entries.push_back(
        make_entry(region.label, region.kind, overlap, overlap_frac, "gradcam"));
  }
  return report;
}

nlohmann::json to_json(const AttentionTensors& t) {
  auto flatten = [](const Eigen::MatrixXd& m) {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
    return v;
  };
  return {{"H", t.heads()}, {"J", t.tokens()}, {"layer", t.layer},
          {"A", flatten(t.attention)}, {"dA", flatten(t.gradient)}};
}

AttentionTensors attention_from_json(const nlohmann::json& j) {
  AttentionTensors t;
  try {
    const auto h = j.at("H").get<Eigen::Index>();
    const auto n = j.at("J").get<Eigen::Index>();
    t.layer = j.at("layer").get<int>();
    const auto a = j.at("A").get<std::vector<double>>();
    const auto d = j.at("dA").get<std::vector<double>>();
    if (h < 1 || n < 1 || a.size() != static_cast<std::size_t>(h * n) ||
        d.size() != a.size()) {
      throw Error(ErrorCode::kShapeError, "attention payload size mismatch");
    }
    t.attention.resize(h, n);
    t.gradient.resize(h, n);
    for (Eigen::Index r = 0; r < h; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) {
        t.attention(r, c) = a[static_cast<std::size_t>(r * n + c)];
        t.gradient(r, c) = d[static_cast<std::size_t>(r * n + c)];
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kShapeError, std::string("attention payload: ") + e.what());
  }
  validate(t);
  return t;
}

}  // namespace byovla
