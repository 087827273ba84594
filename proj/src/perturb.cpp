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

#include "byovla/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "byovla/rng.hpp"

namespace byovla {

namespace {

void check_mask(const Image& image, const Bitmap& mask) {
  if (mask.cols() != image.width() || mask.rows() != image.height()) {
    throw Error(ErrorCode::kInvalidArgument, "mask does not match image size");
  }
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Bounding box of set pixels; returns false for an empty mask.
bool bounding_box(const Bitmap& mask, int& x0, int& y0, int& x1, int& y1) {
  x0 = static_cast<int>(mask.cols());
  y0 = static_cast<int>(mask.rows());
  x1 = -1;
  y1 = -1;
  for (int y = 0; y < mask.rows(); ++y) {
    for (int x = 0; x < mask.cols(); ++x) {
      if (!mask(y, x)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  return x1 >= 0;
}

}  // namespace

std::string describe(const PerturbKind& kind) {
  char buf[64];
  if (const auto* b = std::get_if<BlurPerturbation>(&kind)) {
    std::snprintf(buf, sizeof buf, "blur:%d", b->kernel);
  } else {
    std::snprintf(buf, sizeof buf, "noise:%.6f", std::get<NoisePerturbation>(kind).sigma);
  }
  return buf;
}

std::vector<double> gaussian_taps(int kernel) {
  if (kernel < 3 || kernel % 2 == 0) {
    throw Error(ErrorCode::kInvalidKernel,
                "blur kernel must be odd and >= 3, got " + std::to_string(kernel));
  }
  const double sigma = kernel / 6.0;
  const int r = kernel / 2;
  std::vector<double> taps(static_cast<std::size_t>(kernel));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    taps[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += taps[i + r];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

void blur_plane(const std::vector<double>& src, int width, int height,
                const std::vector<double>& taps, std::vector<double>& dst,
                int x0, int y0, int w, int h) {
  const int r = static_cast<int>(taps.size()) / 2;
  // Horizontal pass over the rows the vertical pass will read.
  const int ry0 = std::max(0, y0 - r);
  const int ry1 = std::min(height - 1, y0 + h - 1 + r);
  std::vector<double> tmp(static_cast<std::size_t>(ry1 - ry0 + 1) * w);
  for (int y = ry0; y <= ry1; ++y) {
    const double* row = src.data() + static_cast<std::size_t>(y) * width;
    for (int x = x0; x < x0 + w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) {
        acc += taps[k + r] * row[std::clamp(x + k, 0, width - 1)];
      }
      tmp[static_cast<std::size_t>(y - ry0) * w + (x - x0)] = acc;
    }
  }
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) {
      double acc = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int yy = std::clamp(y + k, 0, height - 1);
        acc += taps[k + r] * tmp[static_cast<std::size_t>(yy - ry0) * w + (x - x0)];
      }
      dst[static_cast<std::size_t>(y) * width + x] = acc;
    }
  }
}

Image blur_masked(const Image& image, const Bitmap& mask, int kernel) {
  const auto taps = gaussian_taps(kernel);
  check_mask(image, mask);
  int x0, y0, x1, y1;
  if (!bounding_box(mask, x0, y0, x1, y1)) return image;

  const int width = image.width();
  const int height = image.height();
  Image out = image;
  std::vector<double> plane(image.pixel_count());
  std::vector<double> blurred(image.pixel_count());
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = image.data()[i * 3 + c];
    blur_plane(plane, width, height, taps, blurred, x0, y0, x1 - x0 + 1, y1 - y0 + 1);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (mask(y, x)) {
          out.at(x, y, c) = to_byte(blurred[static_cast<std::size_t>(y) * width + x]);
        }
      }
    }
  }
  return out;
}

Image noise_masked(const Image& image, const Bitmap& mask, double sigma,
                   std::uint64_t seed) {
  if (!(sigma > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "noise sigma must be positive");
  }
  check_mask(image, mask);
  Image out = image;
  CounterRng rng(derive_seed(seed, "noise_masked"));
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (!mask(y, x)) continue;
      for (int c = 0; c < 3; ++c) {
        const double v = image.at(x, y, c) / 255.0 + rng.normal(0.0, sigma);
        out.at(x, y, c) = to_byte(std::clamp(v, 0.0, 1.0) * 255.0);
      }
    }
  }
  return out;
}

Image warm_filter(const Image& image, const std::array<double, 3>& gains) {
  for (double g : gains) {
    if (!(g > 0.0)) throw Error(ErrorCode::kInvalidArgument, "warm gains must be positive");
  }
  Image out = image;
  auto& d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = to_byte(d[i] * gains[i % 3]);
  return out;
}

Image recolor_masked(const Image& image, const Bitmap& mask, Rgb color) {
  check_mask(image, mask);
  Image out = image;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (mask(y, x)) out.set_pixel(x, y, color);
    }
  }
  return out;
}

Image apply_perturbation(const Image& image, const Bitmap& mask,
                         const PerturbKind& kind, std::uint64_t seed) {
  if (const auto* b = std::get_if<BlurPerturbation>(&kind)) {
    return blur_masked(image, mask, b->kernel);
  }
  return noise_masked(image, mask, std::get<NoisePerturbation>(kind).sigma, seed);
}

}  // namespace byovla
