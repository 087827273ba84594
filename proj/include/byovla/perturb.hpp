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
#include <string>
#include <variant>
#include <vector>

#include "byovla/core.hpp"

namespace byovla {

struct BlurPerturbation {
  int kernel = 25;
};
struct NoisePerturbation {
  double sigma = 0.0;
};
using PerturbKind = std::variant<BlurPerturbation, NoisePerturbation>;

/// "blur:25" / "noise:0.273861".
std::string describe(const PerturbKind& kind);

/// Normalized 1-D Gaussian taps for an odd kernel, sigma = kernel / 6.
std::vector<double> gaussian_taps(int kernel);

/// Separable Gaussian blur of a single row-major plane with edge replication.
/// `x0,y0,w,h` restrict the output window; values outside it are not written.
void blur_plane(const std::vector<double>& src, int width, int height,
                const std::vector<double>& taps, std::vector<double>& dst,
                int x0, int y0, int w, int h);

/// Pixels inside the mask take the Gaussian-blurred value of the full image;
/// pixels outside are untouched. Throws kInvalidKernel for even or < 3 kernels.
Image blur_masked(const Image& image, const Bitmap& mask, int kernel);

/// Adds N(0, sigma^2) on the [0, 1] scale to every channel inside the mask,
/// clamped and rounded back to bytes.
Image noise_masked(const Image& image, const Bitmap& mask, double sigma,
                   std::uint64_t seed);

inline constexpr std::array<double, 3> kDefaultWarmGains{1.10, 1.00, 0.90};

Image warm_filter(const Image& image,
                  const std::array<double, 3>& gains = kDefaultWarmGains);

Image recolor_masked(const Image& image, const Bitmap& mask, Rgb color);

Image apply_perturbation(const Image& image, const Bitmap& mask,
                         const PerturbKind& kind, std::uint64_t seed);

}  // namespace byovla
