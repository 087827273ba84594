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

#include <cmath>
#include <random>

#include "support.hpp"

#include "byovla/perturb.hpp"

using namespace byovla;
using byovla::test::random_bitmap;
using byovla::test::random_image;

namespace {

// Unseparated 2-D Gaussian at one pixel, replicate padding, sigma = k / 6.
double blur_oracle(const Image& img, int x, int y, int c, int k) {
  const double sigma = k / 6.0;
  const int r = k / 2;
  double num = 0, den = 0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double wgt = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      const int sx = std::clamp(x + dx, 0, img.width() - 1);
      const int sy = std::clamp(y + dy, 0, img.height() - 1);
      num += wgt * img.at(sx, sy, c);
      den += wgt;
    }
  return num / den;
}

// Outside-mask pixels must be untouched.
void check_locality(const Image& in, const Image& out, const Bitmap& mask) {
  REQUIRE(in.width() == out.width());
  REQUIRE(in.height() == out.height());
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < in.width(); ++x)
      if (!mask(y, x)) REQUIRE(in.pixel(x, y) == out.pixel(x, y));
}

}  // namespace

TEST_CASE("gaussian taps") {
  const auto taps = gaussian_taps(25);
  REQUIRE(taps.size() == 25);
  double sum = 0;
  for (double t : taps) sum += t;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  for (int i = 0; i < 12; ++i) CHECK(taps[i] == doctest::Approx(taps[24 - i]));
  CHECK(taps[12] > taps[11]);
  CHECK_THROWS_CODE(gaussian_taps(24), ErrorCode::kInvalidKernel);
  CHECK_THROWS_CODE(gaussian_taps(1), ErrorCode::kInvalidKernel);
}

TEST_CASE("blur of a constant image is the identity") {
  const Image gray(40, 30, Rgb{128, 128, 128});
  std::mt19937_64 gen(1);
  const Bitmap mask = random_bitmap(gen, 40, 30, 0.5);
  CHECK(blur_masked(gray, mask, 25) == gray);
}

TEST_CASE("blur with an empty mask changes nothing") {
  std::mt19937_64 gen(2);
  const Image img = random_image(gen, 20, 20);
  CHECK(blur_masked(img, Bitmap::Constant(20, 20, false), 25) == img);
}

TEST_CASE("blur of a 1x3 spike against direct convolution") {
  Image img(3, 1, Rgb{0, 0, 0});
  img.set_pixel(1, 0, Rgb{255, 255, 255});
  const Image out = blur_masked(img, Bitmap::Constant(1, 3, true), 3);
  const int centre = out.at(1, 0, 0);
  CHECK(centre > 0);
  CHECK(centre < 255);
  CHECK(centre == static_cast<int>(std::lround(blur_oracle(img, 1, 0, 0, 3))));
  CHECK(out.at(0, 0, 0) == static_cast<int>(std::lround(blur_oracle(img, 0, 0, 0, 3))));
}

TEST_CASE("blur matches the direct 2-D convolution oracle") {
  std::mt19937_64 gen(3);
  for (int k : {3, 7, 25}) {
    const Image img = random_image(gen, 31, 23);
    const Bitmap mask = random_bitmap(gen, 31, 23, 0.4);
    const Image out = blur_masked(img, mask, k);
    check_locality(img, out, mask);
    for (int y = 0; y < 23; ++y)
      for (int x = 0; x < 31; ++x)
        if (mask(y, x))
          for (int c = 0; c < 3; ++c) {
            const double ref = blur_oracle(img, x, y, c, k);
            // Separable and direct sums differ only in the last ulps; a value
            // sitting on a rounding boundary may go either way.
            const double frac = ref - std::floor(ref);
            if (std::abs(frac - 0.5) < 1e-9) continue;
            REQUIRE(out.at(x, y, c) == static_cast<int>(std::lround(ref)));
          }
  }
  CHECK_THROWS_CODE(blur_masked(Image(4, 4), Bitmap::Constant(4, 4, true), 4),
                    ErrorCode::kInvalidKernel);
  CHECK_THROWS_CODE(blur_masked(Image(4, 4), Bitmap::Constant(3, 4, true), 3),
                    ErrorCode::kInvalidArgument);
}

TEST_CASE("noise is local, seeded and deterministic") {
  std::mt19937_64 gen(4);
  const Image img = random_image(gen, 32, 32);
  const Bitmap mask = random_bitmap(gen, 32, 32, 0.3);
  const double sigma = std::sqrt(0.075);
  const Image a = noise_masked(img, mask, sigma, 99);
  const Image b = noise_masked(img, mask, sigma, 99);
  const Image c = noise_masked(img, mask, sigma, 100);
  CHECK(a == b);
  CHECK(a != c);
  check_locality(img, a, mask);
  CHECK(noise_masked(img, Bitmap::Constant(32, 32, false), sigma, 1) == img);
  CHECK(noise_masked(img, mask, 1e-9, 5) == img);
}

TEST_CASE("noise spread matches a Monte Carlo oracle with the same clamping") {
  const int side = 200;
  const Image gray(side, side, Rgb{128, 128, 128});
  const double sigma = std::sqrt(0.075);
  const Image out = noise_masked(gray, Bitmap::Constant(side, side, true), sigma, 2024);

  auto spread = [](const std::vector<double>& v) {
    double m = 0, s = 0;
    for (double x : v) m += x;
    m /= v.size();
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / (v.size() - 1));
  };
  std::vector<double> observed;
  for (auto v : out.data()) observed.push_back(v);

  // Independent simulation: different generator, same clamp and rounding.
  std::mt19937_64 gen(77);
  std::normal_distribution<double> eta(0.0, sigma);
  std::vector<double> simulated;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double v = std::clamp(128.0 / 255.0 + eta(gen), 0.0, 1.0);
    simulated.push_back(std::round(v * 255.0));
  }
  const double got = spread(observed);
  const double want = spread(simulated);
  CHECK(std::abs(got - want) / want < 0.02);
  CHECK(std::abs(got - 0.274 * 255.0) / (0.274 * 255.0) < 0.10);
}

TEST_CASE("warm filter") {
  const Image gray(3, 2, Rgb{100, 100, 100});
  CHECK(warm_filter(gray, {1.0, 1.0, 1.0}) == gray);
  CHECK(warm_filter(gray).pixel(2, 1) == Rgb{110, 100, 90});
  const Image red(1, 1, Rgb{250, 0, 0});
  CHECK(warm_filter(red, {1.1, 1.0, 0.9}).pixel(0, 0) == Rgb{255, 0, 0});
  CHECK_THROWS_CODE(warm_filter(gray, {0.0, 1.0, 1.0}), ErrorCode::kInvalidArgument);
}

TEST_CASE("recolor") {
  std::mt19937_64 gen(6);
  const Image img = random_image(gen, 9, 8);
  const Image black = recolor_masked(img, Bitmap::Constant(8, 9, true), Rgb{0, 0, 0});
  CHECK(black == Image(9, 8, Rgb{0, 0, 0}));
  CHECK(recolor_masked(img, Bitmap::Constant(8, 9, false), Rgb{1, 2, 3}) == img);

  Bitmap checker(8, 9);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 9; ++x) checker(y, x) = (x + y) % 2 == 0;
  const Image out = recolor_masked(img, checker, Rgb{7, 7, 7});
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 9; ++x)
      CHECK(out.pixel(x, y) == (checker(y, x) ? Rgb{7, 7, 7} : img.pixel(x, y)));
}

TEST_CASE("every operator is local on random inputs") {
  std::mt19937_64 gen(7);
  for (int i = 0; i < 20; ++i) {
    const Image img = random_image(gen, 24, 18);
    const Bitmap mask = random_bitmap(gen, 24, 18, 0.2);
    check_locality(img, blur_masked(img, mask, 25), mask);
    check_locality(img, noise_masked(img, mask, 0.3, i), mask);
    check_locality(img, recolor_masked(img, mask, Rgb{1, 2, 3}), mask);
    check_locality(img, apply_perturbation(img, mask, BlurPerturbation{15}, i), mask);
    check_locality(img, apply_perturbation(img, mask, NoisePerturbation{0.27}, i), mask);
  }
}

TEST_CASE("perturbation descriptors") {
  CHECK(describe(BlurPerturbation{25}) == "blur:25");
  CHECK(describe(NoisePerturbation{std::sqrt(0.075)}) == "noise:0.273861");
}
