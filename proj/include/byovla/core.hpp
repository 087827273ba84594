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

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "byovla/errors.hpp"

namespace byovla {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Row-major interleaved 8-bit RGB raster.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {});
  Image(int width, int height, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  std::uint8_t& at(int x, int y, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }
  Rgb pixel(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    return {data_[i], data_[i + 1], data_[i + 2]};
  }
  void set_pixel(int x, int y, Rgb c) {
    const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    data_[i] = c.r;
    data_[i + 1] = c.g;
    data_[i + 2] = c.b;
  }

  const std::vector<std::uint8_t>& data() const noexcept { return data_; }
  std::vector<std::uint8_t>& data() noexcept { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Boolean raster, row-major so that linear indices follow image order.
using Bitmap = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class RegionKind { kObject, kBackground };

std::string_view to_string(RegionKind kind);
RegionKind region_kind_from_string(std::string_view s);

/// A labelled pixel region. `bitmap` is indexed (row, col) = (y, x).
struct RegionMask {
  std::string label;
  RegionKind kind = RegionKind::kObject;
  Bitmap bitmap;
  double score = 1.0;

  int width() const noexcept { return static_cast<int>(bitmap.cols()); }
  int height() const noexcept { return static_cast<int>(bitmap.rows()); }
  bool at(int x, int y) const { return bitmap(y, x); }
  Eigen::Index count() const { return bitmap.count(); }
  bool matches(const Image& image) const {
    return width() == image.width() && height() == image.height();
  }
};

/// Throws kInvalidArgument unless the mask has at least one set pixel and
/// matches `image` (when given).
void validate_region(const RegionMask& region, const Image* image = nullptr);

RegionMask make_region(std::string label, RegionKind kind, Bitmap bitmap,
                       double score = 1.0);

inline constexpr int kActionDim = 7;

/// Columns: dx, dy, dz (m), droll, dpitch, dyaw (rad), gripper in [0, 1].
template <typename Scalar>
using ActionChunkT =
    Eigen::Matrix<Scalar, Eigen::Dynamic, kActionDim, Eigen::RowMajor>;
using ActionChunk = ActionChunkT<double>;

template <typename Scalar>
using ActionT = Eigen::Matrix<Scalar, kActionDim, 1>;
using Action = ActionT<double>;

template <typename Scalar>
using WeightVectorT = Eigen::Matrix<Scalar, kActionDim, 1>;
using WeightVector = WeightVectorT<double>;

/// Indicator on dx, dy, dz.
WeightVector translational_weights();

/// Checks finiteness, gripper range and row count.
void validate_chunk(const ActionChunk& chunk);
void validate_weights(const WeightVector& w);

}  // namespace byovla
