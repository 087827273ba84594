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

#include "byovla/core.hpp"

#include <cmath>

namespace byovla {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMalformedRLE: return "MalformedRLE";
    case ErrorCode::kInvalidKernel: return "InvalidKernel";
    case ErrorCode::kChunkShapeError: return "ChunkShapeError";
    case ErrorCode::kDegenerateHorizon: return "DegenerateHorizon";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kProposalParseError: return "ProposalParseError";
    case ErrorCode::kRecolorExhausted: return "RecolorExhausted";
    case ErrorCode::kEmptyCalibrationSet: return "EmptyCalibrationSet";
    case ErrorCode::kShapeError: return "ShapeError";
    case ErrorCode::kFlatAttribution: return "FlatAttribution";
    case ErrorCode::kProtocolError: return "ProtocolError";
    case ErrorCode::kFixtureMissing: return "FixtureMissing";
    case ErrorCode::kSceneError: return "SceneError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be >= 1");
  }
  data_.resize(pixel_count() * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

Image::Image(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kInvalidArgument, "image dimensions must be >= 1");
  }
  if (data_.size() != pixel_count() * 3) {
    throw Error(ErrorCode::kInvalidArgument,
                "image data length must equal width*height*3");
  }
}

std::string_view to_string(RegionKind kind) {
  return kind == RegionKind::kObject ? "object" : "background";
}

RegionKind region_kind_from_string(std::string_view s) {
  if (s == "object") return RegionKind::kObject;
  if (s == "background") return RegionKind::kBackground;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown region kind '" + std::string(s) + "'");
}

void validate_region(const RegionMask& region, const Image* image) {
  if (region.bitmap.size() == 0 || !region.bitmap.any()) {
    throw Error(ErrorCode::kInvalidArgument,
                "region '" + region.label + "' has no pixels");
  }
  if (!(region.score >= 0.0 && region.score <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "region '" + region.label + "' score outside [0, 1]");
  }
  if (image != nullptr && !region.matches(*image)) {
    throw Error(ErrorCode::kInvalidArgument,
                "region '" + region.label + "' does not match image size");
  }
}

RegionMask make_region(std::string label, RegionKind kind, Bitmap bitmap,
                       double score) {
  RegionMask r{std::move(label), kind, std::move(bitmap), score};
  validate_region(r);
  return r;
}

WeightVector translational_weights() {
  WeightVector w = WeightVector::Zero();
  w.head<3>().setOnes();
  return w;
}

void validate_chunk(const ActionChunk& chunk) {
  if (chunk.rows() < 1) {
    throw Error(ErrorCode::kChunkShapeError, "action chunk has no steps");
  }
  if (!chunk.allFinite()) {
    throw Error(ErrorCode::kChunkShapeError, "action chunk has non-finite entries");
  }
  const auto gripper = chunk.col(kActionDim - 1);
  if ((gripper.array() < 0.0).any() || (gripper.array() > 1.0).any()) {
    throw Error(ErrorCode::kChunkShapeError, "gripper command outside [0, 1]");
  }
}

void validate_weights(const WeightVector& w) {
  if (!w.allFinite() || (w.array() < 0.0).any() || (w.array() == 0.0).all()) {
    throw Error(ErrorCode::kInvalidArgument,
                "weights must be finite, nonnegative and not all zero");
  }
}

}  // namespace byovla
