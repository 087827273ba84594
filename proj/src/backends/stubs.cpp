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

#include "byovla/backends/stubs.hpp"

#include "byovla/intervene.hpp"
#include "byovla/mask.hpp"

namespace byovla {

void StubVLM::add(const std::string& instruction, ProposalResponse answer) {
  answers_[instruction] = std::move(answer);
}

ProposalResponse StubVLM::propose(const Image& /*image*/, const std::string& instruction,
                                  const std::string& /*template_id*/) {
  const auto it = answers_.find(instruction);
  if (it != answers_.end()) return it->second;
  if (fallback_) return *fallback_;
  throw Error(ErrorCode::kFixtureMissing, "no proposal fixture for '" + instruction + "'");
}

StubVLM StubVLM::from_json(const nlohmann::json& j) {
  auto answer = [](const nlohmann::json& a) {
    return ProposalResponse{
        a.value("not_relevant_objects", std::vector<std::string>{}),
        a.value("not_relevant_backgrounds", std::vector<std::string>{}),
        a.value("raw", std::string())};
  };
  StubVLM vlm;
  try {
    for (const auto& f : j.value("fixtures", nlohmann::json::array())) {
      vlm.add(f.at("instruction").get<std::string>(), answer(f));
    }
    if (j.contains("default")) vlm.fallback_ = answer(j.at("default"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFixtureMissing, std::string("bad proposal fixture: ") + e.what());
  }
  return vlm;
}

std::vector<SegmentMask> StubSeg::segment(const Image& image,
                                          const std::vector<std::string>& labels,
                                          double /*box_threshold*/, double /*text_threshold*/) {
  if (fixtures_.empty()) throw Error(ErrorCode::kFixtureMissing, "segmenter has no fixtures");
  std::vector<SegmentMask> out;
  for (const auto& label : labels) {
    for (const auto& f : fixtures_) {
      if (f.label != label) continue;
      if (f.bitmap.cols() != image.width() || f.bitmap.rows() != image.height()) {
        throw Error(ErrorCode::kShapeError, "fixture mask for '" + label + "' has the wrong size");
      }
      out.push_back({label, f.score, rle_encode(f.bitmap)});
    }
  }
  return out;
}

StubSeg::Fixture StubSeg::rectangle(std::string label, int width, int height, int x0, int y0,
                                    int x1, int y1, double score) {
  Bitmap b = Bitmap::Constant(height, width, false);
  b.block(y0, x0, y1 - y0 + 1, x1 - x0 + 1).setConstant(true);
  return {std::move(label), score, std::move(b)};
}

Image StubInpaint::inpaint(const Image& image, const RLESpec& mask, int dilation) {
  const Bitmap bits = rle_decode(mask);
  if (bits.cols() != image.width() || bits.rows() != image.height()) {
    throw Error(ErrorCode::kShapeError, "mask does not match image");
  }
  return onion_peel_fill(image, dilate(bits, dilation));
}

}  // namespace byovla
