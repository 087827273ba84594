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
#include <string>
#include <string_view>
#include <vector>

#include "byovla/backends/interfaces.hpp"

// Message codec for the backend protocol. One JSON object per line on stdio,
// or one POST body over HTTP. Requests carry {"v":"1","id":N,"op":...};
// responses echo "v" and "id". Errors are {"v","id","code","message"}.
//
// Every parse_* function validates its payload and throws ProtocolError
// carrying the offending JSON; nothing unvalidated reaches domain types.
namespace byovla::protocol {

inline constexpr std::string_view kVersion = "1";

enum class Op { kPredict, kPropose, kSegment, kInpaint, kAttn };

std::string_view to_string(Op op);
Op op_from_string(std::string_view s);

nlohmann::json envelope(std::uint64_t id, Op op, nlohmann::json body);
nlohmann::json error_response(const nlohmann::json& id, std::string_view code,
                              std::string_view message);
bool is_error(const nlohmann::json& response);

/// Checks "v" and the echoed id; throws ProtocolError otherwise.
void check_envelope(const nlohmann::json& response, std::uint64_t expected_id);

std::string image_to_wire(const Image& image);
Image image_from_wire(const nlohmann::json& j, std::string_view field);

// Requests.
nlohmann::json predict_request(const PredictRequest& req);
PredictRequest parse_predict_request(const nlohmann::json& j);

struct ProposeRequest {
  Image image;
  std::string instruction;
  std::string template_id;
};
nlohmann::json propose_request(const ProposeRequest& req);
ProposeRequest parse_propose_request(const nlohmann::json& j);

struct SegmentRequest {
  Image image;
  std::vector<std::string> labels;
  double box_threshold = 0.4;
  double text_threshold = 0.4;
};
nlohmann::json segment_request(const SegmentRequest& req);
SegmentRequest parse_segment_request(const nlohmann::json& j);

struct InpaintRequest {
  Image image;
  RLESpec mask;
  int dilation = 0;
};
nlohmann::json inpaint_request(const InpaintRequest& req);
InpaintRequest parse_inpaint_request(const nlohmann::json& j);

struct AttnRequest {
  Image image;
  std::string instruction;
  int layer = 0;
};
nlohmann::json attn_request(const AttnRequest& req);
AttnRequest parse_attn_request(const nlohmann::json& j);

// Responses. `chunk_len` < 0 accepts any length shared by all chunks.
nlohmann::json predict_response(const std::vector<ActionChunk>& chunks);
std::vector<ActionChunk> parse_predict_response(const nlohmann::json& j, int k, int chunk_len);

nlohmann::json propose_response(const ProposalResponse& r);
ProposalResponse parse_propose_response(const nlohmann::json& j);

nlohmann::json segment_response(const std::vector<SegmentMask>& masks);
std::vector<SegmentMask> parse_segment_response(const nlohmann::json& j,
                                                const std::vector<std::string>& labels,
                                                int width, int height);

nlohmann::json inpaint_response(const Image& image);
Image parse_inpaint_response(const nlohmann::json& j, int width, int height);

nlohmann::json attn_response(const AttentionTensors& t);
AttentionTensors parse_attn_response(const nlohmann::json& j);

}  // namespace byovla::protocol
