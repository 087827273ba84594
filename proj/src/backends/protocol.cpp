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

#include "byovla/backends/protocol.hpp"

#include <cmath>

#include "byovla/image_io.hpp"
#include "byovla/mask.hpp"

namespace byovla::protocol {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg, const json& payload) {
  throw ProtocolError(msg, payload.dump());
}

const json& field(const json& j, std::string_view key) {
  if (!j.is_object()) fail("message is not a JSON object", j);
  const auto it = j.find(key);
  if (it == j.end()) fail("missing field '" + std::string(key) + "'", j);
  return *it;
}

std::string get_string(const json& j, std::string_view key) {
  const json& v = field(j, key);
  if (!v.is_string()) fail("field '" + std::string(key) + "' must be a string", j);
  return v.get<std::string>();
}

std::int64_t get_int(const json& j, std::string_view key) {
  const json& v = field(j, key);
  if (!v.is_number_integer()) fail("field '" + std::string(key) + "' must be an integer", j);
  return v.get<std::int64_t>();
}

double get_number(const json& j, std::string_view key) {
  const json& v = field(j, key);
  if (!v.is_number()) fail("field '" + std::string(key) + "' must be a number", j);
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail("field '" + std::string(key) + "' is not finite", j);
  return d;
}

std::vector<std::string> get_strings(const json& j, std::string_view key) {
  const json& v = field(j, key);
  if (!v.is_array()) fail("field '" + std::string(key) + "' must be an array", j);
  std::vector<std::string> out;
  for (const auto& e : v) {
    if (!e.is_string()) fail("field '" + std::string(key) + "' must hold strings", j);
    out.push_back(e.get<std::string>());
  }
  return out;
}

RLESpec get_rle(const json& j, std::string_view key) {
  const json& v = field(j, key);
  try {
    RLESpec spec = rle_from_json(v);
    rle_decode(spec);  // validates run sums
    return spec;
  } catch (const Error& e) {
    fail("field '" + std::string(key) + "': " + e.what(), j);
  } catch (const json::exception& e) {
    fail("field '" + std::string(key) + "': " + e.what(), j);
  }
}

}  // namespace

std::string_view to_string(Op op) {
  switch (op) {
    case Op::kPredict: return "predict";
    case Op::kPropose: return "propose";
    case Op::kSegment: return "segment";
    case Op::kInpaint: return "inpaint";
    case Op::kAttn: return "attn";
  }
  return "unknown";
}

Op op_from_string(std::string_view s) {
  if (s == "predict") return Op::kPredict;
  if (s == "propose") return Op::kPropose;
  if (s == "segment") return Op::kSegment;
  if (s == "inpaint") return Op::kInpaint;
  if (s == "attn") return Op::kAttn;
  throw ProtocolError("unknown op '" + std::string(s) + "'", std::string(s));
}

json envelope(std::uint64_t id, Op op, json body) {
  body["v"] = kVersion;
  body["id"] = id;
  body["op"] = to_string(op);
  return body;
}

json error_response(const json& id, std::string_view code, std::string_view message) {
  return {{"v", kVersion}, {"id", id}, {"code", code}, {"message", message}};
}

bool is_error(const json& response) {
  return response.is_object() && response.contains("code") && response.contains("message");
}

void check_envelope(const json& response, std::uint64_t expected_id) {
  if (!response.is_object()) fail("response is not a JSON object", response);
  if (get_string(response, "v") != kVersion) fail("unsupported protocol version", response);
  const json& id = field(response, "id");
  if (!id.is_number_unsigned() && !id.is_number_integer()) fail("response id is not an integer", response);
  if (id.get<std::uint64_t>() != expected_id) {
    fail("response id " + id.dump() + " does not echo request id " + std::to_string(expected_id),
         response);
  }
}

std::string image_to_wire(const Image& image) { return base64_encode(encode_png(image)); }

Image image_from_wire(const json& j, std::string_view key) {
  const std::string text = get_string(j, key);
  try {
    return decode_png(base64_decode(text));
  } catch (const Error& e) {
    fail("field '" + std::string(key) + "' is not a base64 PNG: " + e.what(), j);
  }
}

// ------------------------------------------------------------------ requests

json predict_request(const PredictRequest& req) {
  json j{{"image", image_to_wire(req.image)},
         {"instruction", req.context.instruction},
         {"k", req.k},
         {"seed", req.seed}};
  if (req.context.proprio) j["proprio"] = *req.context.proprio;
  return j;
}

PredictRequest parse_predict_request(const json& j) {
  PredictRequest req;
  req.image = image_from_wire(j, "image");
  req.context.instruction = get_string(j, "instruction");
  const auto k = get_int(j, "k");
  if (k < 1 || k > 1024) fail("k must be in [1, 1024]", j);
  req.k = static_cast<int>(k);
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer()) {
      fail("seed must be an integer", j);
    }
    req.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("proprio")) {
    const json& p = j.at("proprio");
    if (!p.is_array() || p.size() != 4) fail("proprio must hold 4 numbers", j);
    Proprio out{};
    for (std::size_t i = 0; i < 4; ++i) {
      if (!p[i].is_number()) fail("proprio must hold 4 numbers", j);
      out[i] = p[i].get<double>();
    }
    req.context.proprio = out;
  }
  return req;
}

json propose_request(const ProposeRequest& req) {
  return {{"image", image_to_wire(req.image)},
          {"instruction", req.instruction},
          {"template_id", req.template_id}};
}

ProposeRequest parse_propose_request(const json& j) {
  return {image_from_wire(j, "image"), get_string(j, "instruction"), get_string(j, "template_id")};
}

json segment_request(const SegmentRequest& req) {
  return {{"image", image_to_wire(req.image)},
          {"labels", req.labels},
          {"box_threshold", req.box_threshold},
          {"text_threshold", req.text_threshold}};
}

SegmentRequest parse_segment_request(const json& j) {
  SegmentRequest req;
  req.image = image_from_wire(j, "image");
  req.labels = get_strings(j, "labels");
  req.box_threshold = get_number(j, "box_threshold");
  req.text_threshold = get_number(j, "text_threshold");
  return req;
}

json inpaint_request(const InpaintRequest& req) {
  return {{"image", image_to_wire(req.image)}, {"rle", to_json(req.mask)}, {"dilation", req.dilation}};
}

InpaintRequest parse_inpaint_request(const json& j) {
  InpaintRequest req;
  req.image = image_from_wire(j, "image");
  req.mask = get_rle(j, "rle");
  if (req.mask.width != req.image.width() || req.mask.height != req.image.height()) {
    fail("mask size does not match image", j);
  }
  const auto d = get_int(j, "dilation");
  if (d < 0) fail("dilation must be >= 0", j);
  req.dilation = static_cast<int>(d);
  return req;
}

json attn_request(const AttnRequest& req) {
  return {{"image", image_to_wire(req.image)}, {"instruction", req.instruction}, {"layer", req.layer}};
}

AttnRequest parse_attn_request(const json& j) {
  return {image_from_wire(j, "image"), get_string(j, "instruction"),
          static_cast<int>(get_int(j, "layer"))};
}

// ----------------------------------------------------------------- responses

json predict_response(const std::vector<ActionChunk>& chunks) {
  json arr = json::array();
  for (const auto& c : chunks) {
    json rows = json::array();
    for (Eigen::Index t = 0; t < c.rows(); ++t) {
      json row = json::array();
      for (int i = 0; i < kActionDim; ++i) row.push_back(c(t, i));
      rows.push_back(std::move(row));
    }
    arr.push_back(std::move(rows));
  }
  return {{"chunks", std::move(arr)}};
}

std::vector<ActionChunk> parse_predict_response(const json& j, int k, int chunk_len) {
  const json& chunks = field(j, "chunks");
  if (!chunks.is_array()) fail("chunks must be an array", j);
  if (static_cast<int>(chunks.size()) != k) {
    fail("expected " + std::to_string(k) + " chunks, got " + std::to_string(chunks.size()), j);
  }
  std::vector<ActionChunk> out;
  std::size_t expected_rows = chunk_len >= 0 ? static_cast<std::size_t>(chunk_len) : 0;
  for (const auto& c : chunks) {
    if (!c.is_array() || c.empty()) fail("each chunk must be a non-empty array", j);
    if (expected_rows == 0) expected_rows = c.size();
    if (c.size() != expected_rows) {
      fail("chunk has " + std::to_string(c.size()) + " steps, expected " +
               std::to_string(expected_rows),
           j);
    }
    ActionChunk chunk(static_cast<Eigen::Index>(c.size()), kActionDim);
    for (std::size_t t = 0; t < c.size(); ++t) {
      const json& row = c[t];
      if (!row.is_array() || row.size() != kActionDim) fail("each action must have 7 entries", j);
      for (int i = 0; i < kActionDim; ++i) {
        if (!row[i].is_number()) fail("action entries must be numbers", j);
        chunk(static_cast<Eigen::Index>(t), i) = row[i].get<double>();
      }
    }
    try {
      validate_chunk(chunk);
    } catch (const Error& e) {
      fail(std::string("invalid chunk: ") + e.what(), j);
    }
    out.push_back(std::move(chunk));
  }
  return out;
}

json propose_response(const ProposalResponse& r) {
  return {{"not_relevant_objects", r.not_relevant_objects},
          {"not_relevant_backgrounds", r.not_relevant_backgrounds},
          {"raw", r.raw}};
}

ProposalResponse parse_propose_response(const json& j) {
  return {get_strings(j, "not_relevant_objects"), get_strings(j, "not_relevant_backgrounds"),
          get_string(j, "raw")};
}

json segment_response(const std::vector<SegmentMask>& masks) {
  json arr = json::array();
  for (const auto& m : masks) {
    arr.push_back({{"label", m.label}, {"score", m.score}, {"rle", to_json(m.rle)}});
  }
  return {{"masks", std::move(arr)}};
}

std::vector<SegmentMask> parse_segment_response(const json& j,
                                                const std::vector<std::string>& labels,
                                                int width, int height) {
  const json& masks = field(j, "masks");
  if (!masks.is_array()) fail("masks must be an array", j);
  std::vector<SegmentMask> out;
  for (const auto& m : masks) {
    SegmentMask sm;
    sm.label = get_string(m, "label");
    if (std::find(labels.begin(), labels.end(), sm.label) == labels.end()) {
      fail("mask for unrequested label '" + sm.label + "'", j);
    }
    sm.score = get_number(m, "score");
    if (sm.score < 0.0 || sm.score > 1.0) fail("mask score outside [0, 1]", j);
    sm.rle = get_rle(m, "rle");
    if (sm.rle.width != width || sm.rle.height != height) fail("mask size does not match image", j);
    out.push_back(std::move(sm));
  }
  return out;
}

json inpaint_response(const Image& image) { return {{"image", image_to_wire(image)}}; }

Image parse_inpaint_response(const json& j, int width, int height) {
  Image img = image_from_wire(j, "image");
  if (img.width() != width || img.height() != height) fail("inpainted image changed size", j);
  return img;
}

json attn_response(const AttentionTensors& t) { return to_json(t); }

AttentionTensors parse_attn_response(const json& j) {
  try {
    return attention_from_json(j);
  } catch (const Error& e) {
    fail(std::string("attention tensors: ") + e.what(), j);
  }
}

}  // namespace byovla::protocol
