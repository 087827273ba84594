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

#include "byovla/backends/server.hpp"

#include <istream>
#include <mutex>
#include <ostream>

#include "httplib.h"

#include "byovla/backends/protocol.hpp"

namespace byovla {

using nlohmann::json;

std::string ProtocolServer::handle(const std::string& line) {
  json req;
  try {
    req = json::parse(line);
  } catch (const json::exception& e) {
    return protocol::error_response(nullptr, "bad_request", e.what()).dump();
  }
  const json id = req.is_object() && req.contains("id") ? req.at("id") : json(nullptr);
  if (!req.is_object() || !id.is_number_integer()) {
    return protocol::error_response(id, "bad_request", "request needs an integer id").dump();
  }
  if (req.value("v", std::string()) != protocol::kVersion) {
    return protocol::error_response(id, "unsupported_version", "expected v=\"1\"").dump();
  }
  auto reply = [&](json body) {
    body["v"] = protocol::kVersion;
    body["id"] = id;
    return body.dump();
  };
  auto unsupported = [&](std::string_view what) {
    return protocol::error_response(id, "unsupported", std::string(what) + " backend not served")
        .dump();
  };
  try {
    const protocol::Op op = protocol::op_from_string(req.value("op", std::string()));
    switch (op) {
      case protocol::Op::kPredict: {
        if (!backends_.policy) return unsupported("policy");
        const auto r = protocol::parse_predict_request(req);
        return reply(protocol::predict_response(backends_.policy->predict(r)));
      }
      case protocol::Op::kPropose: {
        if (!backends_.vlm) return unsupported("vlm");
        const auto r = protocol::parse_propose_request(req);
        return reply(protocol::propose_response(
            backends_.vlm->propose(r.image, r.instruction, r.template_id)));
      }
      case protocol::Op::kSegment: {
        if (!backends_.seg) return unsupported("segmenter");
        const auto r = protocol::parse_segment_request(req);
        return reply(protocol::segment_response(
            backends_.seg->segment(r.image, r.labels, r.box_threshold, r.text_threshold)));
      }
      case protocol::Op::kInpaint: {
        if (!backends_.inpaint) return unsupported("inpaint");
        const auto r = protocol::parse_inpaint_request(req);
        return reply(protocol::inpaint_response(backends_.inpaint->inpaint(r.image, r.mask, r.dilation)));
      }
      case protocol::Op::kAttn: {
        if (!backends_.attn) return unsupported("attention");
        const auto r = protocol::parse_attn_request(req);
        return reply(protocol::attn_response(backends_.attn->attention(r.image, r.instruction, r.layer)));
      }
    }
  } catch (const ProtocolError& e) {
    return protocol::error_response(id, "bad_request", e.what()).dump();
  } catch (const Error& e) {
    return protocol::error_response(id, to_string(e.code()), e.what()).dump();
  } catch (const std::exception& e) {
    return protocol::error_response(id, "internal", e.what()).dump();
  }
  return protocol::error_response(id, "internal", "unreachable").dump();
}

void serve_stdio(ProtocolServer& server, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out << server.handle(line) << '\n';
    out.flush();
  }
}

void serve_http(ProtocolServer& server, const std::string& host, int port) {
  httplib::Server http;
  std::mutex mu;  // backends are not required to be reentrant
  http.Post("/v1/call", [&](const httplib::Request& req, httplib::Response& res) {
    std::lock_guard<std::mutex> lock(mu);
    res.set_content(server.handle(req.body), "application/json");
  });
  if (!http.listen(host, port)) {
    throw BackendUnavailable(host + ":" + std::to_string(port), "cannot listen");
  }
}

}  // namespace byovla
