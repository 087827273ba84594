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

#include "byovla/backends/client.hpp"

namespace byovla {

using nlohmann::json;

void BackendEndpoint::validate() const {
  if (timeout_ms <= 0) throw Error(ErrorCode::kInvalidArgument, "endpoint timeout must be > 0");
  if (retries < 0) throw Error(ErrorCode::kInvalidArgument, "endpoint retries must be >= 0");
  if (kind == Kind::kSubprocess && command.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "subprocess endpoint needs a command");
  }
  if (kind == Kind::kHttp && url.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "http endpoint needs a url");
  }
}

std::unique_ptr<Transport> BackendEndpoint::make_transport() const {
  validate();
  if (kind == Kind::kSubprocess) return std::make_unique<SubprocessTransport>(command, timeout_ms);
  return std::make_unique<HttpTransport>(url, timeout_ms);
}

Client::Client(std::string name, std::unique_ptr<Transport> transport, int retries,
               IdCounter ids, std::shared_ptr<Transcript> transcript, int max_in_flight)
    : name_(std::move(name)),
      transport_(std::move(transport)),
      retries_(retries),
      ids_(ids ? std::move(ids) : std::make_shared<std::atomic<std::uint64_t>>(0)),
      transcript_(std::move(transcript)),
      max_in_flight_(std::max(1, max_in_flight)) {
  if (!transport_) throw Error(ErrorCode::kInvalidArgument, "client needs a transport");
}

namespace {

[[noreturn]] void raise_remote(const json& resp) {
  const std::string code = resp.at("code").is_string() ? resp.at("code").get<std::string>() : "";
  const std::string msg = resp.at("message").is_string() ? resp.at("message").get<std::string>() : "";
  for (int c = 0; c <= static_cast<int>(ErrorCode::kIoError); ++c) {
    const auto ec = static_cast<ErrorCode>(c);
    if (to_string(ec) != code) continue;
    if (ec == ErrorCode::kBackendUnavailable) throw BackendUnavailable("remote", "remote: " + msg);
    if (ec == ErrorCode::kProtocolError) throw ProtocolError("remote: " + msg, resp.dump());
    throw Error(ec, "remote: " + msg);
  }
  if (code == "upstream" || code == "internal") {
    throw BackendUnavailable("remote", "remote " + code + ": " + msg);
  }
  throw ProtocolError("remote rejected request (" + code + "): " + msg, resp.dump());
}

}  // namespace

json Client::call(protocol::Op op, json body) {
  {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
    ++in_flight_;
  }
  struct Release {
    Client* c;
    ~Release() {
      {
        std::lock_guard<std::mutex> lock(c->mu_);
        --c->in_flight_;
      }
      c->cv_.notify_one();
    }
  } release{this};

  const std::uint64_t id = ids_->fetch_add(1) + 1;
  const std::string request = protocol::envelope(id, op, std::move(body)).dump();
  std::string line;
  for (int attempt = 0;; ++attempt) {
    try {
      line = transport_->exchange(request);
      break;
    } catch (const BackendUnavailable& e) {
      if (attempt >= retries_) {
        throw BackendUnavailable(name_, name_ + ": " + e.what());
      }
    }
  }
  ++calls_;
  if (transcript_) transcript_->append({name_, request, line});

  json resp;
  try {
    resp = json::parse(line);
  } catch (const json::exception& e) {
    throw ProtocolError(name_ + ": response is not JSON: " + e.what(), line);
  }
  protocol::check_envelope(resp, id);
  if (protocol::is_error(resp)) raise_remote(resp);
  return resp;
}

std::vector<ActionChunk> RemotePolicy::predict(const PredictRequest& request) {
  const json resp = client_->call(protocol::Op::kPredict, protocol::predict_request(request));
  return protocol::parse_predict_response(resp, request.k, chunk_len_);
}

ProposalResponse RemoteVLM::propose(const Image& image, const std::string& instruction,
                                    const std::string& template_id) {
  const json resp = client_->call(protocol::Op::kPropose,
                                  protocol::propose_request({image, instruction, template_id}));
  return protocol::parse_propose_response(resp);
}

std::vector<SegmentMask> RemoteSeg::segment(const Image& image,
                                            const std::vector<std::string>& labels,
                                            double box_threshold, double text_threshold) {
  const json resp = client_->call(
      protocol::Op::kSegment,
      protocol::segment_request({image, labels, box_threshold, text_threshold}));
  return protocol::parse_segment_response(resp, labels, image.width(), image.height());
}

Image RemoteInpaint::inpaint(const Image& image, const RLESpec& mask, int dilation) {
  const json resp =
      client_->call(protocol::Op::kInpaint, protocol::inpaint_request({image, mask, dilation}));
  return protocol::parse_inpaint_response(resp, image.width(), image.height());
}

AttentionTensors RemoteAttn::attention(const Image& image, const std::string& instruction,
                                       int layer) {
  const json resp =
      client_->call(protocol::Op::kAttn, protocol::attn_request({image, instruction, layer}));
  return protocol::parse_attn_response(resp);
}

}  // namespace byovla
