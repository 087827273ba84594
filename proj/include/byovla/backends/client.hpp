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

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "byovla/backends/interfaces.hpp"
#include "byovla/backends/protocol.hpp"
#include "byovla/backends/transport.hpp"

namespace byovla {

struct BackendEndpoint {
  enum class Kind { kSubprocess, kHttp };
  Kind kind = Kind::kSubprocess;
  std::vector<std::string> command;  // subprocess argv
  std::string url;                   // http base url
  int timeout_ms = 30000;
  int retries = 1;

  void validate() const;
  std::unique_ptr<Transport> make_transport() const;
};

using IdCounter = std::shared_ptr<std::atomic<std::uint64_t>>;

/// One protocol endpoint. Assigns ids from a (possibly shared) counter,
/// retries BackendUnavailable, records successful exchanges and validates the
/// envelope of every response. Error responses become typed errors.
class Client {
 public:
  Client(std::string name, std::unique_ptr<Transport> transport, int retries = 0,
         IdCounter ids = nullptr, std::shared_ptr<Transcript> transcript = nullptr,
         int max_in_flight = 1);

  /// Returns the validated response object for `op`.
  nlohmann::json call(protocol::Op op, nlohmann::json body);

  const std::string& name() const { return name_; }
  std::uint64_t calls() const { return calls_.load(); }

 private:
  std::string name_;
  std::unique_ptr<Transport> transport_;
  int retries_;
  IdCounter ids_;
  std::shared_ptr<Transcript> transcript_;
  int max_in_flight_;
  int in_flight_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
  std::atomic<std::uint64_t> calls_{0};
};

class RemotePolicy : public PolicyBackend {
 public:
  /// `chunk_len` < 0 accepts any consistent length.
  RemotePolicy(std::shared_ptr<Client> client, int chunk_len = -1)
      : client_(std::move(client)), chunk_len_(chunk_len) {}
  std::vector<ActionChunk> predict(const PredictRequest& request) override;

 private:
  std::shared_ptr<Client> client_;
  int chunk_len_;
};

class RemoteVLM : public VLMBackend {
 public:
  explicit RemoteVLM(std::shared_ptr<Client> client) : client_(std::move(client)) {}
  ProposalResponse propose(const Image& image, const std::string& instruction,
                           const std::string& template_id) override;

 private:
  std::shared_ptr<Client> client_;
};

class RemoteSeg : public SegBackend {
 public:
  explicit RemoteSeg(std::shared_ptr<Client> client) : client_(std::move(client)) {}
  std::vector<SegmentMask> segment(const Image& image, const std::vector<std::string>& labels,
                                   double box_threshold, double text_threshold) override;

 private:
  std::shared_ptr<Client> client_;
};

class RemoteInpaint : public InpaintBackend {
 public:
  explicit RemoteInpaint(std::shared_ptr<Client> client) : client_(std::move(client)) {}
  Image inpaint(const Image& image, const RLESpec& mask, int dilation) override;

 private:
  std::shared_ptr<Client> client_;
};

class RemoteAttn : public AttnBackend {
 public:
  explicit RemoteAttn(std::shared_ptr<Client> client) : client_(std::move(client)) {}
  AttentionTensors attention(const Image& image, const std::string& instruction,
                             int layer) override;

 private:
  std::shared_ptr<Client> client_;
};

}  // namespace byovla
