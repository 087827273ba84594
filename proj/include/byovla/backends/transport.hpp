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

#include <sys/types.h>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace byovla {

/// Moves one request line to a server and returns its response line. Throws
/// BackendUnavailable on timeouts and I/O failures.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string exchange(const std::string& request) = 0;
  virtual std::string describe() const = 0;
};

/// Calls an in-process handler; used to put stubs behind the protocol.
class LoopbackTransport : public Transport {
 public:
  using Handler = std::function<std::string(const std::string&)>;
  explicit LoopbackTransport(Handler handler) : handler_(std::move(handler)) {}
  std::string exchange(const std::string& request) override { return handler_(request); }
  std::string describe() const override { return "loopback"; }

 private:
  Handler handler_;
};

/// Spawns `argv` and speaks JSON lines over its stdin/stdout. A timed-out or
/// dead child is killed and respawned on the next exchange.
class SubprocessTransport : public Transport {
 public:
  SubprocessTransport(std::vector<std::string> argv, int timeout_ms);
  ~SubprocessTransport() override;
  SubprocessTransport(const SubprocessTransport&) = delete;
  SubprocessTransport& operator=(const SubprocessTransport&) = delete;

  std::string exchange(const std::string& request) override;
  std::string describe() const override;

 private:
  void spawn();
  void kill_child();

  std::vector<std::string> argv_;
  int timeout_ms_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
  std::mutex mu_;
};

/// POSTs each request to `<url>/v1/call`.
class HttpTransport : public Transport {
 public:
  HttpTransport(std::string url, int timeout_ms);
  std::string exchange(const std::string& request) override;
  std::string describe() const override { return url_; }

 private:
  std::string url_;
  int timeout_ms_;
};

struct TranscriptEntry {
  std::string endpoint;
  std::string request;
  std::string response;
};

/// Append-only record of protocol traffic, saved as JSON lines
/// {"endpoint","request","response"} with the exact line bytes.
class Transcript {
 public:
  Transcript() = default;
  Transcript(Transcript&& other) noexcept : entries_(other.take()) {}
  Transcript& operator=(Transcript&& other) noexcept {
    auto moved = other.take();
    std::lock_guard<std::mutex> lock(mu_);
    entries_ = std::move(moved);
    return *this;
  }

  void append(TranscriptEntry entry);
  std::vector<TranscriptEntry> entries() const;
  std::vector<TranscriptEntry> entries_for(const std::string& endpoint) const;
  std::size_t size() const;

  void save(const std::filesystem::path& path) const;
  static Transcript load(const std::filesystem::path& path);

 private:
  std::vector<TranscriptEntry> take() {
    std::lock_guard<std::mutex> lock(mu_);
    return std::move(entries_);
  }

  mutable std::mutex mu_;
  std::vector<TranscriptEntry> entries_;
};

/// Serves recorded responses in order. The request bytes must match the
/// recording exactly; any divergence is a ProtocolError.
class ReplayTransport : public Transport {
 public:
  explicit ReplayTransport(std::vector<TranscriptEntry> entries);
  std::string exchange(const std::string& request) override;
  std::string describe() const override { return "replay"; }
  std::size_t remaining() const;

 private:
  std::vector<TranscriptEntry> entries_;
  std::size_t cursor_ = 0;
  mutable std::mutex mu_;
};

}  // namespace byovla
