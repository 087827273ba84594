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

#include "byovla/backends/transport.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>

#include "httplib.h"
#include "json.hpp"

#include "byovla/errors.hpp"

namespace byovla {

// ------------------------------------------------------------ subprocess

SubprocessTransport::SubprocessTransport(std::vector<std::string> argv, int timeout_ms)
    : argv_(std::move(argv)), timeout_ms_(timeout_ms) {
  if (argv_.empty()) throw Error(ErrorCode::kInvalidArgument, "subprocess command is empty");
  if (timeout_ms_ <= 0) throw Error(ErrorCode::kInvalidArgument, "timeout must be > 0");
  // A dead child must surface as an error, not a signal.
  ::signal(SIGPIPE, SIG_IGN);
}

SubprocessTransport::~SubprocessTransport() { kill_child(); }

std::string SubprocessTransport::describe() const {
  std::string s;
  for (const auto& a : argv_) s += (s.empty() ? "" : " ") + a;
  return s;
}

void SubprocessTransport::spawn() {
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) throw BackendUnavailable(describe(), "pipe failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw BackendUnavailable(describe(), "pipe failed");
  }
  std::vector<char*> args;
  for (auto& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw BackendUnavailable(describe(), "fork failed");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
  ::fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  buffer_.clear();
}

void SubprocessTransport::kill_child() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
  buffer_.clear();
}

std::string SubprocessTransport::exchange(const std::string& request) {
  std::lock_guard<std::mutex> lock(mu_);
  if (pid_ < 0) spawn();

  const std::string line = request + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(to_child_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      kill_child();
      throw BackendUnavailable(describe(), "write to backend failed: " + std::string(std::strerror(errno)));
    }
    written += static_cast<std::size_t>(n);
  }

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
  char chunk[65536];
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string out = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return out;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                          deadline - std::chrono::steady_clock::now())
                          .count();
    if (left <= 0) {
      kill_child();
      throw BackendUnavailable(describe(), "backend timed out after " + std::to_string(timeout_ms_) + " ms");
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int r = ::poll(&pfd, 1, static_cast<int>(left));
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) continue;  // re-check the deadline
    const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      kill_child();
      throw BackendUnavailable(describe(), "backend closed its output");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

// ------------------------------------------------------------------ http

HttpTransport::HttpTransport(std::string url, int timeout_ms)
    : url_(std::move(url)), timeout_ms_(timeout_ms) {
  if (timeout_ms_ <= 0) throw Error(ErrorCode::kInvalidArgument, "timeout must be > 0");
  while (!url_.empty() && url_.back() == '/') url_.pop_back();
}

std::string HttpTransport::exchange(const std::string& request) {
  httplib::Client cli(url_);
  const auto sec = timeout_ms_ / 1000;
  const auto usec = (timeout_ms_ % 1000) * 1000;
  cli.set_connection_timeout(sec, usec);
  cli.set_read_timeout(sec, usec);
  cli.set_write_timeout(sec, usec);
  auto res = cli.Post("/v1/call", request, "application/json");
  if (!res) {
    throw BackendUnavailable(url_, "HTTP request failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw BackendUnavailable(url_, "HTTP status " + std::to_string(res->status));
  }
  std::string body = res->body;
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
  return body;
}

// ------------------------------------------------------------ transcript

void Transcript::append(TranscriptEntry entry) {
  std::lock_guard<std::mutex> lock(mu_);
  entries_.push_back(std::move(entry));
}

std::vector<TranscriptEntry> Transcript::entries() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_;
}

std::vector<TranscriptEntry> Transcript::entries_for(const std::string& endpoint) const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<TranscriptEntry> out;
  for (const auto& e : entries_)
    if (e.endpoint == endpoint) out.push_back(e);
  return out;
}

std::size_t Transcript::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.size();
}

void Transcript::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write transcript " + path.string());
  for (const auto& e : entries()) {
    out << nlohmann::json{{"endpoint", e.endpoint}, {"request", e.request}, {"response", e.response}}
               .dump()
        << "\n";
  }
}

Transcript Transcript::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read transcript " + path.string());
  Transcript t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      t.append({j.at("endpoint").get<std::string>(), j.at("request").get<std::string>(),
                j.at("response").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(std::string("bad transcript line: ") + e.what(), line);
    }
  }
  return t;
}

// ---------------------------------------------------------------- replay

ReplayTransport::ReplayTransport(std::vector<TranscriptEntry> entries)
    : entries_(std::move(entries)) {}

std::string ReplayTransport::exchange(const std::string& request) {
  std::lock_guard<std::mutex> lock(mu_);
  if (cursor_ >= entries_.size()) {
    throw ProtocolError("transcript exhausted after " + std::to_string(entries_.size()) + " exchanges",
                        request);
  }
  const TranscriptEntry& e = entries_[cursor_];
  if (e.request != request) {
    throw ProtocolError("request diverges from transcript at exchange " + std::to_string(cursor_),
                        request);
  }
  ++cursor_;
  return e.response;
}

std::size_t ReplayTransport::remaining() const {
  std::lock_guard<std::mutex> lock(mu_);
  return entries_.size() - cursor_;
}

}  // namespace byovla
