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

#include <iosfwd>
#include <string>

#include "byovla/backends/interfaces.hpp"

namespace byovla {

/// Stateless request handler: one JSON line in, one JSON line out. Never
/// throws; every failure becomes an error response.
class ProtocolServer {
 public:
  explicit ProtocolServer(BackendRefs backends) : backends_(backends) {}
  std::string handle(const std::string& line);

 private:
  BackendRefs backends_;
};

/// Answers lines from `in` until EOF.
void serve_stdio(ProtocolServer& server, std::istream& in, std::ostream& out);

/// Blocks serving POST /v1/call; requests are handled one at a time.
void serve_http(ProtocolServer& server, const std::string& host, int port);

}  // namespace byovla
