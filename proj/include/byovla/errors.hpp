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

#include <stdexcept>
#include <string>
#include <string_view>

namespace byovla {

enum class ErrorCode {
  kInvalidArgument,
  kMalformedRLE,
  kInvalidKernel,
  kChunkShapeError,
  kDegenerateHorizon,
  kBackendUnavailable,
  kProposalParseError,
  kRecolorExhausted,
  kEmptyCalibrationSet,
  kShapeError,
  kFlatAttribution,
  kProtocolError,
  kFixtureMissing,
  kSceneError,
  kIoError,
};

std::string_view to_string(ErrorCode code);

/// Base of every error the engine raises. The code is stable and is what the
/// CLI and the wire protocol report.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class BackendUnavailable : public Error {
 public:
  BackendUnavailable(std::string context, const std::string& message)
      : Error(ErrorCode::kBackendUnavailable, message),
        context_(std::move(context)) {}

  /// Region label or backend name the failure is attributed to.
  const std::string& context() const noexcept { return context_; }

 private:
  std::string context_;
};

class ProtocolError : public Error {
 public:
  ProtocolError(const std::string& message, std::string payload)
      : Error(ErrorCode::kProtocolError, message),
        payload_(std::move(payload)) {}

  const std::string& payload() const noexcept { return payload_; }

 private:
  std::string payload_;
};

class ProposalParseError : public Error {
 public:
  ProposalParseError(const std::string& message, std::string raw)
      : Error(ErrorCode::kProposalParseError, message), raw_(std::move(raw)) {}

  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

}  // namespace byovla
