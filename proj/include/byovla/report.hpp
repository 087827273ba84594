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

#include <optional>
#include <string>
#include <vector>

#include "byovla/core.hpp"

namespace byovla {

inline constexpr const char* kReportSchema = "probe/1";

struct SensitivityEntry {
  std::string label;
  RegionKind kind = RegionKind::kObject;
  double score = 0.0;
  double threshold = 0.0;
  bool sensitive = false;
  std::string perturbation;  // e.g. "blur:25", "noise:0.273861", "none"

  friend bool operator==(const SensitivityEntry&,
                         const SensitivityEntry&) = default;
};

struct SensitivityReport {
  std::vector<SensitivityEntry> entries;
  int probed_at = 0;

  const SensitivityEntry* find(const std::string& label) const;
  std::size_t sensitive_count() const;

  friend bool operator==(const SensitivityReport&,
                         const SensitivityReport&) = default;
};

/// Builds an entry with `sensitive` derived from score >= threshold.
SensitivityEntry make_entry(std::string label, RegionKind kind, double score,
                            double threshold, std::string perturbation);

nlohmann::json to_json(const SensitivityReport& report);
/// Rejects unknown schema versions and entries whose flag disagrees with
/// score >= threshold.
SensitivityReport report_from_json(const nlohmann::json& j);

}  // namespace byovla
