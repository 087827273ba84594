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

#include "byovla/report.hpp"

#include <algorithm>

namespace byovla {

const SensitivityEntry* SensitivityReport::find(const std::string& label) const {
  auto it = std::find_if(entries.begin(), entries.end(),
                         [&](const SensitivityEntry& e) { return e.label == label; });
  return it == entries.end() ? nullptr : &*it;
}

std::size_t SensitivityReport::sensitive_count() const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [](const auto& e) { return e.sensitive; }));
}

SensitivityEntry make_entry(std::string label, RegionKind kind, double score,
                            double threshold, std::string perturbation) {
  return {std::move(label), kind, score, threshold, score >= threshold,
          std::move(perturbation)};
}

nlohmann::json to_json(const SensitivityReport& report) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"label", e.label},
                       {"kind", std::string(to_string(e.kind))},
                       {"score", e.score},
                       {"threshold", e.threshold},
                       {"sensitive", e.sensitive},
                       {"perturbation", e.perturbation}});
  }
  return {{"schema", kReportSchema}, {"probed_at", report.probed_at},
          {"entries", std::move(entries)}};
}

SensitivityReport report_from_json(const nlohmann::json& j) {
  SensitivityReport report;
  try {
    if (j.at("schema").get<std::string>() != kReportSchema) {
      throw Error(ErrorCode::kInvalidArgument, "unsupported report schema");
    }
    report.probed_at = j.at("probed_at").get<int>();
    for (const auto& e : j.at("entries")) {
      SensitivityEntry entry{e.at("label").get<std::string>(),
                             region_kind_from_string(e.at("kind").get<std::string>()),
                             e.at("score").get<double>(),
                             e.at("threshold").get<double>(),
                             e.at("sensitive").get<bool>(),
                             e.at("perturbation").get<std::string>()};
      if (entry.sensitive != (entry.score >= entry.threshold)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "report entry '" + entry.label + "' flag disagrees with score");
      }
      report.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("report: ") + e.what());
  }
  return report;
}

}  // namespace byovla
