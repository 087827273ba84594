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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "byovla/backends/interfaces.hpp"
#include "byovla/config.hpp"
#include "byovla/core.hpp"

namespace byovla {

/// Linear-interpolation quantile at rank (n - 1) * q of the sorted values
/// (Hyndman-Fan type 7). Throws kEmptyCalibrationSet on empty input.
double quantile(std::span<const double> values, double q);

struct CalibrationEnvironment {
  std::string id;
  Image image;
  TaskContext context;
  std::vector<RegionMask> regions;
  /// Optional scene reference from meta.json, resolved against `dir`.
  std::string scene;
  std::filesystem::path dir;
};

struct CalibrationSample {
  std::string environment;
  std::string region;
  double delta = 0.0;
};

struct CalibrationReport {
  RegionKind kind = RegionKind::kObject;
  double q = 0.75;
  double tau = 0.0;
  std::vector<CalibrationSample> samples;
};

/// Probes every region of `kind` in every environment with the translational
/// indicator weights and returns the third quartile of the deltas. Seeds are
/// keyed by environment id and region label, so dataset order is irrelevant.
CalibrationReport calibrate_threshold(PolicyBackend& policy,
                                      const std::vector<CalibrationEnvironment>& dataset,
                                      const PipelineConfig& cfg, RegionKind kind,
                                      std::uint64_t seed);

/// Picks the policy for each environment.
using PolicyResolver = std::function<PolicyBackend&(const CalibrationEnvironment&)>;

CalibrationReport calibrate_threshold(const PolicyResolver& policy_for,
                                      const std::vector<CalibrationEnvironment>& dataset,
                                      const PipelineConfig& cfg, RegionKind kind,
                                      std::uint64_t seed);

nlohmann::json to_json(const CalibrationReport& report);

/// Reads a dataset directory: one subdirectory per environment holding
/// obs.png and meta.json {instruction, regions: [{label, kind, rle}]}.
/// Subdirectories are visited in name order.
std::vector<CalibrationEnvironment> load_calibration_dataset(
    const std::filesystem::path& root);

void save_calibration_environment(const std::filesystem::path& dir,
                                  const CalibrationEnvironment& env,
                                  const nlohmann::json& extra = {});

}  // namespace byovla
