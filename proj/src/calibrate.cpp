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

#include "byovla/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "byovla/image_io.hpp"
#include "byovla/mask.hpp"
#include "byovla/rng.hpp"
#include "byovla/sensitivity.hpp"

namespace byovla {

double quantile(std::span<const double> values, double q) {
  if (values.empty()) {
    throw Error(ErrorCode::kEmptyCalibrationSet, "quantile of an empty set");
  }
  if (!(q >= 0.0 && q <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "quantile level must be in [0, 1]");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

CalibrationReport calibrate_threshold(PolicyBackend& policy,
                                      const std::vector<CalibrationEnvironment>& dataset,
                                      const PipelineConfig& cfg, RegionKind kind,
                                      std::uint64_t seed) {
  return calibrate_threshold([&](const CalibrationEnvironment&) -> PolicyBackend& { return policy; },
                             dataset, cfg, kind, seed);
}

CalibrationReport calibrate_threshold(const PolicyResolver& policy_for,
                                      const std::vector<CalibrationEnvironment>& dataset,
                                      const PipelineConfig& cfg, RegionKind kind,
                                      std::uint64_t seed) {
  PipelineConfig probe_cfg = cfg;
  probe_cfg.weights = translational_weights();

  CalibrationReport report;
  report.kind = kind;
  for (const auto& env : dataset) {
    const std::uint64_t env_seed = derive_seed(seed, env.id);
    PolicyBackend* policy = nullptr;
    bool any = false;
    NominalSamples nominal;
    for (const auto& region : env.regions) {
      if (region.kind != kind) continue;
      if (!any) {
        policy = &policy_for(env);
        nominal = sample_nominal(*policy, env.image, env.context, probe_cfg, env_seed);
        any = true;
      }
      const auto outcome =
          probe_region(*policy, env.image, env.context, region, probe_cfg, env_seed, nominal);
      report.samples.push_back({env.id, region.label, outcome.delta});
    }
  }
  if (report.samples.empty()) {
    throw Error(ErrorCode::kEmptyCalibrationSet,
                "no " + std::string(to_string(kind)) + " regions in calibration set");
  }
  std::vector<double> deltas;
  deltas.reserve(report.samples.size());
  for (const auto& s : report.samples) deltas.push_back(s.delta);
  report.tau = quantile(deltas, report.q);
  return report;
}

nlohmann::json to_json(const CalibrationReport& report) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : report.samples) {
    samples.push_back({{"environment", s.environment}, {"region", s.region}, {"delta", s.delta}});
  }
  return {{"schema", "calibration/1"},
          {"kind", std::string(to_string(report.kind))},
          {"quantile", report.q},
          {"tau", report.tau},
          {"samples", std::move(samples)}};
}

std::vector<CalibrationEnvironment> load_calibration_dataset(
    const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) {
    throw Error(ErrorCode::kIoError, "dataset directory not found: " + root.string());
  }
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());

  std::vector<CalibrationEnvironment> out;
  for (const auto& dir : dirs) {
    CalibrationEnvironment env;
    env.id = dir.filename().string();
    env.dir = dir;
    env.image = read_png(dir / "obs.png");
    std::ifstream in(dir / "meta.json");
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(in);
      env.context.instruction = meta.at("instruction").get<std::string>();
      if (meta.contains("proprio")) env.context.proprio = meta.at("proprio").get<Proprio>();
      env.scene = meta.value("scene", std::string());
      for (const auto& r : meta.at("regions")) {
        RegionMask region{r.at("label").get<std::string>(),
                          region_kind_from_string(r.at("kind").get<std::string>()),
                          rle_decode(rle_from_json(r.at("rle"))), 1.0};
        validate_region(region, &env.image);
        env.regions.push_back(std::move(region));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument,
                  "bad meta.json in " + dir.string() + ": " + e.what());
    }
    out.push_back(std::move(env));
  }
  return out;
}

void save_calibration_environment(const std::filesystem::path& dir,
                                  const CalibrationEnvironment& env,
                                  const nlohmann::json& extra) {
  std::filesystem::create_directories(dir);
  write_png(dir / "obs.png", env.image);
  nlohmann::json meta = extra.is_object() ? extra : nlohmann::json::object();
  meta["instruction"] = env.context.instruction;
  if (!env.scene.empty()) meta["scene"] = env.scene;
  if (env.context.proprio) meta["proprio"] = *env.context.proprio;
  meta["regions"] = nlohmann::json::array();
  for (const auto& r : env.regions) {
    meta["regions"].push_back({{"label", r.label},
                               {"kind", std::string(to_string(r.kind))},
                               {"rle", to_json(rle_encode(r))}});
  }
  std::ofstream out(dir / "meta.json");
  out << meta.dump(2) << "\n";
}

}  // namespace byovla
