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

#include "byovla/config.hpp"

#include <cstdio>
#include <fstream>

#include "byovla/rng.hpp"

namespace byovla {

void PipelineConfig::validate() const {
  auto fail = [](const std::string& m) {
    throw Error(ErrorCode::kInvalidArgument, "config: " + m);
  };
  if (samples < 1) fail("K must be positive");
  if (horizon < 0) fail("T_a must be nonnegative");
  validate_weights(weights);
  if (!(tau_object >= 0.0) || !(tau_background >= 0.0)) fail("thresholds must be >= 0");
  if (blur_kernel < 3 || blur_kernel % 2 == 0) {
    throw Error(ErrorCode::kInvalidKernel, "blur_kernel must be odd and >= 3");
  }
  if (!(noise_sigma > 0.0)) fail("noise_sigma must be positive");
  if (dilation_radius < 0) fail("dilation_radius must be >= 0");
  if (recolor_max_attempts < 1) fail("recolor_max_attempts must be positive");
  if (max_in_flight < 1) fail("max_in_flight must be positive");
  if (!(box_threshold > 0.0 && box_threshold < 1.0)) fail("box_threshold must be in (0,1)");
  if (!(text_threshold > 0.0 && text_threshold < 1.0)) fail("text_threshold must be in (0,1)");
  if (!(gradcam_fraction > 0.0 && gradcam_fraction < 1.0)) fail("gradcam_fraction must be in (0,1)");
  if (gradcam_smooth_kernel < 1 || gradcam_smooth_kernel % 2 == 0) fail("gradcam_smooth_kernel must be odd");
  for (double g : warm_gains) {
    if (!(g > 0.0)) fail("warm gains must be positive");
  }
}

namespace {

const char* to_cstr(ProbeSchedule s) {
  return s == ProbeSchedule::kInitOnly ? "init_only" : "every_chunk";
}
const char* to_cstr(SampleMode m) {
  return m == SampleMode::kKActions ? "k_actions" : "k_observations";
}

}  // namespace

nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["K"] = c.samples;
  j["T_a"] = c.horizon;
  j["w"] = std::vector<double>(c.weights.data(), c.weights.data() + kActionDim);
  j["tau_object"] = c.tau_object;
  j["tau_background"] = c.tau_background;
  j["blur_kernel"] = c.blur_kernel;
  j["noise_sigma"] = c.noise_sigma;
  j["dilation_radius"] = c.dilation_radius;
  j["probe_schedule"] = to_cstr(c.probe_schedule);
  j["sample_mode"] = to_cstr(c.sample_mode);
  j["recolor_max_attempts"] = c.recolor_max_attempts;
  j["rng_seed"] = c.rng_seed;
  j["normalized_deviation"] = c.normalized_deviation;
  j["max_in_flight"] = c.max_in_flight;
  j["box_threshold"] = c.box_threshold;
  j["text_threshold"] = c.text_threshold;
  j["gradcam_fraction"] = c.gradcam_fraction;
  j["gradcam_smooth_kernel"] = c.gradcam_smooth_kernel;
  j["gradcam_overlap"] = c.gradcam_overlap;
  j["gradcam_layer"] = c.gradcam_layer;
  j["gripper_threshold"] = c.gripper_threshold;
  j["warm_filter"] = c.warm_filter;
  j["warm_gains"] = c.warm_gains;
  return j;
}

PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    c.samples = j.value("K", c.samples);
    c.horizon = j.value("T_a", c.horizon);
    if (j.contains("w")) {
      const auto w = j.at("w").get<std::vector<double>>();
      if (w.size() != kActionDim) {
        throw Error(ErrorCode::kInvalidArgument, "config: w must have 7 entries");
      }
      for (int i = 0; i < kActionDim; ++i) c.weights[i] = w[i];
    }
    c.tau_object = j.value("tau_object", c.tau_object);
    c.tau_background = j.value("tau_background", c.tau_background);
    c.blur_kernel = j.value("blur_kernel", c.blur_kernel);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.dilation_radius = j.value("dilation_radius", c.dilation_radius);
    if (j.contains("probe_schedule")) {
      const auto s = j.at("probe_schedule").get<std::string>();
      if (s == "init_only") c.probe_schedule = ProbeSchedule::kInitOnly;
      else if (s == "every_chunk") c.probe_schedule = ProbeSchedule::kEveryChunk;
      else throw Error(ErrorCode::kInvalidArgument, "config: bad probe_schedule " + s);
    }
    if (j.contains("sample_mode")) {
      const auto s = j.at("sample_mode").get<std::string>();
      if (s == "k_actions") c.sample_mode = SampleMode::kKActions;
      else if (s == "k_observations") c.sample_mode = SampleMode::kKObservations;
      else throw Error(ErrorCode::kInvalidArgument, "config: bad sample_mode " + s);
    }
    c.recolor_max_attempts = j.value("recolor_max_attempts", c.recolor_max_attempts);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    c.normalized_deviation = j.value("normalized_deviation", c.normalized_deviation);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    c.box_threshold = j.value("box_threshold", c.box_threshold);
    c.text_threshold = j.value("text_threshold", c.text_threshold);
    c.gradcam_fraction = j.value("gradcam_fraction", c.gradcam_fraction);
    c.gradcam_smooth_kernel = j.value("gradcam_smooth_kernel", c.gradcam_smooth_kernel);
    c.gradcam_overlap = j.value("gradcam_overlap", c.gradcam_overlap);
    c.gradcam_layer = j.value("gradcam_layer", c.gradcam_layer);
    c.gripper_threshold = j.value("gripper_threshold", c.gripper_threshold);
    c.warm_filter = j.value("warm_filter", c.warm_filter);
    c.warm_gains = j.value("warm_gains", c.warm_gains);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read config " + path.string());
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("config: ") + e.what());
  }
}

std::string config_hash(const PipelineConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(to_json(cfg).dump())));
  return buf;
}

PipelineConfig with_threshold_scale(PipelineConfig cfg, double factor) {
  if (!(factor > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "threshold scale must be positive");
  }
  cfg.tau_object *= factor;
  cfg.tau_background *= factor;
  return cfg;
}

}  // namespace byovla
