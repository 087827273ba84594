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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "byovla/backends/interfaces.hpp"
#include "byovla/config.hpp"
#include "byovla/intervene.hpp"
#include "byovla/regions.hpp"
#include "byovla/report.hpp"
#include "byovla/testbed.hpp"

namespace byovla {

enum class Method { kRaw, kByovla, kNoSens, kGradCam };

std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

/// Per-episode state carried between steps.
struct EpisodeCache {
  std::optional<ProposalResult> proposal;
  std::optional<SensitivityReport> report;
  std::map<std::string, Rgb> colors;  // background colours chosen so far
};

struct StepOutput {
  Image edited;
  SensitivityReport report;
  bool probed = false;
  std::vector<RegionMask> regions;
  std::vector<std::string> ungrounded;
  std::vector<InterventionRecord> interventions;
};

/// One pass of the intervention pipeline on `obs`: ground the cached
/// proposal, score the regions (probe, attribution or all-sensitive by
/// method; fresh or cached by schedule) and edit the sensitive ones.
/// Requires cache.proposal unless the method is Raw.
StepOutput byovla_step(const BackendRefs& backends, const Image& obs, const TaskContext& ctx,
                       EpisodeCache& cache, const PipelineConfig& cfg, Method method, int t,
                       std::uint64_t seed);

struct CallCounts {
  std::uint64_t policy_calls = 0;
  std::uint64_t policy_samples = 0;
  std::uint64_t vlm_calls = 0;
  std::uint64_t seg_calls = 0;
  std::uint64_t inpaint_calls = 0;
  std::uint64_t attn_calls = 0;
};

struct EpisodeStep {
  int index = 0;  // contiguous from 0
  int t = 0;      // control tick the chunk was requested at
  Proprio proprio{};
  Image raw;
  Image edited;
  std::vector<RegionMask> regions;
  std::optional<SensitivityReport> report;
  bool probed = false;
  ActionChunk chunk;
  std::vector<InterventionRecord> interventions;
};

struct EpisodeLog {
  int episode = 0;
  Method method = Method::kRaw;
  std::uint64_t seed = 0;
  std::string instruction;
  std::string scene;
  std::string config_hash;
  std::optional<ProposalResult> proposal;
  std::vector<EpisodeStep> steps;
  std::vector<testbed::TrajectoryPoint> trajectory;
  bool success = false;
  std::string failure_mode;
  std::string aborted;  // non-empty when a backend error ended the episode
  CallCounts calls;
};

/// Runs one testbed episode. A chunk is requested every T_a + 1 ticks on the
/// (edited) observation and executed open loop, one action per tick.
EpisodeLog run_episode(const BackendRefs& backends, const testbed::SceneSpec& scene,
                       const PipelineConfig& cfg, Method method, std::uint64_t seed,
                       int episode = 0, const PromptTemplate& tmpl = default_prompt_template());

/// Seed of episode `n` in a run seeded with `run_seed`; shared by all methods.
std::uint64_t episode_seed(std::uint64_t run_seed, int n);

/// Frame paths inside the episode directory.
std::string raw_frame_name(int index);
std::string edited_frame_name(int index);

nlohmann::json to_json(const EpisodeLog& log);
/// Writes log.json and frames/ into `dir`.
void write_episode(const std::filesystem::path& dir, const EpisodeLog& log);

struct EpisodeSummary {
  std::string method;
  std::uint64_t seed = 0;
  bool success = false;
  std::string failure_mode;
};

EpisodeSummary read_episode_summary(const std::filesystem::path& log_json);

struct MethodSummary {
  std::string method;
  int successes = 0;
  int trials = 0;
  std::map<std::string, int> failure_modes;
  double rate() const { return trials == 0 ? 0.0 : static_cast<double>(successes) / trials; }
};

/// Groups by method, in method-name order.
std::vector<MethodSummary> summarize(const std::vector<EpisodeSummary>& episodes);
/// Every log.json below `root`, visited in path order.
std::vector<EpisodeSummary> collect_episodes(const std::filesystem::path& root);

inline constexpr const char* kSummarySchema = "summary/1";
std::string summary_csv(const std::vector<MethodSummary>& rows);
nlohmann::json summary_json(const std::vector<MethodSummary>& rows);

}  // namespace byovla
