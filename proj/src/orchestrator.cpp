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

#include "byovla/orchestrator.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "byovla/attribution.hpp"
#include "byovla/image_io.hpp"
#include "byovla/mask.hpp"
#include "byovla/perturb.hpp"
#include "byovla/rng.hpp"
#include "byovla/sensitivity.hpp"

namespace byovla {

using nlohmann::json;

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kRaw: return "raw";
    case Method::kByovla: return "byovla";
    case Method::kNoSens: return "nosens";
    case Method::kGradCam: return "gradcam";
  }
  return "unknown";
}

Method method_from_string(std::string_view s) {
  if (s == "raw") return Method::kRaw;
  if (s == "byovla") return Method::kByovla;
  if (s == "nosens") return Method::kNoSens;
  if (s == "gradcam") return Method::kGradCam;
  throw Error(ErrorCode::kInvalidArgument, "unknown method '" + std::string(s) + "'");
}

StepOutput byovla_step(const BackendRefs& b, const Image& obs, const TaskContext& ctx,
                       EpisodeCache& cache, const PipelineConfig& cfg, Method method, int t,
                       std::uint64_t seed) {
  StepOutput out{obs, {}, false, {}, {}, {}};
  out.report.probed_at = t;
  if (method == Method::kRaw) return out;
  if (!cache.proposal) {
    throw Error(ErrorCode::kInvalidArgument, "byovla_step needs the episode's region proposal");
  }
  if (cache.proposal->proposal.empty()) return out;
  if (b.seg == nullptr || b.policy == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "byovla_step needs policy and segmenter backends");
  }

  GroundingResult grounded = ground_regions(*b.seg, obs, cache.proposal->proposal,
                                            cfg.box_threshold, cfg.text_threshold);
  out.regions = std::move(grounded.masks);
  out.ungrounded = std::move(grounded.ungrounded);

  const bool fresh = cfg.probe_schedule == ProbeSchedule::kEveryChunk || !cache.report;
  InterventionOptions options;
  switch (method) {
    case Method::kByovla:
      if (fresh) {
        cache.report = probe_all(*b.policy, obs, ctx, out.regions, cfg,
                                 derive_seed(derive_seed(seed, "probe"), {static_cast<std::uint64_t>(t)}), t);
      }
      break;
    case Method::kGradCam:
      if (fresh) {
        if (b.attn == nullptr) {
          throw Error(ErrorCode::kInvalidArgument,
                      "GradCAM method unavailable: the backends provide no attention tensors");
        }
        const AttentionTensors tensors = b.attn->attention(obs, ctx.instruction, cfg.gradcam_layer);
        cache.report = gradcam_sensitive_regions(tensors, out.regions, cfg.gradcam_overlap,
                                                 cfg.gradcam_fraction, cfg.gradcam_smooth_kernel);
        cache.report->probed_at = t;
      }
      break;
    case Method::kNoSens: {
      // Every grounded region is treated as sensitive; nothing is probed.
      SensitivityReport all;
      all.probed_at = t;
      for (const auto& r : out.regions) all.entries.push_back(make_entry(r.label, r.kind, 0.0, 0.0, "none"));
      cache.report = std::move(all);
      options.verify_recolor = false;
      break;
    }
    case Method::kRaw:
      break;
  }
  out.probed = fresh && method != Method::kNoSens;
  out.report = *cache.report;

  // Background colours are chosen once per probe; later steps reuse them.
  if (!fresh) options.reuse_colors = &cache.colors;
  InterventionResult edited =
      apply_interventions(*b.policy, obs, out.report, out.regions, ctx, cfg,
                          derive_seed(seed, "intervene"), b.inpaint, options);
  for (const auto& rec : edited.records) {
    if (rec.color) cache.colors[rec.region] = *rec.color;
  }
  out.edited = std::move(edited.image);
  out.interventions = std::move(edited.records);
  return out;
}

namespace {

class CountingPolicy : public PolicyBackend {
 public:
  CountingPolicy(PolicyBackend* inner, CallCounts& c) : inner_(inner), c_(c) {}
  std::vector<ActionChunk> predict(const PredictRequest& r) override {
    ++c_.policy_calls;
    c_.policy_samples += static_cast<std::uint64_t>(r.k);
    return inner_->predict(r);
  }

 private:
  PolicyBackend* inner_;
  CallCounts& c_;
};

class CountingVLM : public VLMBackend {
 public:
  CountingVLM(VLMBackend* inner, CallCounts& c) : inner_(inner), c_(c) {}
  ProposalResponse propose(const Image& i, const std::string& s, const std::string& id) override {
    ++c_.vlm_calls;
    return inner_->propose(i, s, id);
  }

 private:
  VLMBackend* inner_;
  CallCounts& c_;
};

class CountingSeg : public SegBackend {
 public:
  CountingSeg(SegBackend* inner, CallCounts& c) : inner_(inner), c_(c) {}
  std::vector<SegmentMask> segment(const Image& i, const std::vector<std::string>& l, double b,
                                   double t) override {
    ++c_.seg_calls;
    return inner_->segment(i, l, b, t);
  }

 private:
  SegBackend* inner_;
  CallCounts& c_;
};

class CountingInpaint : public InpaintBackend {
 public:
  CountingInpaint(InpaintBackend* inner, CallCounts& c) : inner_(inner), c_(c) {}
  Image inpaint(const Image& i, const RLESpec& m, int d) override {
    ++c_.inpaint_calls;
    return inner_->inpaint(i, m, d);
  }

 private:
  InpaintBackend* inner_;
  CallCounts& c_;
};

class CountingAttn : public AttnBackend {
 public:
  CountingAttn(AttnBackend* inner, CallCounts& c) : inner_(inner), c_(c) {}
  AttentionTensors attention(const Image& i, const std::string& s, int layer) override {
    ++c_.attn_calls;
    return inner_->attention(i, s, layer);
  }

 private:
  AttnBackend* inner_;
  CallCounts& c_;
};

}  // namespace

std::uint64_t episode_seed(std::uint64_t run_seed, int n) {
  return derive_seed(derive_seed(run_seed, "episode"), {static_cast<std::uint64_t>(n)});
}

EpisodeLog run_episode(const BackendRefs& backends, const testbed::SceneSpec& scene,
                       const PipelineConfig& cfg, Method method, std::uint64_t seed, int episode,
                       const PromptTemplate& tmpl) {
  cfg.validate();
  if (backends.policy == nullptr) throw Error(ErrorCode::kInvalidArgument, "no policy backend");
  if (method != Method::kRaw && (backends.vlm == nullptr || backends.seg == nullptr)) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(to_string(method)) + " needs VLM and segmenter backends");
  }
  if (method == Method::kGradCam && backends.attn == nullptr) {
    throw Error(ErrorCode::kInvalidArgument,
                "GradCAM method unavailable: the backends provide no attention tensors");
  }

  EpisodeLog log;
  log.episode = episode;
  log.method = method;
  log.seed = seed;
  log.instruction = scene.instruction;
  log.scene = scene.name;
  log.config_hash = config_hash(cfg);

  CountingPolicy policy(backends.policy, log.calls);
  std::optional<CountingVLM> vlm;
  std::optional<CountingSeg> seg;
  std::optional<CountingInpaint> inpaint;
  std::optional<CountingAttn> attn;
  BackendRefs counted{&policy, nullptr, nullptr, nullptr, nullptr};
  if (backends.vlm) counted.vlm = &vlm.emplace(backends.vlm, log.calls);
  if (backends.seg) counted.seg = &seg.emplace(backends.seg, log.calls);
  if (backends.inpaint) counted.inpaint = &inpaint.emplace(backends.inpaint, log.calls);
  if (backends.attn) counted.attn = &attn.emplace(backends.attn, log.calls);

  testbed::Environment env(scene, seed, cfg.gripper_threshold);
  EpisodeCache cache;
  const std::uint64_t act_seed = derive_seed(seed, "act");
  try {
    while (!env.done()) {
      EpisodeStep step;
      step.index = static_cast<int>(log.steps.size());
      step.t = env.t();
      step.proprio = env.proprio();
      const Image rendered = env.observe().image;
      step.raw = cfg.warm_filter ? warm_filter(rendered, cfg.warm_gains) : rendered;
      const TaskContext ctx{scene.instruction, step.proprio};

      if (method == Method::kRaw) {
        step.edited = step.raw;
      } else {
        if (!cache.proposal) cache.proposal = propose_regions(*counted.vlm, step.raw, scene.instruction, tmpl);
        StepOutput out = byovla_step(counted, step.raw, ctx, cache, cfg, method, step.t, seed);
        step.edited = std::move(out.edited);
        step.regions = std::move(out.regions);
        step.report = std::move(out.report);
        step.probed = out.probed;
        step.interventions = std::move(out.interventions);
      }

      PredictRequest req{step.edited, ctx, 1, derive_seed(act_seed, {static_cast<std::uint64_t>(step.t)})};
      auto chunks = policy.predict(req);
      if (chunks.size() != 1 || chunks.front().rows() != cfg.chunk_length()) {
        throw Error(ErrorCode::kChunkShapeError, "policy returned a malformed action chunk");
      }
      validate_chunk(chunks.front());
      step.chunk = std::move(chunks.front());
      for (Eigen::Index i = 0; i < step.chunk.rows() && !env.done(); ++i) {
        env.step(step.chunk.row(i).transpose());
      }
      log.steps.push_back(std::move(step));
    }
  } catch (const Error& e) {
    log.aborted = std::string(to_string(e.code())) + ": " + e.what();
  }
  log.proposal = cache.proposal;
  log.trajectory = env.trajectory();
  const testbed::Outcome outcome = testbed::evaluate_success(log.trajectory, scene);
  log.success = outcome.success && log.aborted.empty();
  log.failure_mode = log.aborted.empty() ? outcome.failure_mode : "aborted";
  return log;
}

std::string raw_frame_name(int index) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "frames/%04d_raw.png", index);
  return buf;
}

std::string edited_frame_name(int index) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "frames/%04d_edited.png", index);
  return buf;
}

json to_json(const EpisodeLog& log) {
  json steps = json::array();
  for (const auto& s : log.steps) {
    json regions = json::array();
    for (const auto& r : s.regions) {
      regions.push_back({{"label", r.label},
                         {"kind", std::string(to_string(r.kind))},
                         {"score", r.score},
                         {"rle", to_json(rle_encode(r.bitmap))}});
    }
    json interventions = json::array();
    for (const auto& rec : s.interventions) {
      json j = to_json(rec);
      j["footprint"] = to_json(rle_encode(rec.footprint));
      interventions.push_back(std::move(j));
    }
    json chunk = json::array();
    for (Eigen::Index t = 0; t < s.chunk.rows(); ++t) {
      json row = json::array();
      for (int i = 0; i < kActionDim; ++i) row.push_back(s.chunk(t, i));
      chunk.push_back(std::move(row));
    }
    steps.push_back({{"index", s.index},
                     {"t", s.t},
                     {"proprio", s.proprio},
                     {"raw_frame", raw_frame_name(s.index)},
                     {"edited_frame", edited_frame_name(s.index)},
                     {"regions", std::move(regions)},
                     {"report", s.report ? to_json(*s.report) : json(nullptr)},
                     {"probed", s.probed},
                     {"chunk", std::move(chunk)},
                     {"interventions", std::move(interventions)}});
  }
  json trajectory = json::array();
  for (const auto& p : log.trajectory) trajectory.push_back(testbed::to_json(p));
  json proposal = nullptr;
  if (log.proposal) {
    proposal = to_json(log.proposal->proposal);
    proposal["raw"] = log.proposal->raw;
  }
  return {{"schema", "episode/1"},
          {"episode", log.episode},
          {"method", std::string(to_string(log.method))},
          {"seed", log.seed},
          {"instruction", log.instruction},
          {"scene", log.scene},
          {"config_hash", log.config_hash},
          {"proposal", std::move(proposal)},
          {"success", log.success},
          {"failure_mode", log.failure_mode},
          {"aborted", log.aborted},
          {"calls",
           {{"policy", log.calls.policy_calls},
            {"policy_samples", log.calls.policy_samples},
            {"vlm", log.calls.vlm_calls},
            {"seg", log.calls.seg_calls},
            {"inpaint", log.calls.inpaint_calls},
            {"attn", log.calls.attn_calls}}},
          {"steps", std::move(steps)},
          {"trajectory", std::move(trajectory)}};
}

void write_episode(const std::filesystem::path& dir, const EpisodeLog& log) {
  std::filesystem::create_directories(dir / "frames");
  for (const auto& s : log.steps) {
    write_png(dir / raw_frame_name(s.index), s.raw);
    write_png(dir / edited_frame_name(s.index), s.edited);
  }
  std::ofstream out(dir / "log.json", std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + (dir / "log.json").string());
  out << to_json(log).dump(1) << "\n";
}

EpisodeSummary read_episode_summary(const std::filesystem::path& log_json) {
  std::ifstream in(log_json);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + log_json.string());
  try {
    const json j = json::parse(in);
    return {j.at("method").get<std::string>(), j.at("seed").get<std::uint64_t>(),
            j.at("success").get<bool>(), j.at("failure_mode").get<std::string>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, log_json.string() + ": " + e.what());
  }
}

std::vector<EpisodeSummary> collect_episodes(const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw Error(ErrorCode::kIoError, "runs directory not found: " + root.string());
  std::vector<fs::path> logs;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().filename() == "log.json") logs.push_back(e.path());
  }
  std::sort(logs.begin(), logs.end());
  std::vector<EpisodeSummary> out;
  for (const auto& p : logs) out.push_back(read_episode_summary(p));
  return out;
}

std::vector<MethodSummary> summarize(const std::vector<EpisodeSummary>& episodes) {
  std::map<std::string, MethodSummary> by_method;
  for (const auto& e : episodes) {
    auto& m = by_method[e.method];
    m.method = e.method;
    ++m.trials;
    if (e.success) {
      ++m.successes;
    } else {
      ++m.failure_modes[e.failure_mode];
    }
  }
  std::vector<MethodSummary> out;
  for (auto& [_, m] : by_method) out.push_back(std::move(m));
  return out;
}

std::string summary_csv(const std::vector<MethodSummary>& rows) {
  std::ostringstream out;
  out << "method,successes,trials,rate\n";
  for (const auto& r : rows) {
    char rate[32];
    std::snprintf(rate, sizeof rate, "%.4f", r.rate());
    out << r.method << ',' << r.successes << ',' << r.trials << ',' << rate << '\n';
  }
  return out.str();
}

json summary_json(const std::vector<MethodSummary>& rows) {
  json methods = json::array();
  for (const auto& r : rows) {
    methods.push_back({{"method", r.method},
                       {"successes", r.successes},
                       {"trials", r.trials},
                       {"rate", r.rate()},
                       {"failure_modes", r.failure_modes}});
  }
  return {{"schema", kSummarySchema}, {"methods", std::move(methods)}};
}

}  // namespace byovla
