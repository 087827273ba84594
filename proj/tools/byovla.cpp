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

// Command-line front end: calibrate, probe, run, report, plus fixture helpers.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "byovla/backends/registry.hpp"
#include "byovla/calibrate.hpp"
#include "byovla/config.hpp"
#include "byovla/image_io.hpp"
#include "byovla/intervene.hpp"
#include "byovla/orchestrator.hpp"
#include "byovla/regions.hpp"
#include "byovla/rng.hpp"
#include "byovla/sensitivity.hpp"
#include "byovla/testbed.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace byovla;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
}

PipelineConfig config_or_default(const std::string& path) {
  return path.empty() ? PipelineConfig{} : load_config(path);
}

void warn(const std::string& message) {
  std::cerr << json{{"warning", message}}.dump() << "\n";
}

bool is_builtin_scene(const std::string& s) {
  return s == "standard" || s == "clean" || s == "background";
}

// ------------------------------------------------------------- calibrate

struct CalibrateArgs {
  std::string dataset, kind = "object", out, config, backends;
  std::uint64_t seed = 0;
};

int cmd_calibrate(const CalibrateArgs& a) {
  const PipelineConfig cfg = config_or_default(a.config);
  const auto dataset = load_calibration_dataset(a.dataset);
  std::optional<BackendSet> shared;
  if (!a.backends.empty()) shared = load_backends(a.backends, cfg);

  std::map<std::string, std::shared_ptr<PolicyBackend>> per_scene;
  auto resolver = [&](const CalibrationEnvironment& env) -> PolicyBackend& {
    if (shared) return *shared->policy;
    if (env.scene.empty()) {
      throw Error(ErrorCode::kFixtureMissing,
                  "environment " + env.id + " names no scene; pass --backends");
    }
    const std::string key = is_builtin_scene(env.scene) ? env.scene : (env.dir / env.scene).string();
    auto& slot = per_scene[key];
    if (!slot) slot = std::make_shared<testbed::SimPolicy>(testbed::resolve_scene(key), cfg.horizon);
    return *slot;
  };
  const CalibrationReport report =
      calibrate_threshold(resolver, dataset, cfg, region_kind_from_string(a.kind), a.seed);
  write_text(a.out, to_json(report).dump(2) + "\n");
  std::cout << json{{"kind", a.kind}, {"tau", report.tau}, {"samples", report.samples.size()}}.dump()
            << "\n";
  return 0;
}

// ----------------------------------------------------------- make-dataset

struct DatasetArgs {
  std::string out;
  int count = 20;
  std::uint64_t seed = 0;
};

int cmd_make_dataset(const DatasetArgs& a) {
  const PipelineConfig cfg;
  for (int i = 0; i < a.count; ++i) {
    const auto gen = testbed::generate_probe_scene(derive_seed(a.seed, {static_cast<std::uint64_t>(i)}),
                                                   cfg.tau_object, cfg.tau_background, cfg.horizon,
                                                   cfg.blur_kernel, cfg.noise_sigma);
    char name[32];
    std::snprintf(name, sizeof name, "env_%03d", i);
    const fs::path dir = fs::path(a.out) / name;
    const testbed::Rendered r = testbed::render(gen.scene);
    const auto& k = gen.scene.dynamics;
    CalibrationEnvironment env{name, r.image, {gen.scene.instruction, Proprio{k.start_x, k.start_y, k.start_z, 0.0}},
                               r.masks, "scene.json", dir};
    save_calibration_environment(dir, env, {{"sensitive", gen.sensitive}, {"inert", gen.inert}});
    write_text(dir / "scene.json", testbed::to_json(gen.scene).dump(2) + "\n");
  }
  std::cout << json{{"environments", a.count}, {"out", a.out}}.dump() << "\n";
  return 0;
}

// ------------------------------------------------------------------ probe

struct ProbeArgs {
  std::string image, instruction, config, backends, out, edited, proprio;
  std::uint64_t seed = 0;
};

int cmd_probe(const ProbeArgs& a) {
  const PipelineConfig cfg = config_or_default(a.config);
  BackendSet set = load_backends(a.backends, cfg);
  const Image obs = read_png(a.image);
  TaskContext ctx{a.instruction, std::nullopt};
  if (!a.proprio.empty()) {
    Proprio p{};
    if (std::sscanf(a.proprio.c_str(), "%lf,%lf,%lf,%lf", &p[0], &p[1], &p[2], &p[3]) != 4) {
      throw Error(ErrorCode::kInvalidArgument, "--proprio expects x,y,z,gripper");
    }
    ctx.proprio = p;
  } else if (set.scene) {
    const auto& k = set.scene->dynamics;
    ctx.proprio = Proprio{k.start_x, k.start_y, k.start_z, 0.0};
  }
  const BackendRefs b = set.view();
  if (!b.vlm || !b.seg) throw Error(ErrorCode::kInvalidArgument, "probe needs vlm and seg backends");

  const ProposalResult proposal = propose_regions(*b.vlm, obs, a.instruction, default_prompt_template());
  const GroundingResult grounded =
      ground_regions(*b.seg, obs, proposal.proposal, cfg.box_threshold, cfg.text_threshold);
  for (const auto& l : grounded.ungrounded) warn("no mask for proposed region '" + l + "'");
  const SensitivityReport report = probe_all(*b.policy, obs, ctx, grounded.masks, cfg, a.seed);
  write_text(a.out, to_json(report).dump(2) + "\n");
  if (!a.edited.empty()) {
    const auto result = apply_interventions(*b.policy, obs, report, grounded.masks, ctx, cfg,
                                            derive_seed(a.seed, "intervene"), b.inpaint);
    write_png(a.edited, result.image);
  }
  std::cout << json{{"regions", report.entries.size()}, {"sensitive", report.sensitive_count()}}.dump()
            << "\n";
  return 0;
}

// -------------------------------------------------------------------- run

struct RunArgs {
  std::string method, env = "standard", out, config, backends;
  int episodes = 50;
  int jobs = 1;
  std::uint64_t seed = 0;
};

int cmd_run(const RunArgs& a) {
  const Method method = method_from_string(a.method);
  const PipelineConfig cfg = config_or_default(a.config);
  const testbed::SceneSpec scene = testbed::resolve_scene(a.env);
  fs::create_directories(a.out);
  if (a.episodes <= 0) {
    warn("no episodes requested; wrote an empty run directory");
    return 0;
  }

  json backends_cfg = json::object();
  fs::path base;
  if (!a.backends.empty()) {
    std::ifstream in(a.backends);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open " + a.backends);
    backends_cfg = json::parse(in);
    base = fs::path(a.backends).parent_path();
  }
  if (!backends_cfg.contains("scene")) {
    backends_cfg["scene"] = is_builtin_scene(a.env) ? a.env : fs::absolute(a.env).string();
  }
  BackendSet set = make_backends(backends_cfg, cfg, base);
  const BackendRefs refs = set.view();

  auto run_one = [&](int n) {
    EpisodeLog log = run_episode(refs, scene, cfg, method, episode_seed(a.seed, n), n);
    write_episode(fs::path(a.out) / ("ep_" + std::to_string(n)), log);
    return EpisodeSummary{std::string(to_string(method)), log.seed, log.success, log.failure_mode};
  };

  std::vector<EpisodeSummary> results(static_cast<std::size_t>(a.episodes));
  const bool protocol_traffic = backends_cfg.dump().find("\"transport\"") != std::string::npos;
  if (a.jobs <= 1 || protocol_traffic) {
    // Protocol endpoints run sequentially so transcripts replay in order.
    for (int n = 0; n < a.episodes; ++n) results[n] = run_one(n);
  } else {
    for (int start = 0; start < a.episodes; start += a.jobs) {
      std::vector<std::future<EpisodeSummary>> batch;
      for (int n = start; n < std::min(a.episodes, start + a.jobs); ++n) {
        batch.push_back(std::async(std::launch::async, run_one, n));
      }
      for (std::size_t i = 0; i < batch.size(); ++i) results[start + i] = batch[i].get();
    }
  }
  if (set.transcript && set.transcript->size() > 0) {
    set.transcript->save(fs::path(a.out) / "transcript.jsonl");
  }
  const auto summary = summarize(results);
  json run{{"schema", "run/1"},
           {"method", a.method},
           {"env", scene.name},
           {"seed", a.seed},
           {"episodes", a.episodes},
           {"config_hash", config_hash(cfg)},
           {"config", to_json(cfg)},
           {"summary", summary_json(summary)}};
  write_text(fs::path(a.out) / "run.json", run.dump(2) + "\n");
  std::cout << summary_csv(summary);
  return 0;
}

// ----------------------------------------------------------------- report

struct ReportArgs {
  std::string runs, out;
};

int cmd_report(const ReportArgs& a) {
  const auto rows = summarize(collect_episodes(a.runs));
  const std::string ext = fs::path(a.out).extension().string();
  if (ext == ".csv") {
    write_text(a.out, summary_csv(rows));
  } else if (ext == ".json") {
    write_text(a.out, summary_json(rows).dump(2) + "\n");
  } else {
    throw Error(ErrorCode::kInvalidArgument, "--out must end in .csv or .json");
  }
  std::cout << summary_csv(rows);
  return 0;
}

// ------------------------------------------------------------ export-scene

int cmd_export_scene(const std::string& name, const std::string& out) {
  write_text(out, testbed::to_json(testbed::resolve_scene(name)).dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Run-time visual intervention for black-box robot policies"};
  app.require_subcommand(1);

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Third-quartile threshold from an offline dataset");
  c->add_option("--dataset", cal.dataset, "Dataset directory")->required();
  c->add_option("--kind", cal.kind, "Region kind")->check(CLI::IsMember({"object", "background"}));
  c->add_option("--out", cal.out, "Calibration report (JSON)")->required();
  c->add_option("--config", cal.config, "Pipeline config (JSON)");
  c->add_option("--backends", cal.backends, "Backends config; default: per-environment scene");
  c->add_option("--seed", cal.seed, "Probe seed");

  DatasetArgs ds;
  auto* d = app.add_subcommand("make-dataset", "Write a synthetic calibration dataset");
  d->add_option("--out", ds.out, "Output directory")->required();
  d->add_option("--count", ds.count, "Number of environments")->check(CLI::NonNegativeNumber);
  d->add_option("--seed", ds.seed, "Generator seed");

  ProbeArgs pr;
  auto* p = app.add_subcommand("probe", "Sensitivity report for one observation");
  p->add_option("--image", pr.image, "Observation (PNG)")->required();
  p->add_option("--instruction", pr.instruction, "Language instruction")->required();
  p->add_option("--config", pr.config, "Pipeline config (JSON)");
  p->add_option("--backends", pr.backends, "Backends config (JSON)")->required();
  p->add_option("--out", pr.out, "Report (JSON)")->required();
  p->add_option("--edited", pr.edited, "Also write the edited observation (PNG)");
  p->add_option("--proprio", pr.proprio, "x,y,z,gripper");
  p->add_option("--seed", pr.seed, "Probe seed");

  RunArgs run;
  auto* r = app.add_subcommand("run", "Run testbed episodes");
  r->add_option("--method", run.method, "Method")
      ->required()
      ->check(CLI::IsMember({"raw", "byovla", "nosens", "gradcam"}));
  r->add_option("--episodes", run.episodes, "Episode count");
  r->add_option("--seed", run.seed, "Run seed");
  r->add_option("--env", run.env, "Scene: standard, clean, background or a scene file");
  r->add_option("--out", run.out, "Run directory")->required();
  r->add_option("--config", run.config, "Pipeline config (JSON)");
  r->add_option("--backends", run.backends, "Backends config (JSON)");
  r->add_option("--jobs", run.jobs, "Parallel episodes (stub backends only)");

  ReportArgs rep;
  auto* s = app.add_subcommand("report", "Success rates per method");
  s->add_option("--runs", rep.runs, "Directory holding run directories")->required();
  s->add_option("--out", rep.out, "summary.csv or summary.json")->required();

  std::string scene_name, scene_out;
  auto* e = app.add_subcommand("export-scene", "Write a scene as JSON");
  e->add_option("--scene", scene_name, "Scene name or file")->required();
  e->add_option("--out", scene_out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (*c) return cmd_calibrate(cal);
    if (*d) return cmd_make_dataset(ds);
    if (*p) return cmd_probe(pr);
    if (*r) return cmd_run(run);
    if (*s) return cmd_report(rep);
    if (*e) return cmd_export_scene(scene_name, scene_out);
  } catch (const Error& err) {
    std::cerr << json{{"error", std::string(to_string(err.code()))}, {"message", err.what()}}.dump()
              << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << json{{"error", "Internal"}, {"message", err.what()}}.dump() << "\n";
    return 3;
  }
  return 1;
}
