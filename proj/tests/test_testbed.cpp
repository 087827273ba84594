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

#include <cmath>

#include "support.hpp"

#include "byovla/config.hpp"
#include "byovla/rng.hpp"
#include "byovla/sensitivity.hpp"
#include "byovla/testbed.hpp"

using namespace byovla;
using namespace byovla::test;
using namespace byovla::testbed;

namespace {

TaskContext start_context(const SceneSpec& s) {
  const auto& d = s.dynamics;
  return {s.instruction, Proprio{d.start_x, d.start_y, d.start_z, 0.0}};
}

const RegionMask* find_mask(const std::vector<RegionMask>& masks, const std::string& label) {
  for (const auto& m : masks)
    if (m.label == label) return &m;
  return nullptr;
}

TrajectoryPoint point(int t, double x, double y, double z, bool closed, bool holding,
                      double ox, double oy) {
  return {t, x, y, z, closed, holding, ox, oy};
}

// Steps chunk rows one per tick until the episode ends.
std::vector<TrajectoryPoint> rollout(const SceneSpec& scene, std::uint64_t seed) {
  Environment env(scene, seed);
  SimPolicy policy(scene, 3);
  std::uint64_t call = 0;
  while (!env.done()) {
    const auto chunk = policy.predict(
        {env.observe().image, {scene.instruction, env.proprio()}, 1, derive_seed(seed, {call++})});
    for (int t = 0; t < chunk[0].rows() && !env.done(); ++t) env.step(chunk[0].row(t).transpose());
  }
  return env.trajectory();
}

}  // namespace

TEST_CASE("rendering is deterministic with disjoint ground-truth masks") {
  for (const char* name : {"standard", "clean", "background"}) {
    const SceneSpec s = builtin_scene(name);
    const Rendered a = render(s), b = render(s);
    CHECK(a.image == b.image);
    REQUIRE(a.masks.size() == b.masks.size());
    for (std::size_t i = 0; i < a.masks.size(); ++i) {
      CHECK((a.masks[i].bitmap == b.masks[i].bitmap).all());
      CHECK(a.masks[i].count() > 0);
      for (std::size_t j = i + 1; j < a.masks.size(); ++j)
        CHECK((a.masks[i].bitmap && a.masks[j].bitmap).count() == 0);
    }
  }
}

TEST_CASE("mask order and kinds follow the scene") {
  const SceneSpec s = builtin_scene("standard");
  const Rendered r = render(s);
  REQUIRE(r.masks.size() == s.distractors.size() + s.tiles.size());
  for (std::size_t i = 0; i < s.distractors.size(); ++i) {
    CHECK(r.masks[i].label == s.distractors[i].item.label);
    CHECK(r.masks[i].kind == RegionKind::kObject);
  }
  for (std::size_t i = 0; i < s.tiles.size(); ++i) {
    CHECK(r.masks[s.distractors.size() + i].label == s.tiles[i].label);
    CHECK(r.masks[s.distractors.size() + i].kind == RegionKind::kBackground);
  }
  // Distractor pixels carry the distractor colour exactly.
  const auto& orange = s.distractors[0];
  CHECK(r.image.pixel(static_cast<int>(orange.item.cx), static_cast<int>(orange.item.cy)) ==
        orange.item.color);
}

TEST_CASE("overlapping distractors are rejected") {
  SceneSpec s = builtin_scene("standard");
  s.distractors[0].item.cx = s.task_object.cx;
  s.distractors[0].item.cy = s.task_object.cy;
  CHECK_THROWS_CODE(s.validate(), ErrorCode::kSceneError);
  CHECK_THROWS_CODE(render(s), ErrorCode::kSceneError);

  SceneSpec neg = builtin_scene("standard");
  neg.distractors[1].gain = -1.0;
  CHECK_THROWS_CODE(neg.validate(), ErrorCode::kSceneError);
  CHECK_THROWS_CODE(builtin_scene("nope"), ErrorCode::kSceneError);
}

TEST_CASE("without distractors only the task object and goal sit on the table") {
  const SceneSpec s = builtin_scene("standard").without_distractors();
  CHECK(s.distractors.empty());
  const Rendered r = render(s);
  const Image bg = render_background(s);
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x) {
      const Rgb p = r.image.pixel(x, y);
      if (s.task_object.contains(x, y)) {
        CHECK(p == s.task_object.color);
      } else if (s.goal.contains(x, y)) {
        CHECK(p == s.goal.color);
      } else if (!(p == bg.pixel(x, y))) {
        FAIL("stray pixel at " << x << "," << y);
      }
    }
}

TEST_CASE("zero gains and zero noise give identical chunks for any distractors") {
  SceneSpec s = builtin_scene("standard");
  for (auto& d : s.distractors) d.gain = 0.0;
  s.dynamics.action_noise = 0.0;
  SimPolicy with(s, 3);
  SimPolicy without(s.without_distractors(), 3);
  const Image a = render(s).image;
  const Image b = render(s.without_distractors()).image;
  const auto ca = with.predict({a, start_context(s), 4, 11});
  const auto cb = without.predict({b, start_context(s), 4, 99});
  REQUIRE(ca.size() == 4);
  for (std::size_t i = 0; i < ca.size(); ++i) CHECK(ca[i] == cb[0]);
  CHECK(with.injected_offset(a) == Action::Zero());
}

TEST_CASE("a calibrated gain lands the probe delta on target") {
  SceneSpec s = builtin_scene("standard");
  s.dynamics.action_noise = 0.0;
  const PipelineConfig cfg;
  for (const char* label : {"orange", "blue towel", "donut"}) {
    SimPolicy sim(s, cfg.horizon);
    const Rendered r = render(s);
    const auto out =
        probe_region(sim, r.image, start_context(s), *find_mask(r.masks, label), cfg, 5);
    CHECK(out.delta == doctest::Approx(2.0 * cfg.tau_object).epsilon(1e-9));
  }
  for (const char* label : {"knife", "green cup"}) {
    SimPolicy sim(s, cfg.horizon);
    const Rendered r = render(s);
    const auto out =
        probe_region(sim, r.image, start_context(s), *find_mask(r.masks, label), cfg, 5);
    CHECK(out.delta == 0.0);
  }

  SceneSpec bg = builtin_scene("background");
  bg.dynamics.action_noise = 0.0;
  SimPolicy sim(bg, cfg.horizon);
  const Rendered r = render(bg);
  // The noise stream matches the one calibrated_gain drew with seed 0.
  const auto out =
      probe_region(sim, r.image, start_context(bg), *find_mask(r.masks, "counter"), cfg, 0);
  CHECK(out.delta == doctest::Approx(2.0 * cfg.tau_background).epsilon(1e-9));
}

TEST_CASE("sim policy samples are seeded") {
  const SceneSpec s = builtin_scene("standard");
  SimPolicy sim(s, 3);
  const Image img = render(s).image;
  const auto a = sim.predict({img, start_context(s), 3, 42});
  const auto b = sim.predict({img, start_context(s), 3, 42});
  const auto c = sim.predict({img, start_context(s), 3, 43});
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK_FALSE(a[0] == a[1]);
  CHECK(a[0].rows() == 4);
  CHECK_THROWS_CODE(sim.predict({Image(8, 8), start_context(s), 1, 0}), ErrorCode::kShapeError);
  CHECK_THROWS_CODE(sim.predict({img, start_context(s), 0, 0}), ErrorCode::kInvalidArgument);
}

TEST_CASE("failure modes from hand-built trajectories") {
  const SceneSpec s = builtin_scene("clean");
  const double gx = s.goal.cx * s.dynamics.meters_per_pixel;
  const double gy = s.goal.cy * s.dynamics.meters_per_pixel;

  SUBCASE("never closes") {
    CHECK(evaluate_success({point(0, 0, 0, 0.08, false, false, 0.1, 0.1),
                            point(1, 0, 0, 0.08, false, false, 0.1, 0.1)},
                           s)
              .failure_mode == "timeout");
  }
  SUBCASE("closes far from the object") {
    const Outcome o = evaluate_success({point(0, 0.05, 0.05, 0.08, false, false, 0.1, 0.1),
                                        point(1, 0.05, 0.05, 0.08, true, false, 0.1, 0.1)},
                                       s);
    CHECK_FALSE(o.success);
    CHECK(o.failure_mode == "early_grasp");
  }
  SUBCASE("closes near but misses") {
    CHECK(evaluate_success({point(0, 0.105, 0.1, 0.015, false, false, 0.1, 0.1),
                            point(1, 0.105, 0.1, 0.015, true, false, 0.1, 0.1)},
                           s)
              .failure_mode == "missed_approach");
  }
  SUBCASE("grasps but never lifts") {
    std::vector<TrajectoryPoint> tr{point(0, 0.1, 0.1, 0.015, false, false, 0.1, 0.1)};
    for (int t = 1; t <= 12; ++t) tr.push_back(point(t, 0.1, 0.1, 0.015, true, true, 0.1, 0.1));
    CHECK(evaluate_success(tr, s).failure_mode == "no_lift");
  }
  SUBCASE("lifts, carries and releases over the goal") {
    std::vector<TrajectoryPoint> tr{point(0, 0.1, 0.1, 0.015, false, false, 0.1, 0.1),
                                    point(1, 0.1, 0.1, 0.015, true, true, 0.1, 0.1),
                                    point(2, 0.1, 0.1, 0.03, true, true, 0.1, 0.1),
                                    point(3, gx, gy, 0.03, true, true, gx, gy),
                                    point(4, gx, gy, 0.03, false, false, gx, gy)};
    const Outcome o = evaluate_success(tr, s);
    CHECK(o.success);
    CHECK(o.failure_mode.empty());
    tr[3] = point(3, gx + 0.05, gy, 0.03, true, true, gx + 0.05, gy);
    tr[4] = point(4, gx + 0.05, gy, 0.03, false, false, gx + 0.05, gy);
    CHECK(evaluate_success(tr, s).failure_mode == "missed_approach");
  }
}

TEST_CASE("the clean scene is solved and distractors break it") {
  int clean = 0, cluttered = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    clean += evaluate_success(rollout(builtin_scene("clean"), seed), builtin_scene("clean")).success;
    cluttered +=
        evaluate_success(rollout(builtin_scene("standard"), seed), builtin_scene("standard"))
            .success;
  }
  CHECK(clean == 10);
  CHECK(cluttered <= 3);
}

TEST_CASE("environment bookkeeping") {
  const SceneSpec s = builtin_scene("clean");
  Environment env(s, 5);
  CHECK(env.t() == 0);
  CHECK(env.trajectory().size() == 1);
  const double d = std::hypot(env.object_x() - s.task_object.cx * s.dynamics.meters_per_pixel,
                              env.object_y() - s.task_object.cy * s.dynamics.meters_per_pixel);
  CHECK(d >= s.dynamics.object_offset_min - 1e-12);
  CHECK(d <= s.dynamics.object_offset_max + 1e-12);
  Action up = Action::Zero();
  up(2) = 1.0;
  up(6) = 1.0;
  env.step(up);
  CHECK(env.proprio()[2] == 0.2);
  CHECK(env.t() == 1);
  // Closing then opening ends the episode.
  Action close = Action::Zero();
  env.step(close);
  CHECK(env.proprio()[3] == 1.0);
  env.step(up);
  CHECK(env.done());
  const auto n = env.trajectory().size();
  env.step(up);
  CHECK(env.trajectory().size() == n);
  CHECK(trajectory_point_from_json(to_json(env.trajectory().back())).z ==
        env.trajectory().back().z);
}

TEST_CASE("scenes round trip through JSON and files") {
  for (const char* name : {"standard", "clean", "background"}) {
    const SceneSpec s = builtin_scene(name);
    const nlohmann::json j = to_json(s);
    const SceneSpec back = scene_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(render(back).image == render(s).image);
  }
  const std::string shipped = std::string(BYOVLA_SOURCE_DIR) + "/data/scenes/standard.json";
  CHECK(to_json(load_scene(shipped)) == to_json(builtin_scene("standard")));
  CHECK(to_json(resolve_scene(shipped)) == to_json(resolve_scene("standard")));
  CHECK_THROWS_CODE(scene_from_json(nlohmann::json{{"width", 4}}), ErrorCode::kSceneError);
}

TEST_CASE("generated probe scenes agree with their ground truth") {
  const PipelineConfig cfg;
  int agree = 0, total = 0;
  for (std::uint64_t i = 0; i < 6; ++i) {
    const GeneratedScene g = generate_probe_scene(i, cfg.tau_object, cfg.tau_background,
                                                  cfg.horizon, cfg.blur_kernel, cfg.noise_sigma);
    CHECK(g.sensitive.size() + g.inert.size() == g.scene.distractors.size() + g.scene.tiles.size());
    CHECK_NOTHROW(g.scene.validate());
    SimPolicy sim(g.scene, cfg.horizon);
    const Rendered r = render(g.scene);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto rep = probe_all(sim, r.image, start_context(g.scene), r.masks, cfg, seed);
      for (const auto& e : rep.entries) {
        const bool truth =
            std::find(g.sensitive.begin(), g.sensitive.end(), e.label) != g.sensitive.end();
        agree += e.sensitive == truth;
        ++total;
      }
    }
  }
  CHECK(agree >= total * 95 / 100);
  // Same seed, same scene.
  CHECK(to_json(generate_probe_scene(3, 0.002, 0.001, 3, 5, 0.27).scene) ==
        to_json(generate_probe_scene(3, 0.002, 0.001, 3, 5, 0.27).scene));
}
