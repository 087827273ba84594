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

#include "byovla/testbed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "byovla/intervene.hpp"
#include "byovla/mask.hpp"
#include "byovla/perturb.hpp"
#include "byovla/rng.hpp"
#include "byovla/sensitivity.hpp"

namespace byovla::testbed {

using nlohmann::json;

bool Item::contains(int x, int y) const {
  const double px = x + 0.5 - cx;
  const double py = y + 0.5 - cy;
  if (shape == Shape::kDisk) return px * px + py * py <= half_w * half_w;
  return std::abs(px) <= half_w && std::abs(py) <= half_h;
}

namespace {

Bitmap item_bitmap(const Item& item, int w, int h) {
  Bitmap b = Bitmap::Constant(h, w, false);
  const int x0 = std::max(0, static_cast<int>(std::floor(item.cx - item.half_w)) - 1);
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(item.cx + item.half_w)) + 1);
  const double hh = item.shape == Shape::kDisk ? item.half_w : item.half_h;
  const int y0 = std::max(0, static_cast<int>(std::floor(item.cy - hh)) - 1);
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(item.cy + hh)) + 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (item.contains(x, y)) b(y, x) = true;
  return b;
}

Bitmap tile_bitmap(const BackgroundTile& tile, int w, int h) {
  Bitmap b = Bitmap::Constant(h, w, false);
  for (int y = std::max(0, tile.y0); y <= std::min(h - 1, tile.y1); ++y)
    for (int x = std::max(0, tile.x0); x <= std::min(w - 1, tile.x1); ++x) b(y, x) = true;
  return b;
}

void paint(Image& img, const Bitmap& b, Rgb c) {
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (b(y, x)) img.set_pixel(x, y, c);
}

Bitmap color_pixels(const Image& img, Rgb c) {
  Bitmap b(img.height(), img.width());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) b(y, x) = img.pixel(x, y) == c;
  return b;
}

/// Static tile footprint: tile pixels not covered by the goal or a distractor.
Bitmap tile_footprint(const SceneSpec& scene, std::size_t i) {
  Bitmap b = tile_bitmap(scene.tiles[i], scene.width, scene.height);
  b = b && !item_bitmap(scene.goal, scene.width, scene.height);
  for (const auto& d : scene.distractors) {
    b = b && !item_bitmap(d.item, scene.width, scene.height);
  }
  // Later tiles paint over earlier ones.
  for (std::size_t j = i + 1; j < scene.tiles.size(); ++j) {
    b = b && !tile_bitmap(scene.tiles[j], scene.width, scene.height);
  }
  return b;
}

json rgb_json(Rgb c) { return json::array({c.r, c.g, c.b}); }
Rgb rgb_from(const json& j) {
  return {j.at(0).get<std::uint8_t>(), j.at(1).get<std::uint8_t>(), j.at(2).get<std::uint8_t>()};
}

json item_json(const Item& it) {
  return {{"label", it.label},
          {"shape", it.shape == Shape::kDisk ? "disk" : "rect"},
          {"color", rgb_json(it.color)},
          {"cx", it.cx},
          {"cy", it.cy},
          {"half_w", it.half_w},
          {"half_h", it.half_h}};
}

Item item_from(const json& j) {
  Item it;
  it.label = j.value("label", std::string());
  const std::string shape = j.value("shape", std::string("disk"));
  if (shape == "disk") {
    it.shape = Shape::kDisk;
  } else if (shape == "rect") {
    it.shape = Shape::kRect;
  } else {
    throw Error(ErrorCode::kSceneError, "unknown shape '" + shape + "'");
  }
  it.color = rgb_from(j.at("color"));
  it.cx = j.at("cx").get<double>();
  it.cy = j.at("cy").get<double>();
  it.half_w = j.value("half_w", 8.0);
  it.half_h = j.value("half_h", it.half_w);
  return it;
}

json action_json(const Action& a) {
  json arr = json::array();
  for (int i = 0; i < kActionDim; ++i) arr.push_back(a(i));
  return arr;
}

Action action_from(const json& j) {
  if (!j.is_array() || j.size() != kActionDim) {
    throw Error(ErrorCode::kSceneError, "response must have 7 entries");
  }
  Action a;
  for (int i = 0; i < kActionDim; ++i) a(i) = j.at(i).get<double>();
  return a;
}

double items_gap(const Item& a, const Item& b) {
  auto radius = [](const Item& i) { return std::hypot(i.half_w, i.shape == Shape::kDisk ? i.half_w : i.half_h); };
  return std::hypot(a.cx - b.cx, a.cy - b.cy) - radius(a) - radius(b);
}

}  // namespace

void SceneSpec::validate() const {
  if (width <= 0 || height <= 0) throw Error(ErrorCode::kSceneError, "scene size must be positive");
  if (task_object.color == goal.color) {
    throw Error(ErrorCode::kSceneError, "task object and goal share a colour");
  }
  for (const auto& d : distractors) {
    if (d.gain < 0.0) throw Error(ErrorCode::kSceneError, "negative gain on " + d.item.label);
    if (d.item.label.empty()) throw Error(ErrorCode::kSceneError, "distractor without label");
    if (d.item.color == task_object.color || d.item.color == goal.color) {
      throw Error(ErrorCode::kSceneError, d.item.label + " reuses the task or goal colour");
    }
    if (items_gap(d.item, task_object) < 0.0 || items_gap(d.item, goal) < 0.0) {
      throw Error(ErrorCode::kSceneError, d.item.label + " overlaps the task object or goal");
    }
  }
  for (const auto& t : tiles) {
    if (t.gain < 0.0) throw Error(ErrorCode::kSceneError, "negative gain on " + t.label);
    if (t.x1 < t.x0 || t.y1 < t.y0) throw Error(ErrorCode::kSceneError, "empty tile " + t.label);
  }
}

SceneSpec SceneSpec::without_distractors() const {
  SceneSpec s = *this;
  s.distractors.clear();
  s.name = name + "_clean";
  return s;
}

json to_json(const SceneSpec& s) {
  json tiles = json::array();
  for (const auto& t : s.tiles) {
    tiles.push_back({{"label", t.label},
                     {"color", rgb_json(t.color)},
                     {"rect", {t.x0, t.y0, t.x1, t.y1}},
                     {"gain", t.gain},
                     {"response", action_json(t.response)}});
  }
  json ds = json::array();
  for (const auto& d : s.distractors) {
    json j = item_json(d.item);
    j["gain"] = d.gain;
    j["response"] = action_json(d.response);
    ds.push_back(std::move(j));
  }
  const Dynamics& k = s.dynamics;
  return {{"schema", "scene/1"},
          {"name", s.name},
          {"width", s.width},
          {"height", s.height},
          {"table_color", rgb_json(s.table_color)},
          {"instruction", s.instruction},
          {"task_object", item_json(s.task_object)},
          {"goal", item_json(s.goal)},
          {"tiles", std::move(tiles)},
          {"distractors", std::move(ds)},
          {"dynamics",
           {{"meters_per_pixel", k.meters_per_pixel},
            {"start", {k.start_x, k.start_y, k.start_z}},
            {"carry_z", k.carry_z},
            {"grasp_z", k.grasp_z},
            {"max_step", k.max_step},
            {"servo_gain", k.servo_gain},
            {"approach_tolerance", k.approach_tolerance},
            {"grasp_tolerance", k.grasp_tolerance},
            {"grasp_max_z", k.grasp_max_z},
            {"early_grasp_distance", k.early_grasp_distance},
            {"success_tolerance", k.success_tolerance},
            {"no_lift_steps", k.no_lift_steps},
            {"lift_progress", k.lift_progress},
            {"max_steps", k.max_steps},
            {"object_offset", {k.object_offset_min, k.object_offset_max}},
            {"action_noise", k.action_noise}}}};
}

SceneSpec scene_from_json(const json& j) {
  SceneSpec s;
  try {
    if (j.contains("schema") && j.at("schema") != "scene/1") {
      throw Error(ErrorCode::kSceneError, "unsupported scene schema");
    }
    s.name = j.value("name", std::string("scene"));
    s.width = j.value("width", 256);
    s.height = j.value("height", 256);
    if (j.contains("table_color")) s.table_color = rgb_from(j.at("table_color"));
    s.instruction = j.value("instruction", s.instruction);
    s.task_object = item_from(j.at("task_object"));
    s.goal = item_from(j.at("goal"));
    for (const auto& t : j.value("tiles", json::array())) {
      BackgroundTile tile;
      tile.label = t.at("label").get<std::string>();
      tile.color = rgb_from(t.at("color"));
      const auto& r = t.at("rect");
      tile.x0 = r.at(0);
      tile.y0 = r.at(1);
      tile.x1 = r.at(2);
      tile.y1 = r.at(3);
      tile.gain = t.value("gain", 0.0);
      if (t.contains("response")) tile.response = action_from(t.at("response"));
      s.tiles.push_back(std::move(tile));
    }
    for (const auto& d : j.value("distractors", json::array())) {
      Distractor dist;
      dist.item = item_from(d);
      dist.gain = d.value("gain", 0.0);
      if (d.contains("response")) dist.response = action_from(d.at("response"));
      s.distractors.push_back(std::move(dist));
    }
    if (j.contains("dynamics")) {
      const auto& k = j.at("dynamics");
      Dynamics& o = s.dynamics;
      o.meters_per_pixel = k.value("meters_per_pixel", o.meters_per_pixel);
      if (k.contains("start")) {
        o.start_x = k.at("start").at(0);
        o.start_y = k.at("start").at(1);
        o.start_z = k.at("start").at(2);
      }
      o.carry_z = k.value("carry_z", o.carry_z);
      o.grasp_z = k.value("grasp_z", o.grasp_z);
      o.max_step = k.value("max_step", o.max_step);
      o.servo_gain = k.value("servo_gain", o.servo_gain);
      o.approach_tolerance = k.value("approach_tolerance", o.approach_tolerance);
      o.grasp_tolerance = k.value("grasp_tolerance", o.grasp_tolerance);
      o.grasp_max_z = k.value("grasp_max_z", o.grasp_max_z);
      o.early_grasp_distance = k.value("early_grasp_distance", o.early_grasp_distance);
      o.success_tolerance = k.value("success_tolerance", o.success_tolerance);
      o.no_lift_steps = k.value("no_lift_steps", o.no_lift_steps);
      o.lift_progress = k.value("lift_progress", o.lift_progress);
      o.max_steps = k.value("max_steps", o.max_steps);
      if (k.contains("object_offset")) {
        o.object_offset_min = k.at("object_offset").at(0);
        o.object_offset_max = k.at("object_offset").at(1);
      }
      o.action_noise = k.value("action_noise", o.action_noise);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSceneError, std::string("bad scene: ") + e.what());
  }
  s.validate();
  return s;
}

SceneSpec load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open scene " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSceneError, path.string() + ": " + e.what());
  }
  return scene_from_json(j);
}

namespace {

SceneSpec base_scene() {
  SceneSpec s;
  s.name = "clean";
  s.table_color = {150, 144, 136};
  s.tiles.push_back({"wall", {176, 178, 180}, 0, 0, 255, 35});
  s.tiles.push_back({"counter", {120, 116, 110}, 0, 246, 255, 255});
  s.task_object = {"carrot", Shape::kDisk, {235, 120, 30}, 80.0, 150.0, 10.0, 10.0};
  s.goal = {"yellow plate", Shape::kDisk, {240, 220, 60}, 190.0, 150.0, 18.0, 18.0};
  s.instruction = "place the carrot on yellow plate";
  return s;
}

Action planar(double dx, double dy, double grip = 0.0) {
  Action a = Action::Zero();
  const double n = std::hypot(dx, dy);
  a(0) = dx / n;
  a(1) = dy / n;
  a(6) = grip;
  return a;
}

void assign_gains(SceneSpec& s, const std::vector<std::string>& sensitive) {
  const PipelineConfig cfg;
  for (auto& d : s.distractors) {
    if (std::find(sensitive.begin(), sensitive.end(), d.item.label) == sensitive.end()) continue;
    d.gain = calibrated_gain(s, d.item.label, 2.0 * cfg.tau_object, cfg.horizon,
                             cfg.blur_kernel, cfg.noise_sigma, 0);
  }
  for (auto& t : s.tiles) {
    if (std::find(sensitive.begin(), sensitive.end(), t.label) == sensitive.end()) continue;
    t.gain = calibrated_gain(s, t.label, 2.0 * cfg.tau_background, cfg.horizon,
                             cfg.blur_kernel, cfg.noise_sigma, 0);
  }
}

SceneSpec standard_scene() {
  SceneSpec s = base_scene();
  s.name = "standard";
  s.distractors = {
      {{"orange", Shape::kDisk, {245, 150, 20}, 60.0, 70.0, 12.0, 12.0}, 0.0, planar(-1, -1)},
      {{"blue towel", Shape::kRect, {40, 70, 190}, 200.0, 75.0, 18.0, 10.0}, 0.0, planar(1, -1)},
      {{"knife", Shape::kRect, {200, 200, 205}, 130.0, 215.0, 20.0, 4.0}, 0.0, planar(0, 1)},
      {{"green cup", Shape::kDisk, {50, 160, 70}, 40.0, 215.0, 10.0, 10.0}, 0.0, planar(-1, 0)},
      {{"donut", Shape::kDisk, {190, 110, 150}, 225.0, 215.0, 11.0, 11.0}, 0.0,
       planar(1, 1, -150.0)},
  };
  assign_gains(s, {"orange", "blue towel", "donut"});
  return s;
}

SceneSpec background_scene() {
  SceneSpec s = base_scene();
  s.name = "background";
  s.tiles[1].color = {235, 200, 40};
  s.tiles[1].label = "counter";
  s.tiles[1].response = planar(0, 1, -150.0);
  assign_gains(s, {"counter"});
  return s;
}

}  // namespace

SceneSpec builtin_scene(const std::string& name) {
  if (name == "standard") return standard_scene();
  if (name == "clean") return base_scene();
  if (name == "background") return background_scene();
  throw Error(ErrorCode::kSceneError, "unknown built-in scene '" + name + "'");
}

SceneSpec resolve_scene(const std::string& name_or_path) {
  if (name_or_path == "standard" || name_or_path == "clean" || name_or_path == "background") {
    return builtin_scene(name_or_path);
  }
  return load_scene(name_or_path);
}

Image render_background(const SceneSpec& scene) {
  Image img(scene.width, scene.height, scene.table_color);
  for (const auto& t : scene.tiles) paint(img, tile_bitmap(t, scene.width, scene.height), t.color);
  return img;
}

Rendered render(const SceneSpec& scene, std::optional<ObjectPose> pose) {
  scene.validate();
  const int w = scene.width, h = scene.height;
  Rendered out{render_background(scene), {}};
  paint(out.image, item_bitmap(scene.goal, w, h), scene.goal.color);
  std::vector<Bitmap> dist;
  for (const auto& d : scene.distractors) {
    dist.push_back(item_bitmap(d.item, w, h));
    paint(out.image, dist.back(), d.item.color);
  }
  Item obj = scene.task_object;
  if (pose) {
    obj.cx = pose->cx;
    obj.cy = pose->cy;
  }
  const Bitmap obj_bits = item_bitmap(obj, w, h);
  paint(out.image, obj_bits, obj.color);

  // Later distractors occlude earlier ones.
  for (std::size_t i = 0; i < dist.size(); ++i) {
    Bitmap b = dist[i] && !obj_bits;
    for (std::size_t j = i + 1; j < dist.size(); ++j) b = b && !dist[j];
    if (b.any()) out.masks.push_back(make_region(scene.distractors[i].item.label, RegionKind::kObject, b));
  }
  for (std::size_t i = 0; i < scene.tiles.size(); ++i) {
    Bitmap b = tile_footprint(scene, i) && !obj_bits;
    if (b.any()) out.masks.push_back(make_region(scene.tiles[i].label, RegionKind::kBackground, b));
  }
  return out;
}

double distractor_statistic(const Image& image, const Image& reference, const Bitmap& footprint,
                            Rgb task_color) {
  double sum = 0.0;
  long n = 0;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (!footprint(y, x)) continue;
      const Rgb p = image.pixel(x, y);
      if (p == task_color) continue;
      const Rgb r = reference.pixel(x, y);
      sum += std::abs(p.r - r.r) + std::abs(p.g - r.g) + std::abs(p.b - r.b);
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / (3.0 * 255.0 * static_cast<double>(n));
}

double background_statistic(const Image& image, const Bitmap& footprint, Rgb task_color) {
  double s[3] = {0, 0, 0};
  long n = 0;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (!footprint(y, x)) continue;
      const Rgb p = image.pixel(x, y);
      if (p == task_color) continue;
      s[0] += p.r;
      s[1] += p.g;
      s[2] += p.b;
      ++n;
    }
  }
  if (n == 0) return 0.0;
  const double mx = std::max({s[0], s[1], s[2]});
  const double mn = std::min({s[0], s[1], s[2]});
  const double sat = mx <= 0.0 ? 0.0 : (mx - mn) / mx;
  return std::max(0.0, sat - kBackgroundDeadZone);
}

// ---------------------------------------------------------------- SimPolicy

SimPolicy::SimPolicy(SceneSpec scene, int horizon)
    : scene_(std::move(scene)), horizon_(horizon), reference_(render_background(scene_)) {
  if (horizon_ < 0) throw Error(ErrorCode::kDegenerateHorizon, "horizon must be >= 0");
  for (const auto& d : scene_.distractors) {
    distractor_footprints_.push_back(item_bitmap(d.item, scene_.width, scene_.height));
  }
  for (std::size_t i = 0; i < scene_.tiles.size(); ++i) {
    tile_footprints_.push_back(tile_footprint(scene_, i));
  }
}

Action SimPolicy::injected_offset(const Image& image) const {
  Action off = Action::Zero();
  for (std::size_t i = 0; i < scene_.distractors.size(); ++i) {
    const auto& d = scene_.distractors[i];
    if (d.gain == 0.0) continue;
    off += d.gain *
           distractor_statistic(image, reference_, distractor_footprints_[i],
                                scene_.task_object.color) *
           d.response;
  }
  for (std::size_t i = 0; i < scene_.tiles.size(); ++i) {
    const auto& t = scene_.tiles[i];
    if (t.gain == 0.0) continue;
    off += t.gain * background_statistic(image, tile_footprints_[i], scene_.task_object.color) *
           t.response;
  }
  return off;
}

namespace {

struct Located {
  bool found = false;
  double x = 0.0, y = 0.0;  // metres
};

Located centroid(const Image& img, Rgb c, double mpp) {
  double sx = 0, sy = 0;
  long n = 0;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (img.pixel(x, y) == c) {
        sx += x + 0.5;
        sy += y + 0.5;
        ++n;
      }
  if (n == 0) return {};
  return {true, sx / n * mpp, sy / n * mpp};
}

// Bounding-box centre; robust to partial occlusion near the edge.
Located box_centre(const Image& img, Rgb c, double mpp) {
  int x0 = img.width(), x1 = -1, y0 = img.height(), y1 = -1;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      if (img.pixel(x, y) == c) {
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) return {};
  return {true, (x0 + x1 + 1) * 0.5 * mpp, (y0 + y1 + 1) * 0.5 * mpp};
}

}  // namespace

ActionChunk SimPolicy::nominal_chunk(const Image& image, const Proprio& state) const {
  const Dynamics& k = scene_.dynamics;
  const Located obj = centroid(image, scene_.task_object.color, k.meters_per_pixel);
  const Located goal = box_centre(image, scene_.goal.color, k.meters_per_pixel);

  double x = state[0], y = state[1], z = state[2];
  bool closed = state[3] >= 0.5;
  ActionChunk chunk = ActionChunk::Zero(horizon_ + 1, kActionDim);
  auto servo = [&](double tx, double ty, Action& a) {
    double dx = k.servo_gain * (tx - x), dy = k.servo_gain * (ty - y);
    const double n = std::hypot(dx, dy);
    if (n > k.max_step) {
      dx *= k.max_step / n;
      dy *= k.max_step / n;
    }
    a(0) = dx;
    a(1) = dy;
  };
  for (int t = 0; t <= horizon_; ++t) {
    Action a = Action::Zero();
    a(6) = closed ? 0.0 : 1.0;
    if (!closed) {
      if (obj.found) {
        if (std::hypot(obj.x - x, obj.y - y) > k.approach_tolerance) {
          servo(obj.x, obj.y, a);
        } else if (z > k.grasp_z + 1e-9) {
          a(2) = -std::min(k.max_step, z - k.grasp_z);
        } else {
          a(6) = 0.0;
        }
      }
    } else if (z < k.carry_z - 1e-9) {
      a(2) = std::min(k.max_step, k.carry_z - z);
    } else if (goal.found) {
      if (std::hypot(goal.x - x, goal.y - y) > k.approach_tolerance) {
        servo(goal.x, goal.y, a);
      } else {
        a(6) = 1.0;
      }
    }
    chunk.row(t) = a.transpose();
    x += a(0);
    y += a(1);
    z += a(2);
    closed = a(6) < 0.5;
  }
  return chunk;
}

std::vector<ActionChunk> SimPolicy::predict(const PredictRequest& request) {
  if (request.k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (request.image.width() != scene_.width || request.image.height() != scene_.height) {
    throw Error(ErrorCode::kShapeError, "observation size does not match the scene");
  }
  const Dynamics& k = scene_.dynamics;
  const Proprio state = request.context.proprio.value_or(Proprio{k.start_x, k.start_y, k.start_z, 0.0});
  const ActionChunk base = nominal_chunk(request.image, state);
  const Action offset = injected_offset(request.image);

  std::vector<ActionChunk> out;
  out.reserve(static_cast<std::size_t>(request.k));
  for (int s = 0; s < request.k; ++s) {
    CounterRng rng(derive_seed(request.seed, {static_cast<std::uint64_t>(s)}));
    ActionChunk c = base;
    for (int t = 0; t < c.rows(); ++t) {
      c.row(t) += offset.transpose();
      if (k.action_noise > 0.0) {
        for (int i = 0; i < 3; ++i) c(t, i) += rng.normal(0.0, k.action_noise);
      }
      c(t, 6) = std::clamp(c(t, 6), 0.0, 1.0);
    }
    out.push_back(std::move(c));
  }
  return out;
}

// ----------------------------------------------------------- SceneSegmenter

SceneSegmenter::SceneSegmenter(SceneSpec scene, double score)
    : scene_(std::move(scene)), score_(score) {}

std::vector<SegmentMask> SceneSegmenter::segment(const Image& image,
                                                 const std::vector<std::string>& labels,
                                                 double /*box_threshold*/,
                                                 double /*text_threshold*/) {
  if (image.width() != scene_.width || image.height() != scene_.height) {
    throw Error(ErrorCode::kShapeError, "observation size does not match the scene");
  }
  const Bitmap task = color_pixels(image, scene_.task_object.color);
  const int w = scene_.width, h = scene_.height;
  std::vector<SegmentMask> out;
  for (const auto& label : labels) {
    for (std::size_t i = 0; i < scene_.distractors.size(); ++i) {
      if (scene_.distractors[i].item.label != label) continue;
      Bitmap b = item_bitmap(scene_.distractors[i].item, w, h) && !task;
      for (std::size_t j = i + 1; j < scene_.distractors.size(); ++j) {
        b = b && !item_bitmap(scene_.distractors[j].item, w, h);
      }
      if (b.any()) out.push_back({label, score_, rle_encode(b)});
    }
    for (std::size_t i = 0; i < scene_.tiles.size(); ++i) {
      if (scene_.tiles[i].label != label) continue;
      const Bitmap b = tile_footprint(scene_, i) && !task;
      if (b.any()) out.push_back({label, score_, rle_encode(b)});
    }
  }
  return out;
}

ProposalResponse scene_proposal(const SceneSpec& scene) {
  ProposalResponse r;
  for (const auto& d : scene.distractors) r.not_relevant_objects.push_back(d.item.label);
  for (const auto& t : scene.tiles) r.not_relevant_backgrounds.push_back(t.label);
  auto list = [](const std::vector<std::string>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", '" : "'") + v[i] + "'";
    return s + "]";
  };
  r.raw = "The task only needs the " + scene.task_object.label + " and the " + scene.goal.label +
          ".\nnot_relevant_objects: " + list(r.not_relevant_objects) +
          "\nnot_relevant_backgrounds: " + list(r.not_relevant_backgrounds) + "\n";
  return r;
}

// ------------------------------------------------------- ToyAttentionPolicy

namespace {

constexpr int kFeatures = 4;
constexpr double kFeatureScale = 4.0;

Eigen::MatrixXd normal_matrix(CounterRng& rng, int rows, int cols) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

}  // namespace

ToyAttentionPolicy::ToyAttentionPolicy(int heads, int task_tokens, int dim, std::uint64_t seed)
    : heads_(heads), task_tokens_(task_tokens), dim_(dim), seed_(seed) {
  if (heads < 1 || task_tokens < 1 || dim < 1) {
    throw Error(ErrorCode::kInvalidArgument, "toy attention sizes must be positive");
  }
  CounterRng rng(derive_seed(seed, "toy_attention"));
  for (int h = 0; h < heads; ++h) {
    key_proj_.push_back(normal_matrix(rng, dim, kFeatures));
    value_proj_.push_back(normal_matrix(rng, dim, kFeatures));
    readout_.push_back(normal_matrix(rng, dim, 1).col(0));
  }
}

Eigen::MatrixXd ToyAttentionPolicy::patch_features(const Image& image) const {
  if (image.width() % kGrid != 0 || image.height() % kGrid != 0 || image.empty()) {
    throw Error(ErrorCode::kShapeError, "image size must be a multiple of 16");
  }
  const int pw = image.width() / kGrid, ph = image.height() / kGrid;
  Eigen::MatrixXd f(kGrid * kGrid, kFeatures);
  for (int gy = 0; gy < kGrid; ++gy) {
    for (int gx = 0; gx < kGrid; ++gx) {
      double s[3] = {0, 0, 0};
      for (int y = gy * ph; y < (gy + 1) * ph; ++y)
        for (int x = gx * pw; x < (gx + 1) * pw; ++x)
          for (int c = 0; c < 3; ++c) s[c] += image.at(x, y, c);
      const int j = gy * kGrid + gx;
      for (int c = 0; c < 3; ++c) f(j, c) = kFeatureScale * s[c] / (255.0 * pw * ph);
      f(j, 3) = 1.0;
    }
  }
  return f;
}

std::vector<Eigen::MatrixXd> ToyAttentionPolicy::queries(const std::string& instruction) const {
  CounterRng rng(derive_seed(seed_, instruction));
  std::vector<Eigen::MatrixXd> q;
  for (int h = 0; h < heads_; ++h) q.push_back(normal_matrix(rng, task_tokens_, dim_));
  return q;
}

std::vector<Eigen::MatrixXd> ToyAttentionPolicy::full_attention(
    const Image& image, const std::string& instruction) const {
  const Eigen::MatrixXd f = patch_features(image);
  const auto q = queries(instruction);
  std::vector<Eigen::MatrixXd> out;
  for (int h = 0; h < heads_; ++h) {
    Eigen::MatrixXd logits = q[h] * (key_proj_[h] * f.transpose()) / std::sqrt(double(dim_));
    for (int i = 0; i < logits.rows(); ++i) {
      const double mx = logits.row(i).maxCoeff();
      logits.row(i) = (logits.row(i).array() - mx).exp().matrix();
      logits.row(i) /= logits.row(i).sum();
    }
    out.push_back(std::move(logits));
  }
  return out;
}

double ToyAttentionPolicy::loss(const Image& image, const std::string& /*instruction*/,
                                const std::vector<Eigen::MatrixXd>& attention) const {
  const Eigen::MatrixXd f = patch_features(image);
  double l = 0.0;
  for (int h = 0; h < heads_; ++h) {
    const Eigen::MatrixXd v = f * value_proj_[h].transpose();  // J x D
    const Eigen::VectorXd u = attention[h] * (v * readout_[h]);
    l += u.array().tanh().sum();
  }
  return l;
}

std::vector<Eigen::MatrixXd> ToyAttentionPolicy::loss_gradient(
    const Image& image, const std::string& /*instruction*/,
    const std::vector<Eigen::MatrixXd>& attention) const {
  const Eigen::MatrixXd f = patch_features(image);
  std::vector<Eigen::MatrixXd> out;
  for (int h = 0; h < heads_; ++h) {
    const Eigen::VectorXd vr = f * value_proj_[h].transpose() * readout_[h];  // J
    const Eigen::VectorXd u = attention[h] * vr;                               // T
    const Eigen::VectorXd sech2 = 1.0 - u.array().tanh().square();
    out.push_back(sech2 * vr.transpose());
  }
  return out;
}

AttentionTensors ToyAttentionPolicy::attention(const Image& image, const std::string& instruction,
                                               int layer) {
  const auto a = full_attention(image, instruction);
  const auto g = loss_gradient(image, instruction, a);
  const int j = kGrid * kGrid;
  AttentionTensors t{Eigen::MatrixXd(heads_, j), Eigen::MatrixXd(heads_, j), layer};
  for (int h = 0; h < heads_; ++h) {
    t.attention.row(h) = a[h].colwise().mean();
    t.gradient.row(h) = g[h].colwise().mean();
  }
  return t;
}

// -------------------------------------------------------------- Environment

json to_json(const TrajectoryPoint& p) {
  return {{"t", p.t},       {"ee", {p.x, p.y, p.z}},
          {"closed", p.closed}, {"holding", p.holding},
          {"object", {p.object_x, p.object_y}}};
}

TrajectoryPoint trajectory_point_from_json(const json& j) {
  TrajectoryPoint p;
  p.t = j.at("t");
  p.x = j.at("ee").at(0);
  p.y = j.at("ee").at(1);
  p.z = j.at("ee").at(2);
  p.closed = j.at("closed");
  p.holding = j.at("holding");
  p.object_x = j.at("object").at(0);
  p.object_y = j.at("object").at(1);
  return p;
}

Environment::Environment(SceneSpec scene, std::uint64_t seed, double gripper_threshold)
    : scene_(std::move(scene)), gripper_threshold_(gripper_threshold) {
  const Dynamics& k = scene_.dynamics;
  x_ = k.start_x;
  y_ = k.start_y;
  z_ = k.start_z;
  CounterRng rng(derive_seed(seed, "object_offset"));
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double radius = rng.uniform(k.object_offset_min, k.object_offset_max);
  obj_x_ = scene_.task_object.cx * k.meters_per_pixel + radius * std::cos(angle);
  obj_y_ = scene_.task_object.cy * k.meters_per_pixel + radius * std::sin(angle);
  record();
}

void Environment::record() {
  trajectory_.push_back({t_, x_, y_, z_, closed_, holding_, obj_x_, obj_y_});
}

Rendered Environment::observe() const {
  const double mpp = scene_.dynamics.meters_per_pixel;
  return render(scene_, ObjectPose{obj_x_ / mpp, obj_y_ / mpp});
}

Proprio Environment::proprio() const { return {x_, y_, z_, closed_ ? 1.0 : 0.0}; }

void Environment::step(const Action& a) {
  if (done()) return;
  x_ += a(0);
  y_ += a(1);
  z_ = std::clamp(z_ + a(2), 0.0, 0.2);
  const bool cmd_closed = a(6) < gripper_threshold_;
  if (!closed_ && cmd_closed) {
    closed_ = true;
    const Dynamics& k = scene_.dynamics;
    if (std::hypot(x_ - obj_x_, y_ - obj_y_) <= k.grasp_tolerance && z_ <= k.grasp_max_z) {
      holding_ = true;
    }
  } else if (closed_ && !cmd_closed) {
    closed_ = false;
    if (holding_) {
      obj_x_ = x_;
      obj_y_ = y_;
    }
    holding_ = false;
    done_ = true;
  }
  if (holding_) {
    obj_x_ = x_;
    obj_y_ = y_;
  }
  ++t_;
  record();
}

Outcome evaluate_success(const std::vector<TrajectoryPoint>& tr, const SceneSpec& scene) {
  const Dynamics& k = scene.dynamics;
  std::size_t grasp = 0;
  for (std::size_t i = 1; i < tr.size(); ++i) {
    if (tr[i].closed && !tr[i - 1].closed) {
      grasp = i;
      break;
    }
  }
  if (grasp == 0) return {false, "timeout"};
  if (!tr[grasp].holding) {
    const auto& prev = tr[grasp - 1];
    const double d = std::hypot(tr[grasp].x - prev.object_x, tr[grasp].y - prev.object_y);
    return {false, d > k.early_grasp_distance ? "early_grasp" : "missed_approach"};
  }
  bool lifted = false;
  for (std::size_t i = grasp + 1; i < tr.size() && i <= grasp + k.no_lift_steps; ++i) {
    if (tr[i].z - tr[grasp].z >= k.lift_progress) {
      lifted = true;
      break;
    }
  }
  if (!lifted) return {false, "no_lift"};
  for (std::size_t i = grasp + 1; i < tr.size(); ++i) {
    if (!tr[i].closed && tr[i - 1].closed) {
      const double gx = scene.goal.cx * k.meters_per_pixel;
      const double gy = scene.goal.cy * k.meters_per_pixel;
      if (tr[i - 1].holding && std::hypot(tr[i].object_x - gx, tr[i].object_y - gy) <=
                                   k.success_tolerance) {
        return {true, ""};
      }
      return {false, "missed_approach"};
    }
  }
  return {false, "timeout"};
}

// ------------------------------------------------------- fixture generation

double calibrated_gain(const SceneSpec& scene, const std::string& label, double target,
                       int horizon, int blur_kernel, double noise_sigma, std::uint64_t seed) {
  if (horizon <= 0) throw Error(ErrorCode::kDegenerateHorizon, "calibrated_gain needs T_a > 0");
  const Rendered r = render(scene);
  const auto it = std::find_if(r.masks.begin(), r.masks.end(),
                               [&](const RegionMask& m) { return m.label == label; });
  if (it == r.masks.end()) throw Error(ErrorCode::kSceneError, "no region '" + label + "'");

  double ds = 0.0;
  Action response;
  if (it->kind == RegionKind::kObject) {
    const Image reference = render_background(scene);
    const Image blurred = blur_masked(r.image, it->bitmap, blur_kernel);
    ds = std::abs(distractor_statistic(blurred, reference, it->bitmap, scene.task_object.color) -
                  distractor_statistic(r.image, reference, it->bitmap, scene.task_object.color));
    for (const auto& d : scene.distractors)
      if (d.item.label == label) response = d.response;
  } else {
    // Same noise stream a probe with `seed` would draw.
    const std::uint64_t s = derive_seed(derive_seed(seed, label), "perturb");
    const Image noisy = noise_masked(r.image, it->bitmap, noise_sigma, s);
    ds = std::abs(background_statistic(noisy, it->bitmap, scene.task_object.color) -
                  background_statistic(r.image, it->bitmap, scene.task_object.color));
    for (const auto& t : scene.tiles)
      if (t.label == label) response = t.response;
  }
  const double norm = response.head<3>().norm();
  if (ds <= 0.0 || norm <= 0.0) {
    throw Error(ErrorCode::kSceneError, "region '" + label + "' cannot respond to its probe");
  }
  // delta = g * ds * |r| * (T_a + 1) / T_a for identical noise-free chunks.
  return target * horizon / ((horizon + 1) * ds * norm);
}

namespace {

Rgb random_color(CounterRng& rng, double min_sat) {
  for (;;) {
    Rgb c{static_cast<std::uint8_t>(rng.uniform_int(20, 245)),
          static_cast<std::uint8_t>(rng.uniform_int(20, 245)),
          static_cast<std::uint8_t>(rng.uniform_int(20, 245))};
    if (saturation(c) >= min_sat) return c;
  }
}

}  // namespace

GeneratedScene generate_probe_scene(std::uint64_t seed, double tau_object,
                                    double tau_background, int horizon, int blur_kernel,
                                    double noise_sigma, double margin) {
  CounterRng rng(derive_seed(seed, "probe_scene"));
  GeneratedScene g;
  SceneSpec& s = g.scene;
  s = builtin_scene("clean");
  s.name = "probe_" + std::to_string(seed);
  s.dynamics.action_noise = 1e-4;

  // Tiles: top strip and bottom strip, each independently saturated/sensitive.
  s.tiles.clear();
  const char* tile_names[2] = {"wall", "floor mat"};
  const int tile_rows[2][2] = {{0, 35}, {236, 255}};
  for (int i = 0; i < 2; ++i) {
    const bool sensitive = rng.uniform() < 0.5;
    BackgroundTile t;
    t.label = tile_names[i];
    t.color = sensitive ? random_color(rng, 0.6) : random_color(rng, 0.0);
    t.x0 = 0;
    t.x1 = s.width - 1;
    t.y0 = tile_rows[i][0];
    t.y1 = tile_rows[i][1];
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    t.response = planar(std::cos(a), std::sin(a));
    s.tiles.push_back(t);
    (sensitive ? g.sensitive : g.inert).push_back(t.label);
  }

  // Distractors on a jittered grid of slots clear of the task object and goal.
  const double slots[6][2] = {{50, 70},   {128, 70},  {205, 75},
                              {45, 205},  {128, 210}, {210, 205}};
  const char* names[6] = {"orange", "blue towel", "spatula", "green cup", "donut", "knife"};
  const int count = static_cast<int>(rng.uniform_int(3, 6));
  for (int i = 0; i < count; ++i) {
    Distractor d;
    d.item.label = names[i];
    d.item.shape = rng.uniform() < 0.5 ? Shape::kDisk : Shape::kRect;
    d.item.cx = slots[i][0] + rng.uniform(-6.0, 6.0);
    d.item.cy = slots[i][1] + rng.uniform(-4.0, 4.0);
    d.item.half_w = rng.uniform(7.0, 14.0);
    d.item.half_h = d.item.shape == Shape::kDisk ? d.item.half_w : rng.uniform(4.0, 10.0);
    do {
      d.item.color = random_color(rng, 0.3);
    } while (d.item.color == s.task_object.color || d.item.color == s.goal.color);
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    d.response = planar(std::cos(a), std::sin(a));
    s.distractors.push_back(d);
    (rng.uniform() < 0.5 ? g.sensitive : g.inert).push_back(d.item.label);
  }

  auto is_sensitive = [&](const std::string& l) {
    return std::find(g.sensitive.begin(), g.sensitive.end(), l) != g.sensitive.end();
  };
  for (auto& d : s.distractors) {
    if (is_sensitive(d.item.label)) {
      d.gain = calibrated_gain(s, d.item.label, margin * tau_object, horizon, blur_kernel,
                               noise_sigma, 0);
    }
  }
  for (auto& t : s.tiles) {
    if (is_sensitive(t.label)) {
      t.gain = calibrated_gain(s, t.label, margin * tau_background, horizon, blur_kernel,
                               noise_sigma, 0);
    }
  }
  s.validate();
  return g;
}

}  // namespace byovla::testbed
