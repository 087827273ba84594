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
#include <vector>

#include "byovla/attribution.hpp"
#include "byovla/backends/interfaces.hpp"
#include "byovla/core.hpp"

namespace byovla::testbed {

enum class Shape { kDisk, kRect };

/// Flat-shaded item placed in pixel coordinates. Disks use `half_w` as the
/// radius; rectangles span [cx - half_w, cx + half_w] x [cy - half_h, cy + half_h].
struct Item {
  std::string label;
  Shape shape = Shape::kDisk;
  Rgb color;
  double cx = 0.0;
  double cy = 0.0;
  double half_w = 8.0;
  double half_h = 8.0;

  bool contains(int x, int y) const;
};

/// A distractor item the policy reacts to. The action offset it induces is
/// gain * s * response, where s is the mean absolute deviation of its pixels
/// from the scene's background reference on the [0, 1] scale.
struct Distractor {
  Item item;
  double gain = 0.0;
  Action response = Action::Zero();
};

/// Axis-aligned background patch. The policy reacts to the saturation of its
/// mean colour above `kBackgroundDeadZone`.
struct BackgroundTile {
  std::string label;
  Rgb color;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive pixel bounds
  double gain = 0.0;
  Action response = Action::Zero();

  bool contains(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
};

inline constexpr double kBackgroundDeadZone = 0.25;

/// Episode constants. Success and failure-mode thresholds live here since
/// the underlying criteria are geometric conventions of this testbed.
struct Dynamics {
  double meters_per_pixel = 0.001;
  double start_x = 0.128, start_y = 0.150, start_z = 0.08;
  double carry_z = 0.08;
  double grasp_z = 0.015;
  double max_step = 0.01;
  double servo_gain = 0.5;
  double approach_tolerance = 0.003;
  double grasp_tolerance = 0.01;       // xy distance for a successful grasp
  double grasp_max_z = 0.03;
  double early_grasp_distance = 0.02;  // closing farther than this is early
  double success_tolerance = 0.01;
  int no_lift_steps = 10;
  double lift_progress = 0.005;
  int max_steps = 120;
  double object_offset_min = 0.01;  // per-episode task object displacement
  double object_offset_max = 0.03;
  double action_noise = 1e-4;       // sigma_a on translation (m)
};

struct SceneSpec {
  std::string name = "scene";
  int width = 256;
  int height = 256;
  Rgb table_color{150, 144, 136};
  std::vector<BackgroundTile> tiles;
  Item task_object;
  Item goal;
  std::vector<Distractor> distractors;
  std::string instruction = "place the carrot on yellow plate";
  Dynamics dynamics;

  /// Throws kSceneError when a distractor overlaps the task object or goal,
  /// or gains are negative.
  void validate() const;
  SceneSpec without_distractors() const;
};

nlohmann::json to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const nlohmann::json& j);
SceneSpec load_scene(const std::filesystem::path& path);

/// Built-in fixtures: "standard" (five object distractors, three sensitive),
/// "clean" (standard without distractors), "background" (saturated counter).
SceneSpec builtin_scene(const std::string& name);
/// Path to a scene file, or a built-in name.
SceneSpec resolve_scene(const std::string& name_or_path);

/// Ground-truth layout of a rendered frame.
struct Rendered {
  Image image;
  std::vector<RegionMask> masks;  // distractors (objects) then tiles (backgrounds)
};

/// Task object pose used when rendering; defaults to the scene position.
struct ObjectPose {
  double cx = 0.0;
  double cy = 0.0;
};

Rendered render(const SceneSpec& scene, std::optional<ObjectPose> pose = std::nullopt);

/// Background-only rendering (table and tiles) used as the distractor
/// reference.
Image render_background(const SceneSpec& scene);

/// Mean absolute deviation from the reference over `footprint` pixels that do
/// not show the task object colour; [0, 1] scale, channel-averaged.
double distractor_statistic(const Image& image, const Image& reference,
                            const Bitmap& footprint, Rgb task_color);
/// max(0, saturation(mean colour) - dead zone) over the tile footprint.
double background_statistic(const Image& image, const Bitmap& footprint, Rgb task_color);

/// Proportional servo with injected region sensitivities. Stateless across
/// requests: proprioception arrives with each request.
class SimPolicy : public PolicyBackend {
 public:
  explicit SimPolicy(SceneSpec scene, int horizon = 3);

  std::vector<ActionChunk> predict(const PredictRequest& request) override;

  /// Sum of injected offsets for this image (7-vector, before noise).
  Action injected_offset(const Image& image) const;
  /// Noise-free servo rollout for this image and state.
  ActionChunk nominal_chunk(const Image& image, const Proprio& state) const;

  const SceneSpec& scene() const { return scene_; }
  int horizon() const { return horizon_; }

 private:
  SceneSpec scene_;
  int horizon_;
  Image reference_;
  std::vector<Bitmap> distractor_footprints_;
  std::vector<Bitmap> tile_footprints_;
};

/// Segmenter that answers from the scene layout: distractor and tile masks
/// with task-object pixels of the queried image removed.
class SceneSegmenter : public SegBackend {
 public:
  explicit SceneSegmenter(SceneSpec scene, double score = 0.9);
  std::vector<SegmentMask> segment(const Image& image, const std::vector<std::string>& labels,
                                   double box_threshold, double text_threshold) override;

 private:
  SceneSpec scene_;
  double score_;
};

/// VLM fixture answer derived from a scene: distractor labels as objects,
/// tile labels (plus "wall") as backgrounds, in bracketed-list prose.
ProposalResponse scene_proposal(const SceneSpec& scene);

/// Toy cross-attention model: 16x16 patch features, random key/value
/// projections per head, task-token queries keyed by the instruction, and a
/// scalar readout loss whose gradient w.r.t. the attention weights is closed
/// form.
class ToyAttentionPolicy : public AttnBackend {
 public:
  ToyAttentionPolicy(int heads = 4, int task_tokens = 3, int dim = 8, std::uint64_t seed = 7);

  static constexpr int kGrid = 16;

  /// Full attention per head, T x J.
  std::vector<Eigen::MatrixXd> full_attention(const Image& image,
                                              const std::string& instruction) const;
  /// Loss as a function of the full attention tensor (image fixes values).
  double loss(const Image& image, const std::string& instruction,
              const std::vector<Eigen::MatrixXd>& attention) const;
  /// Closed-form dLoss/dA per head, T x J.
  std::vector<Eigen::MatrixXd> loss_gradient(const Image& image, const std::string& instruction,
                                             const std::vector<Eigen::MatrixXd>& attention) const;

  AttentionTensors attention(const Image& image, const std::string& instruction,
                             int layer) override;

 private:
  Eigen::MatrixXd patch_features(const Image& image) const;  // J x F
  std::vector<Eigen::MatrixXd> queries(const std::string& instruction) const;

  int heads_, task_tokens_, dim_;
  std::vector<Eigen::MatrixXd> key_proj_, value_proj_;  // D x F per head
  std::vector<Eigen::VectorXd> readout_;                 // D per head
  std::uint64_t seed_;
};

/// One control tick of recorded state.
struct TrajectoryPoint {
  int t = 0;
  double x = 0, y = 0, z = 0;
  bool closed = false;
  bool holding = false;
  double object_x = 0, object_y = 0;
};

nlohmann::json to_json(const TrajectoryPoint& p);
TrajectoryPoint trajectory_point_from_json(const nlohmann::json& j);

/// Kinematic pick-and-place world. The gripper closes when the commanded
/// gripper value drops below the threshold.
class Environment {
 public:
  Environment(SceneSpec scene, std::uint64_t seed, double gripper_threshold = 0.7);

  Rendered observe() const;
  Proprio proprio() const;
  void step(const Action& action);
  bool done() const { return done_ || t_ >= scene_.dynamics.max_steps; }
  int t() const { return t_; }
  const SceneSpec& scene() const { return scene_; }
  const std::vector<TrajectoryPoint>& trajectory() const { return trajectory_; }
  /// Task object position after the per-episode displacement (m).
  double object_x() const { return obj_x_; }
  double object_y() const { return obj_y_; }

 private:
  void record();

  SceneSpec scene_;
  double gripper_threshold_;
  double x_, y_, z_;
  double obj_x_, obj_y_;
  bool closed_ = false;
  bool holding_ = false;
  bool done_ = false;
  int t_ = 0;
  std::vector<TrajectoryPoint> trajectory_;
};

struct Outcome {
  bool success = false;
  std::string failure_mode;  // empty on success
};

/// Classifies a trajectory: success when the object is released within
/// success_tolerance of the goal centre; otherwise early_grasp, missed_approach,
/// no_lift or timeout from the first grasp attempt's geometry.
Outcome evaluate_success(const std::vector<TrajectoryPoint>& trajectory, const SceneSpec& scene);

/// Procedural fixture scenes for sensitivity ground truth. Sensitive regions
/// receive gains that put their blur (object) or noise (background) probe
/// response at `margin` times the threshold; inert regions get gain 0.
struct GeneratedScene {
  SceneSpec scene;
  std::vector<std::string> sensitive;
  std::vector<std::string> inert;
};

GeneratedScene generate_probe_scene(std::uint64_t seed, double tau_object, double tau_background,
                                    int horizon, int blur_kernel, double noise_sigma,
                                    double margin = 2.0);

/// Gain such that the probe delta of `label` equals `target` at zero action
/// noise, computed by perturbing the rendered pixels directly.
double calibrated_gain(const SceneSpec& scene, const std::string& label, double target,
                       int horizon, int blur_kernel, double noise_sigma, std::uint64_t seed);

}  // namespace byovla::testbed
