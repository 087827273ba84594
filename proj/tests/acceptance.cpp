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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//
// Every numeric check compares against an oracle written here, not against
// values the library produced earlier.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "calib_fixture.hpp"
#include "policies.hpp"

#include "byovla/attribution.hpp"
#include "byovla/backends/client.hpp"
#include "byovla/backends/registry.hpp"
#include "byovla/calibrate.hpp"
#include "byovla/config.hpp"
#include "byovla/mask.hpp"
#include "byovla/orchestrator.hpp"
#include "byovla/sensitivity.hpp"
#include "byovla/testbed.hpp"

using namespace byovla;
using namespace byovla::test;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

// Runs `body`; an escaped exception fails the criterion with its message.
void criterion(const std::string& name, const std::function<bool(std::string&)>& body) {
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail += std::string(detail.empty() ? "" : "; ") + "threw: " + e.what();
    ok = false;
  }
  report(name, ok, detail);
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag)
      : path_(fs::temp_directory_path() /
              ("byovla_accept_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// Every regular file under `a` has a byte-identical twin under `b`, and the
// two trees list the same files.
bool same_tree(const fs::path& a, const fs::path& b, std::size_t* files) {
  std::set<std::string> la, lb;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) la.insert(fs::relative(e.path(), a).string());
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) lb.insert(fs::relative(e.path(), b).string());
  if (la != lb) return false;
  for (const auto& rel : la)
    if (slurp(a / rel) != slurp(b / rel)) return false;
  *files = la.size();
  return true;
}

TaskContext start_context(const testbed::SceneSpec& s) {
  const auto& d = s.dynamics;
  return {s.instruction, Proprio{d.start_x, d.start_y, d.start_z, 0.0}};
}

// ------------------------------------------------------------------ oracles

// Weighted step distances summed over every sample and step, one scalar at a
// time, divided by K * T_a (or K * (T_a + 1) when normalised or T_a = 0).
double deviation_oracle(const std::vector<ActionChunk>& a, const std::vector<ActionChunk>& b,
                        const WeightVector& w, int horizon, bool normalized) {
  double total = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (int t = 0; t <= horizon; ++t) {
      double sq = 0.0;
      for (int i = 0; i < kActionDim; ++i) {
        const double d = a[k](t, i) - b[k](t, i);
        sq += w(i) * d * d;
      }
      total += std::sqrt(sq);
    }
  const int per = (normalized || horizon == 0) ? horizon + 1 : horizon;
  return total / (static_cast<double>(a.size()) * per);
}

Eigen::MatrixXd gradcam_oracle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& g) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(a.cols()))));
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(side, side);
  for (int h = 0; h < a.rows(); ++h)
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) out(r, c) += g(h, r * side + c) * a(h, r * side + c);
  return out / static_cast<double>(a.rows());
}

// Sort, then interpolate at rank (n - 1) q.
double quantile_oracle(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double rank = (v.size() - 1) * q;
  const std::size_t lo = static_cast<std::size_t>(rank);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (rank - lo) * (v[lo + 1] - v[lo]);
}

// Chebyshev dilation by brute force over the square neighbourhood.
Bitmap dilate_oracle(const Bitmap& m, int r) {
  Bitmap out = Bitmap::Constant(m.rows(), m.cols(), false);
  for (Eigen::Index y = 0; y < m.rows(); ++y)
    for (Eigen::Index x = 0; x < m.cols(); ++x) {
      if (!m(y, x)) continue;
      for (Eigen::Index yy = std::max<Eigen::Index>(0, y - r); yy <= std::min(m.rows() - 1, y + r); ++yy)
        for (Eigen::Index xx = std::max<Eigen::Index>(0, x - r); xx <= std::min(m.cols() - 1, x + r);
             ++xx)
          out(yy, xx) = true;
    }
  return out;
}

Bitmap random_bits(std::mt19937_64& gen, int w, int h, double p) {
  std::bernoulli_distribution coin(p);
  Bitmap b(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) b(y, x) = coin(gen);
  return b;
}

// ---------------------------------------------------------------- criteria

bool deviation_criterion(std::string& detail) {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> kd(1, 5), td(0, 4);
  std::uniform_real_distribution<double> val(-0.05, 0.05), wd(0.0, 2.0);
  std::bernoulli_distribution coin(0.5);
  double worst = 0.0;
  const auto t0 = Clock::now();
  for (int n = 0; n < 1000; ++n) {
    const int k = kd(gen), horizon = td(gen);
    const bool normalized = coin(gen);
    std::vector<ActionChunk> a, b;
    for (int i = 0; i < k; ++i) {
      ActionChunk x(horizon + 1, kActionDim), y(horizon + 1, kActionDim);
      for (int t = 0; t <= horizon; ++t)
        for (int j = 0; j < kActionDim; ++j) {
          x(t, j) = val(gen);
          y(t, j) = val(gen);
        }
      a.push_back(x);
      b.push_back(y);
    }
    WeightVector w;
    for (int j = 0; j < kActionDim; ++j) w(j) = wd(gen);
    const double got = chunk_deviation(a, b, w, horizon, normalized);
    const double want = deviation_oracle(a, b, w, horizon, normalized);
    worst = std::max(worst, std::abs(got - want) / std::max(std::abs(want), 1e-300));
  }
  // Wall time covers generation and the oracle too.
  const double busy = seconds_since(t0);
  detail = "1000 instances, max rel err " + fmt("%.3g", worst) + ", " + fmt("%.4f s", busy);
  return worst <= 1e-12 && busy < 1.0;
}

bool gradcam_criterion(std::string& detail) {
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> ua(0.0, 1.0), ug(-1.0, 1.0);
  double worst_map = 0.0;
  for (int n = 0; n < 20; ++n) {
    Eigen::MatrixXd a(12, 256), g(12, 256);
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 256; ++j) {
        a(i, j) = ua(gen);
        g(i, j) = ug(gen);
      }
    AttentionTensors t;
    t.attention = a;
    t.gradient = g;
    const Eigen::MatrixXd want = gradcam_oracle(a, g);
    const double err = (gradcam_map(t) - want).cwiseAbs().maxCoeff() / want.cwiseAbs().maxCoeff();
    worst_map = std::max(worst_map, err);
  }

  testbed::ToyAttentionPolicy toy;
  const testbed::SceneSpec scene = testbed::builtin_scene("standard");
  const Image img = testbed::render(scene).image;
  const auto att = toy.full_attention(img, scene.instruction);
  const auto grad = toy.loss_gradient(img, scene.instruction, att);
  double worst_fd = 0.0;
  const double h = 1e-4;
  for (std::size_t head = 0; head < att.size(); ++head)
    for (Eigen::Index i = 0; i < att[head].rows(); ++i)
      for (Eigen::Index j = 0; j < att[head].cols(); ++j) {
        auto plus = att, minus = att;
        plus[head](i, j) += h;
        minus[head](i, j) -= h;
        const double fd = (toy.loss(img, scene.instruction, plus) -
                           toy.loss(img, scene.instruction, minus)) /
                          (2 * h);
        const double an = grad[head](i, j);
        const double scale = std::max(std::abs(an), std::abs(fd));
        if (scale < 1e-8) continue;
        worst_fd = std::max(worst_fd, std::abs(an - fd) / scale);
      }
  detail = "map max rel err " + fmt("%.3g", worst_map) + " (H=12, J=256), FD max rel err " +
           fmt("%.3g", worst_fd);
  return worst_map <= 1e-12 && worst_fd <= 1e-4;
}

double engineered_tau(const std::vector<double>& deltas, std::vector<double>* got) {
  Fixture f = engineered(deltas);
  std::map<std::string, PolicyBackend*> by_id;
  for (std::size_t i = 0; i < f.dataset.size(); ++i) by_id[f.dataset[i].id] = f.policies[i].get();
  PipelineConfig cfg;
  cfg.samples = 1;
  cfg.horizon = 1;
  const CalibrationReport r = calibrate_threshold(
      [&](const CalibrationEnvironment& env) -> PolicyBackend& { return *by_id.at(env.id); },
      f.dataset, cfg, RegionKind::kObject, 1);
  for (const auto& s : r.samples) got->push_back(s.delta);
  return r.tau;
}

bool quartile_criterion(std::string& detail) {
  // The literal fixture: one to eight millimetres.
  std::vector<double> one_to_eight{0.001, 0.002, 0.003, 0.004, 0.005, 0.006, 0.007, 0.008};
  std::vector<double> measured;
  const double tau_literal = engineered_tau(one_to_eight, &measured);
  const double oracle_literal = quantile_oracle(measured, 0.75);
  const bool literal_oracle = measured == one_to_eight && tau_literal == oracle_literal;
  const bool literal_value = std::abs(tau_literal - 0.0085) <= 1e-15;

  // The eight-value list whose third quartile is 0.0085.
  std::vector<double> spread{0.001, 0.002, 0.003, 0.004, 0.006, 0.008, 0.010, 0.012};
  std::vector<double> measured2;
  const double tau_spread = engineered_tau(spread, &measured2);
  const bool spread_ok = tau_spread == quantile_oracle(measured2, 0.75) &&
                         std::abs(tau_spread - 0.0085) <= 1e-15;

  const PipelineConfig defaults;
  const bool defaults_ok = defaults.tau_object == 0.002 && defaults.tau_background == 0.001;

  detail = "{1..8} mm -> " + fmt("%.6g", tau_literal) + " (oracle " + fmt("%.6g", oracle_literal) +
           ", required 0.0085" + (literal_value ? "" : ", unattainable: rank 5.25 lies between 6 and 7 mm") +
           "); {1,2,3,4,6,8,10,12} mm -> " + fmt("%.6g", tau_spread) + "; defaults " +
           fmt("%g", defaults.tau_object) + "/" + fmt("%g", defaults.tau_background);
  return literal_oracle && literal_value && spread_ok && defaults_ok;
}

bool probe_criterion(std::string& detail) {
  const PipelineConfig cfg;
  const double margin = 2.0;
  double worst_scene = 1.0;
  int false_flags = 0, zero_gain_probes = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const testbed::GeneratedScene g = testbed::generate_probe_scene(
        s, cfg.tau_object, cfg.tau_background, cfg.horizon, cfg.blur_kernel, cfg.noise_sigma, margin);
    const std::set<std::string> truth(g.sensitive.begin(), g.sensitive.end());
    testbed::SimPolicy sim(g.scene, cfg.horizon);
    const testbed::Rendered r = testbed::render(g.scene);
    int agree = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const SensitivityReport rep = probe_all(sim, r.image, start_context(g.scene), r.masks, cfg, seed);
      for (const auto& e : rep.entries) {
        agree += e.sensitive == (truth.count(e.label) > 0);
        ++total;
      }
    }
    worst_scene = std::min(worst_scene, static_cast<double>(agree) / total);

    // Exactness at zero action noise on the zero-gain regions.
    testbed::SceneSpec quiet = g.scene;
    quiet.dynamics.action_noise = 0.0;
    testbed::SimPolicy still(quiet, cfg.horizon);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const SensitivityReport rep = probe_all(still, r.image, start_context(quiet), r.masks, cfg, seed);
      for (const auto& e : rep.entries) {
        if (truth.count(e.label)) continue;
        ++zero_gain_probes;
        false_flags += e.sensitive || e.score != 0.0;
      }
    }
  }
  detail = "20 scenes x 100 seeds, worst per-scene agreement " + fmt("%.4f", worst_scene) +
           " (margin " + fmt("%.1f", margin) + " tau); zero-gain probes at sigma_a=0: " +
           std::to_string(zero_gain_probes) + ", false flags " + std::to_string(false_flags);
  return worst_scene >= 0.95 && false_flags == 0 && zero_gain_probes > 0;
}

struct RecoveryRuns {
  std::vector<EpisodeLog> raw_clean, raw_cluttered, byovla, nosens;
  double seconds = 0.0;
};

int successes(const std::vector<EpisodeLog>& logs) {
  int n = 0;
  for (const auto& l : logs) n += l.success;
  return n;
}

RecoveryRuns run_recovery() {
  RecoveryRuns r;
  const PipelineConfig cfg;
  const testbed::SceneSpec cluttered = testbed::builtin_scene("standard");
  const testbed::SceneSpec clean = testbed::builtin_scene("clean");
  const auto t0 = Clock::now();
  for (int n = 0; n < 50; ++n) {
    const std::uint64_t seed = episode_seed(1, n);
    BackendSet a = make_stub_backends(clean, cfg), b = make_stub_backends(cluttered, cfg);
    BackendSet c = make_stub_backends(cluttered, cfg), d = make_stub_backends(cluttered, cfg);
    r.raw_clean.push_back(run_episode(a.view(), clean, cfg, Method::kRaw, seed, n));
    r.raw_cluttered.push_back(run_episode(b.view(), cluttered, cfg, Method::kRaw, seed, n));
    r.byovla.push_back(run_episode(c.view(), cluttered, cfg, Method::kByovla, seed, n));
    r.nosens.push_back(run_episode(d.view(), cluttered, cfg, Method::kNoSens, seed, n));
  }
  r.seconds = seconds_since(t0);
  return r;
}

// Pixels outside the dilated sensitive masks must not move.
bool minimality_criterion(const RecoveryRuns& runs, std::string& detail) {
  const PipelineConfig cfg;
  std::size_t frames = 0, pixels = 0, violations = 0;
  auto check = [&](const std::vector<EpisodeLog>& logs) {
    for (const auto& log : logs)
      for (const auto& s : log.steps) {
        ++frames;
        const int w = s.raw.width(), h = s.raw.height();
        Bitmap allowed = Bitmap::Constant(h, w, false);
        if (s.report) {
          for (const auto& region : s.regions) {
            const SensitivityEntry* e = s.report->find(region.label);
            if (e == nullptr || !e->sensitive) continue;
            allowed = allowed || (region.kind == RegionKind::kObject
                                      ? dilate_oracle(region.bitmap, cfg.dilation_radius)
                                      : region.bitmap);
          }
        }
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            if (allowed(y, x)) continue;
            ++pixels;
            violations += !(s.raw.pixel(x, y) == s.edited.pixel(x, y));
          }
      }
  };
  check(runs.byovla);
  check(runs.nosens);
  check(runs.raw_cluttered);

  // The background scene exercises recolouring.
  const testbed::SceneSpec bg = testbed::builtin_scene("background");
  std::vector<EpisodeLog> bg_logs;
  for (int n = 0; n < 5; ++n) {
    BackendSet set = make_stub_backends(bg, cfg);
    bg_logs.push_back(run_episode(set.view(), bg, cfg, Method::kByovla, episode_seed(3, n), n));
  }
  check(bg_logs);
  detail = std::to_string(frames) + " logged frames, " + std::to_string(pixels) +
           " protected pixels, " + std::to_string(violations) + " changed";
  return violations == 0 && frames > 0;
}

bool recovery_criterion(const RecoveryRuns& r, std::string& detail) {
  const double clean = successes(r.raw_clean) * 2.0;  // percent of 50
  const double raw = successes(r.raw_cluttered) * 2.0;
  const double by = successes(r.byovla) * 2.0;
  // Strictly larger on every seed, not just overall.
  bool superset = true;
  for (std::size_t i = 0; i < r.byovla.size(); ++i) {
    std::set<std::string> a, b;
    for (const auto& s : r.byovla[i].steps)
      for (const auto& rec : s.interventions) a.insert(rec.region);
    for (const auto& s : r.nosens[i].steps)
      for (const auto& rec : s.interventions) b.insert(rec.region);
    superset = superset && b.size() > a.size() && std::includes(b.begin(), b.end(), a.begin(), a.end());
  }
  detail = "Raw(clean) " + fmt("%.0f%%", clean) + ", Raw(distractors) " + fmt("%.0f%%", raw) +
           ", BYOVLA(distractors) " + fmt("%.0f%%", by) + ", NoSens " +
           fmt("%.0f%%", successes(r.nosens) * 2.0) + "; NoSens strict superset on every seed: " +
           (superset ? "yes" : "no") + "; " + fmt("%.1f s", r.seconds);
  return clean - by <= 10.0 && clean - raw >= 30.0 && superset && r.seconds < 300.0;
}

bool determinism_criterion(std::string& detail) {
  const PipelineConfig cfg;
  ScratchDir dir("determinism");
  for (int run = 0; run < 2; ++run) {
    const fs::path root = dir.path() / ("run" + std::to_string(run));
    for (const char* name : {"standard", "background"}) {
      const testbed::SceneSpec scene = testbed::builtin_scene(name);
      for (Method m : {Method::kByovla, Method::kNoSens, Method::kGradCam}) {
        for (int n = 0; n < 2; ++n) {
          BackendSet set = make_stub_backends(scene, cfg);
          write_episode(root / name / std::string(to_string(m)) / std::to_string(n),
                        run_episode(set.view(), scene, cfg, m, episode_seed(11, n), n));
        }
      }
      testbed::SimPolicy sim(scene, cfg.horizon);
      const auto r = testbed::render(scene);
      std::ofstream(root / (std::string(name) + "_probe.json"))
          << to_json(probe_all(sim, r.image, start_context(scene), r.masks, cfg, 5)).dump(2);
    }
  }
  std::size_t files = 0;
  const bool same = same_tree(dir.path() / "run0", dir.path() / "run1", &files);
  detail = std::to_string(files) + " files (logs, frames, probe reports) compared byte for byte";
  return same && files > 0;
}

bool protocol_criterion(std::string& detail) {
  const PipelineConfig cfg;
  const testbed::SceneSpec scene = testbed::builtin_scene("standard");
  const auto r = testbed::render(scene);
  testbed::SimPolicy direct(scene, cfg.horizon);
  const PredictRequest req{r.image, start_context(scene), 2, 5};

  int typed = 0, recovered = 0;
  const std::vector<std::string> faults{"garbage", "wrong_id", "bad_k", "bad_version"};
  for (const auto& fault : faults) {
    RemotePolicy remote(
        std::make_shared<Client>("policy", std::make_unique<SubprocessTransport>(
                                               std::vector<std::string>{BYOVLA_STUB_SERVER, "--fault",
                                                                        fault, "--fault-on", "1"},
                                               10000)),
        cfg.chunk_length());
    try {
      remote.predict(req);
    } catch (const ProtocolError&) {
      ++typed;
    } catch (const std::exception&) {
    }
    recovered += remote.predict(req) == direct.predict(req);
  }

  // Record an episode through the protocol, then replay it.
  ScratchDir dir("replay");
  const json live_spec{{"scene", "standard"},
                       {"policy", {{"transport", "loopback"}}},
                       {"vlm", {{"transport", "loopback"}}},
                       {"seg", {{"transport", "loopback"}}},
                       {"inpaint", {{"transport", "loopback"}}},
                       {"attn", {{"transport", "loopback"}}}};
  BackendSet live = make_backends(live_spec, cfg);
  const EpisodeLog recorded = run_episode(live.view(), scene, cfg, Method::kByovla, 21);
  live.transcript->save(dir.path() / "transcript.jsonl");
  write_episode(dir.path() / "live", recorded);

  json replay_spec = live_spec;
  replay_spec["replay"] = (dir.path() / "transcript.jsonl").string();
  BackendSet replay = make_backends(replay_spec, cfg);
  const EpisodeLog replayed = run_episode(replay.view(), scene, cfg, Method::kByovla, 21);
  write_episode(dir.path() / "replay", replayed);
  std::size_t files = 0;
  const bool identical = same_tree(dir.path() / "live", dir.path() / "replay", &files) &&
                         recorded.aborted.empty() && replayed.aborted.empty();

  detail = std::to_string(typed) + "/" + std::to_string(faults.size()) +
           " malformed responses raised ProtocolError, " + std::to_string(recovered) + "/" +
           std::to_string(faults.size()) + " next calls correct; replay of " +
           std::to_string(live.transcript->size()) + " exchanges reproduced " +
           std::to_string(files) + " files " + (identical ? "bit-exactly" : "with differences");
  return typed == static_cast<int>(faults.size()) && recovered == static_cast<int>(faults.size()) &&
         identical;
}

bool rle_criterion(std::string& detail) {
  std::mt19937_64 gen(99);
  std::uniform_int_distribution<int> dim(1, 40);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  int round_trips = 0;
  for (int n = 0; n < 10000; ++n) {
    const Bitmap m = random_bits(gen, dim(gen), dim(gen), density(gen));
    const RLESpec spec = rle_encode(m);
    round_trips += (rle_decode(spec) == m).all() && rle_from_json(to_json(spec)) == spec;
  }

  // Dilation: oracle agreement, extensivity, monotonicity in the mask and in
  // the radius, and composition of radii.
  int dilation_ok = 0, dilation_cases = 0;
  std::uniform_int_distribution<int> rad(0, 4);
  for (int n = 0; n < 300; ++n) {
    const int w = dim(gen), h = dim(gen);
    const Bitmap a = random_bits(gen, w, h, 0.05);
    const Bitmap b = a || random_bits(gen, w, h, 0.05);  // a is a subset of b
    const int r = rad(gen), s = rad(gen);
    const Bitmap da = dilate(a, r), db = dilate(b, r);
    bool ok = (da == dilate_oracle(a, r)).all();
    ok = ok && (a && !da).count() == 0;
    ok = ok && (da && !db).count() == 0;
    ok = ok && (da && !dilate(a, r + 1)).count() == 0;
    ok = ok && (dilate(da, s) == dilate(a, r + s)).all();
    ok = ok && (dilate(a, 0) == a).all();
    dilation_ok += ok;
    ++dilation_cases;
  }
  detail = std::to_string(round_trips) + "/10000 RLE round trips; " + std::to_string(dilation_ok) + "/" +
           std::to_string(dilation_cases) + " dilation property cases";
  return round_trips == 10000 && dilation_ok == dilation_cases;
}

}  // namespace

int main() {
  criterion("chunk-deviation-oracle", deviation_criterion);
  criterion("gradcam-oracle", gradcam_criterion);
  criterion("quartile-calibration", quartile_criterion);
  criterion("probe-ground-truth", probe_criterion);

  RecoveryRuns runs;
  std::string run_error;
  try {
    runs = run_recovery();
  } catch (const std::exception& e) {
    run_error = e.what();
  }
  criterion("minimality", [&](std::string& d) {
    if (!run_error.empty()) throw std::runtime_error(run_error);
    return minimality_criterion(runs, d);
  });
  criterion("recovery", [&](std::string& d) {
    if (!run_error.empty()) throw std::runtime_error(run_error);
    return recovery_criterion(runs, d);
  });
  criterion("determinism", determinism_criterion);
  criterion("protocol-robustness", protocol_criterion);
  criterion("rle-and-dilation", rle_criterion);

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
