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

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "byovla/backends/interfaces.hpp"
#include "byovla/config.hpp"
#include "byovla/core.hpp"
#include "byovla/perturb.hpp"
#include "byovla/report.hpp"

namespace byovla {

/// sqrt(sum_i w_i (a_i - b_i)^2).
template <typename DerivedA, typename DerivedB, typename DerivedW>
typename DerivedA::Scalar step_distance(const Eigen::MatrixBase<DerivedA>& a,
                                        const Eigen::MatrixBase<DerivedB>& b,
                                        const Eigen::MatrixBase<DerivedW>& w) {
  using std::sqrt;
  const auto diff = (a.derived().reshaped() - b.derived().reshaped()).eval();
  return sqrt((w.derived().reshaped().array() * diff.array().square()).sum());
}

/// Mean weighted action deviation between paired chunk samples.
///
/// Sums step_distance over all K pairs and all T_a + 1 steps and divides by
/// K * T_a. With `normalized` (or T_a == 0, where K * T_a would vanish) the
/// divisor is K * (T_a + 1) instead.
template <typename Scalar>
Scalar chunk_deviation(std::span<const ActionChunkT<Scalar>> orig,
                       std::span<const ActionChunkT<Scalar>> pert,
                       const WeightVectorT<Scalar>& w, int horizon,
                       bool normalized = false) {
  if (horizon < 0) {
    throw Error(ErrorCode::kDegenerateHorizon, "T_a must be nonnegative");
  }
  if (orig.empty() || orig.size() != pert.size()) {
    throw Error(ErrorCode::kChunkShapeError,
                "chunk sets must be nonempty and paired (" +
                    std::to_string(orig.size()) + " vs " +
                    std::to_string(pert.size()) + ")");
  }
  const Eigen::Index steps = horizon + 1;
  Scalar total(0);
  for (std::size_t k = 0; k < orig.size(); ++k) {
    if (orig[k].rows() != steps || pert[k].rows() != steps) {
      throw Error(ErrorCode::kChunkShapeError,
                  "chunk " + std::to_string(k) + " does not have T_a + 1 steps");
    }
    for (Eigen::Index t = 0; t < steps; ++t) {
      total += step_distance(orig[k].row(t), pert[k].row(t), w);
    }
  }
  const int per_sample = (normalized || horizon == 0) ? horizon + 1 : horizon;
  return total / (static_cast<Scalar>(orig.size()) * static_cast<Scalar>(per_sample));
}

inline double chunk_deviation(const std::vector<ActionChunk>& orig,
                              const std::vector<ActionChunk>& pert,
                              const WeightVector& w, int horizon,
                              bool normalized = false) {
  return chunk_deviation<double>(std::span<const ActionChunk>(orig),
                                 std::span<const ActionChunk>(pert), w, horizon,
                                 normalized);
}

struct ProbeOutcome {
  std::string label;
  RegionKind kind = RegionKind::kObject;
  double delta = 0.0;
  int samples_used = 0;
  int chunk_len = 0;
  std::string perturbation;
};

/// Blur for objects, noise for backgrounds.
PerturbKind perturbation_for(RegionKind kind, const PipelineConfig& cfg);

/// Nominal samples drawn once and shared across regions of one probe.
struct NominalSamples {
  std::vector<ActionChunk> chunks;
};

/// Draws the nominal samples for `obs` (K chunks in KActions mode, one in
/// KObservations mode).
NominalSamples sample_nominal(PolicyBackend& policy, const Image& obs,
                              const TaskContext& ctx, const PipelineConfig& cfg,
                              std::uint64_t seed);

ProbeOutcome probe_region(PolicyBackend& policy, const Image& obs,
                          const TaskContext& ctx, const RegionMask& region,
                          const PipelineConfig& cfg, std::uint64_t seed);

/// Same, reusing previously drawn nominal samples.
ProbeOutcome probe_region(PolicyBackend& policy, const Image& obs,
                          const TaskContext& ctx, const RegionMask& region,
                          const PipelineConfig& cfg, std::uint64_t seed,
                          const NominalSamples& nominal);

SensitivityReport probe_all(PolicyBackend& policy, const Image& obs,
                            const TaskContext& ctx,
                            const std::vector<RegionMask>& regions,
                            const PipelineConfig& cfg, std::uint64_t seed,
                            int probed_at = 0);

/// Odd kernel sizes drawn when sampling K perturbed observations.
inline constexpr int kSampledKernelMin = 15;
inline constexpr int kSampledKernelMax = 30;
int sample_blur_kernel(std::uint64_t seed);

}  // namespace byovla
