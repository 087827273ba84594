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

#include "byovla/sensitivity.hpp"

#include <future>

#include "byovla/rng.hpp"

namespace byovla {

namespace {

std::vector<ActionChunk> checked_predict(PolicyBackend& policy, PredictRequest request,
                                         const PipelineConfig& cfg,
                                         const std::string& context) {
  std::vector<ActionChunk> chunks;
  try {
    chunks = policy.predict(request);
  } catch (const BackendUnavailable& e) {
    throw BackendUnavailable(context, context + ": " + e.what());
  }
  if (static_cast<int>(chunks.size()) != request.k) {
    throw Error(ErrorCode::kChunkShapeError,
                context + ": policy returned " + std::to_string(chunks.size()) +
                    " chunks, expected " + std::to_string(request.k));
  }
  for (const auto& c : chunks) {
    if (c.rows() != cfg.chunk_length()) {
      throw Error(ErrorCode::kChunkShapeError,
                  context + ": policy chunk has " + std::to_string(c.rows()) +
                      " steps, expected T_a + 1 = " + std::to_string(cfg.chunk_length()));
    }
    validate_chunk(c);
  }
  return chunks;
}

}  // namespace

PerturbKind perturbation_for(RegionKind kind, const PipelineConfig& cfg) {
  if (kind == RegionKind::kObject) return BlurPerturbation{cfg.blur_kernel};
  return NoisePerturbation{cfg.noise_sigma};
}

int sample_blur_kernel(std::uint64_t seed) {
  CounterRng rng(derive_seed(seed, "kernel"));
  // Odd sizes in [15, 30]: 15, 17, ..., 29.
  const int slots = (kSampledKernelMax - kSampledKernelMin) / 2 + 1;
  return kSampledKernelMin + 2 * static_cast<int>(rng.uniform_int(0, slots - 1));
}

NominalSamples sample_nominal(PolicyBackend& policy, const Image& obs,
                              const TaskContext& ctx, const PipelineConfig& cfg,
                              std::uint64_t seed) {
  const int k = cfg.sample_mode == SampleMode::kKActions ? cfg.samples : 1;
  PredictRequest req{obs, ctx, k, derive_seed(seed, "nominal")};
  return {checked_predict(policy, std::move(req), cfg, "nominal")};
}

ProbeOutcome probe_region(PolicyBackend& policy, const Image& obs,
                          const TaskContext& ctx, const RegionMask& region,
                          const PipelineConfig& cfg, std::uint64_t seed) {
  return probe_region(policy, obs, ctx, region, cfg, seed,
                      sample_nominal(policy, obs, ctx, cfg, seed));
}

ProbeOutcome probe_region(PolicyBackend& policy, const Image& obs,
                          const TaskContext& ctx, const RegionMask& region,
                          const PipelineConfig& cfg, std::uint64_t seed,
                          const NominalSamples& nominal) {
  validate_region(region, &obs);
  const std::uint64_t region_seed = derive_seed(seed, region.label);
  const PerturbKind kind = perturbation_for(region.kind, cfg);

  ProbeOutcome out{region.label, region.kind, 0.0, cfg.samples, cfg.chunk_length(),
                   describe(kind)};

  std::vector<ActionChunk> orig;
  std::vector<ActionChunk> pert;
  if (cfg.sample_mode == SampleMode::kKActions) {
    const Image perturbed =
        apply_perturbation(obs, region.bitmap, kind, derive_seed(region_seed, "perturb"));
    PredictRequest req{perturbed, ctx, cfg.samples, derive_seed(region_seed, "policy")};
    pert = checked_predict(policy, std::move(req), cfg, region.label);
    orig = nominal.chunks;
    if (static_cast<int>(orig.size()) != cfg.samples) {
      throw Error(ErrorCode::kChunkShapeError, "nominal sample count differs from K");
    }
  } else {
    if (nominal.chunks.size() != 1) {
      throw Error(ErrorCode::kChunkShapeError, "expected one nominal chunk");
    }
    PerturbKind sampled = kind;
    std::string descriptor = std::holds_alternative<BlurPerturbation>(kind)
                                 ? "blur:sampled["
                                 : describe(kind) + "[";
    for (int k = 0; k < cfg.samples; ++k) {
      const std::uint64_t sample_seed = derive_seed(region_seed, {static_cast<std::uint64_t>(k)});
      if (std::holds_alternative<BlurPerturbation>(kind)) {
        const int kernel = sample_blur_kernel(sample_seed);
        sampled = BlurPerturbation{kernel};
        descriptor += (k ? "," : "") + std::to_string(kernel);
      } else {
        descriptor += (k ? "," : "") + std::to_string(k);
      }
      const Image perturbed = apply_perturbation(obs, region.bitmap, sampled,
                                                 derive_seed(sample_seed, "perturb"));
      PredictRequest req{perturbed, ctx, 1, derive_seed(sample_seed, "policy")};
      auto chunk = checked_predict(policy, std::move(req), cfg, region.label);
      pert.push_back(std::move(chunk.front()));
      orig.push_back(nominal.chunks.front());
    }
    out.perturbation = descriptor + "]";
  }
  out.delta = chunk_deviation(orig, pert, cfg.weights, cfg.horizon,
                              cfg.normalized_deviation);
  return out;
}

SensitivityReport probe_all(PolicyBackend& policy, const Image& obs,
                            const TaskContext& ctx,
                            const std::vector<RegionMask>& regions,
                            const PipelineConfig& cfg, std::uint64_t seed,
                            int probed_at) {
  SensitivityReport report;
  report.probed_at = probed_at;
  if (regions.empty()) return report;

  const NominalSamples nominal = sample_nominal(policy, obs, ctx, cfg, seed);
  std::vector<ProbeOutcome> outcomes(regions.size());
  if (cfg.max_in_flight <= 1) {
    for (std::size_t i = 0; i < regions.size(); ++i) {
      outcomes[i] = probe_region(policy, obs, ctx, regions[i], cfg, seed, nominal);
    }
  } else {
    // Batches of at most max_in_flight; results land in region order.
    const std::size_t batch = static_cast<std::size_t>(cfg.max_in_flight);
    for (std::size_t start = 0; start < regions.size(); start += batch) {
      std::vector<std::future<ProbeOutcome>> inflight;
      const std::size_t end = std::min(regions.size(), start + batch);
      for (std::size_t i = start; i < end; ++i) {
        inflight.push_back(std::async(std::launch::async, [&, i] {
          return probe_region(policy, obs, ctx, regions[i], cfg, seed, nominal);
        }));
      }
      for (std::size_t i = start; i < end; ++i) outcomes[i] = inflight[i - start].get();
    }
  }
  for (const auto& o : outcomes) {
    report.entries.push_back(
        make_entry(o.label, o.kind, o.delta, cfg.threshold(o.kind), o.perturbation));
  }
  return report;
}

}  // namespace byovla
