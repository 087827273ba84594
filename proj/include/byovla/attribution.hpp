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

#include <vector>

#include "byovla/core.hpp"
#include "byovla/report.hpp"

namespace byovla {

/// Cross-attention between task and image tokens, already averaged over task
/// tokens and restricted to one layer. Rows are heads, columns image tokens.
struct AttentionTensors {
  Eigen::MatrixXd attention;  // H x J, entries >= 0
  Eigen::MatrixXd gradient;   // H x J
  int layer = 0;

  Eigen::Index heads() const { return attention.rows(); }
  Eigen::Index tokens() const { return attention.cols(); }
};

/// Throws kShapeError on mismatched shapes, negative attention or non-square J.
void validate(const AttentionTensors& t);

/// Head-averaged gradient-weighted attention, reshaped row-major to a
/// sqrt(J) x sqrt(J) grid.
template <typename DerivedA, typename DerivedG>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic>
gradcam_map(const Eigen::MatrixBase<DerivedA>& attention,
            const Eigen::MatrixBase<DerivedG>& gradient, Eigen::Index side) {
  using Scalar = typename DerivedA::Scalar;
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> weighted =
      gradient.cwiseProduct(attention).colwise().sum() /
      static_cast<Scalar>(attention.rows());
  return weighted.template reshaped<Eigen::RowMajor>(side, side);
}

Eigen::MatrixXd gradcam_map(const AttentionTensors& t);

/// Bilinear resampling with pixel-center alignment and edge clamping.
Eigen::MatrixXd bilinear_resize(const Eigen::MatrixXd& map, int rows, int cols);

/// Gaussian smoothing of a real map (sigma = kernel / 6, edge replication).
/// kernel 1 is the identity.
Eigen::MatrixXd smooth_map(const Eigen::MatrixXd& map, int kernel);

/// Pixels whose smoothed, upsampled score lies in the top `fraction` of the
/// score range: value >= min + (1 - fraction) * (max - min).
/// Throws kFlatAttribution when max == min.
Bitmap attribution_mask(const Eigen::MatrixXd& map, int width, int height,
                        double fraction, int smooth_kernel);

/// Flags a region when at least `overlap_frac` of its pixels are attributed.
/// A flat attribution map flags nothing.
SensitivityReport gradcam_sensitive_regions(const AttentionTensors& t,
                                            const std::vector<RegionMask>& regions,
                                            double overlap_frac, double fraction,
                                            int smooth_kernel);

/// Wire form {"H","J","layer","A","dA"} with row-major flattened matrices.
nlohmann::json to_json(const AttentionTensors& t);
AttentionTensors attention_from_json(const nlohmann::json& j);

}  // namespace byovla
