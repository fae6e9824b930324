/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: include/carshape/shape_adjust.hpp
 *
 * Copyright 2026 The carshape authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "carshape/energy.hpp"
#include "carshape/pose.hpp"
#include "carshape/prior.hpp"

#include <optional>
#include <span>
#include <vector>

namespace carshape {

/// Result of the shape-aware adjustment of one instance.
struct InstanceReconstruction
{
    LatentCoeffs lambda;
    std::vector<Plane> planes;          // one per topology face
    MatrixX3d keypoints3d;              // instantiate(prior, lambda), object frame
    Eigen::VectorXd kp_weights;         // final IRLS weights per keypoint
    EnergyBreakdown energy;             // at the returned state
    EnergyBreakdown energy_initial;     // at the round-0 starting state
    bool diverged = false;

    // Accepted inner-solver costs per IRLS round (not serialized).
    std::vector<std::vector<double>> round_costs;
};

/**
 * Shape-aware adjustment: with the pose held fixed, minimizes E_total over the
 * basis coefficients and the per-face plane parameters, wrapped in
 * config.irls_rounds rounds of IRLS weight updates. Round 0 starts at
 * lambda = 0 with the best-fit planes of the mean shape.
 *
 * `initial_weights` (typically the final weights of the pose stage) overrides
 * the default initialization from detector confidences and the visibility prior.
 */
InstanceReconstruction shape_adjust(const ShapePrior& prior,
                                    std::span<const KeypointObservation> obs,
                                    const QuatPose& pose, const Intrinsics& K,
                                    const EnergyConfig& config = {},
                                    const std::optional<Eigen::VectorXd>& initial_weights =
                                        std::nullopt);

/// Best-fit planes of a shape, one per topology face (the round-0 plane init).
std::vector<Plane> initial_planes(const MatrixX3d& shape, const QuadMesh& topology);

} // namespace carshape
