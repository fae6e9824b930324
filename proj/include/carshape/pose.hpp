/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: include/carshape/pose.hpp
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

#include "carshape/geometry.hpp"
#include "carshape/prior.hpp"

#include <optional>
#include <span>
#include <vector>

namespace carshape {

/// One detected 2D keypoint with its detector confidence.
struct KeypointObservation
{
    int index = -1;          // keypoint id into the prior
    Vector2d uv{0.0, 0.0};   // pixels
    double w_cnn = 1.0;      // detector confidence in [0, 1]
    bool visible = true;
};

struct IrlsConfig
{
    double mu0 = 0.7;          // Eq. weight between detector confidence and visibility prior
    double mu1 = 0.5;          // smoothing of the previous weight
    double mu2 = 0.7;          // error term vs. visibility prior inside the update
    int max_iters = 5;
    double weight_floor = 1e-3;
    double v_occ = 0.1;        // visibility prior of an occluded keypoint
    bool literal_error_term = false; // use the raw normalized error instead of (1 - e)

    void validate() const;
};

struct PoseResult
{
    QuatPose pose;
    Eigen::VectorXd weights;    // per keypoint slot, 0 where unobserved
    Eigen::VectorXd residuals;  // reprojection error in pixels, 0 where unobserved
    int iterations = 0;
    double final_cost = 0.0;

    // One weight vector per IRLS iteration including the initial one (not serialized).
    std::vector<Eigen::VectorXd> weight_history;
};

struct PnpOptions
{
    double weight_floor = 0.0;  // observations at or below this weight are excluded
    int lm_max_iters = 60;
    double depth_eps = 1e-6;
    double depth_barrier = 1e4; // per-pixel-residual slope pushing points in front of the camera
    bool multi_start = true;    // refine from the 24 octahedral seeds in addition to `init`
};

/// Initial IRLS weight: mu0 * w_cnn + (1 - mu0) * w_vis, clamped to [floor, 1].
double weight_init(double w_cnn, double w_vis, double mu0, double weight_floor = 1e-3);

/// IRLS weight update: mu1 * w_prev + (1 - mu1) * (mu2 * e + (1 - mu2) * w_vis), clamped.
double weight_update(double w_prev, double e, double w_vis, double mu1, double mu2,
                     double weight_floor = 1e-3);

/**
 * Visibility prior by ray-tracing: 1 where the segment from the camera center
 * to the vertex crosses no mesh face (faces incident to the vertex excluded),
 * v_occ where it does or where the vertex lies behind the camera.
 */
Eigen::VectorXd visibility_prior(const MatrixX3d& shape, const QuadMesh& topology,
                                 const QuatPose& pose, double v_occ = 0.1);

/**
 * Weighted perspective PnP: minimizes sum_i W_i^2 |project(X_i) - uv_i|^2 by
 * damped least-squares refinement over a non-unit quaternion and translation,
 * started from a fixed set of 24 rotation seeds plus the optional init. Zero
 * weights remove observations exactly.
 */
QuatPose pnp_weighted(const MatrixX3d& shape, std::span<const KeypointObservation> obs,
                      const Intrinsics& K, const Eigen::VectorXd& weights,
                      const std::optional<QuatPose>& init = std::nullopt,
                      const PnpOptions& options = {});

/// Objective of pnp_weighted at a given pose (behind-camera guarded).
double pnp_cost(const MatrixX3d& shape, std::span<const KeypointObservation> obs,
                const Intrinsics& K, const Eigen::VectorXd& weights, const QuatPose& pose,
                const PnpOptions& options = {});

/**
 * Robust pose estimation: weighted PnP inside an IRLS loop. Weights start from
 * the detector confidences and the ray-traced visibility prior, and are updated
 * from per-keypoint reprojection errors after every re-solve.
 */
PoseResult irls_pose(const ShapePrior& prior, std::span<const KeypointObservation> obs,
                     const Intrinsics& K, const IrlsConfig& config = {},
                     const std::optional<QuatPose>& init = std::nullopt);

} // namespace carshape
