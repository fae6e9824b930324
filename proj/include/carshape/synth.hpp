/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: include/carshape/synth.hpp
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
#include "carshape/pose.hpp"
#include "carshape/prior.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace carshape {

/**
 * Synthetic data generator configuration. Fully deterministic for a given
 * seed: coefficients are drawn per the learning model (standard normal in the
 * whitened coordinates, i.e. lambda_j = sqrt(eigenvalue_j) * z_j), poses are
 * sampled within the stated bounds, observations are corrupted by Gaussian
 * pixel noise, gross outliers and occlusions.
 */
struct SynthConfig
{
    int instance_count = 200;
    double pixel_noise_sigma = 0.0;  // px
    double outlier_fraction = 0.0;   // fraction of keypoints per instance
    double outlier_magnitude = 80.0; // px
    double occlusion_fraction = 0.0;
    std::uint64_t seed = 0;

    // pose distribution bounds
    double azimuth_min_deg = 0.0, azimuth_max_deg = 360.0;
    double elevation_min_deg = -5.0, elevation_max_deg = 15.0;
    double depth_min = 8.0, depth_max = 25.0; // meters
    double lateral_frac = 0.25;  // |x| <= frac * depth
    double vertical_frac = 0.10; // |y| <= frac * depth

    enum class Projection
    {
        perspective, // pinhole with `intrinsics`; occlusion by ray-tracing
        orthographic // scaled orthographic; occlusion masked at random
    };
    Projection projection = Projection::perspective;
    Intrinsics intrinsics{720.0, 720.0, 620.0, 180.0, 0.0};
    double ortho_scale_min = 40.0, ortho_scale_max = 120.0; // px per meter

    double w_cnn_min = 0.75, w_cnn_max = 1.0; // confidence of visible detections
    double occluded_w_cnn = 0.3;
    double occluded_extra_sigma = 6.0; // additional px noise on occluded detections

    // perturbation of the provided initialization pose
    double init_azimuth_jitter_deg = 35.0;
    double init_translation_jitter = 1.0;

    int max_retries = 20;
    int min_visible = 4;

    void validate() const;
};

struct SynthInstance
{
    std::string id;
    QuatPose gt_pose;       // perspective mode
    QuatPose init_pose;     // perturbed initialization (perspective mode)
    OrthoCam gt_ortho;      // orthographic mode
    LatentCoeffs gt_lambda;
    MatrixX3d gt_shape;     // object frame
    std::vector<KeypointObservation> observations; // one per keypoint slot
    std::vector<bool> outlier;
    std::vector<bool> occluded;
};

struct SynthDataset
{
    ShapePrior prior;
    SynthConfig config;
    std::vector<SynthInstance> instances;
};

SynthDataset synth_generate(const ShapePrior& prior, const SynthConfig& config);

/// 2D annotation view of a dataset (input format of the prior learning).
AnnotationSet to_annotations(const SynthDataset& dataset);

} // namespace carshape
