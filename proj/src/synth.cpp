/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: src/synth.cpp
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
#include "carshape/synth.hpp"

#include "carshape/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace carshape {

namespace {

Matrix3d rot_x(double rad)
{
    Matrix3d R;
    R << 1, 0, 0, 0, std::cos(rad), -std::sin(rad), 0, std::sin(rad), std::cos(rad);
    return R;
}

Matrix3d rot_y(double rad)
{
    Matrix3d R;
    R << std::cos(rad), 0, std::sin(rad), 0, 1, 0, -std::sin(rad), 0, std::cos(rad);
    return R;
}

// object y (up) maps to camera -y, object z (forward) toward the camera
const Matrix3d kBaseRotation = (Matrix3d() << 1, 0, 0, 0, -1, 0, 0, 0, -1).finished();

std::string instance_id(int m)
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "inst_%04d", m);
    return buf;
}

} // namespace

void SynthConfig::validate() const
{
    if (instance_count < 0)
        throw DegenerateInputError("SynthConfig: instance_count must be >= 0");
    if (pixel_noise_sigma < 0.0)
        throw DegenerateInputError("SynthConfig: pixel_noise_sigma must be >= 0");
    for (double f : {outlier_fraction, occlusion_fraction})
        if (f < 0.0 || f > 1.0)
            throw DegenerateInputError("SynthConfig: fractions must lie in [0, 1]");
    if (depth_min <= 0.0 || depth_max < depth_min)
        throw DegenerateInputError("SynthConfig: invalid depth range");
    if (projection == Projection::perspective)
        intrinsics.validate();
}

SynthDataset synth_generate(const ShapePrior& prior, const SynthConfig& config)
{
    config.validate();
    prior.validate();
    const int K = prior.keypoint_count();
    const int N = prior.basis_size();
    const double deg = M_PI / 180.0;

    SynthDataset dataset;
    dataset.prior = prior;
    dataset.config = config;
    Rng rng(config.seed);

    const int n_occluded = static_cast<int>(config.occlusion_fraction * K);
    const int n_outliers = static_cast<int>(config.outlier_fraction * K);

    for (int m = 0; m < config.instance_count; ++m)
    {
        bool generated = false;
        for (int attempt = 0; attempt <= config.max_retries && !generated; ++attempt)
        {
            SynthInstance inst;
            inst.id = instance_id(m);
            inst.outlier.assign(static_cast<size_t>(K), false);
            inst.occluded.assign(static_cast<size_t>(K), false);

            // shape: lambda_j = sqrt(eigenvalue_j) * z_j
            inst.gt_lambda = LatentCoeffs::Zero(N);
            for (int j = 0; j < N; ++j)
                inst.gt_lambda[j] = std::sqrt(std::max(prior.eigenvalues[j], 0.0)) * rng.normal();
            inst.gt_shape = instantiate(prior, inst.gt_lambda);

            const double azimuth = rng.uniform(config.azimuth_min_deg, config.azimuth_max_deg);
            const double elevation =
                rng.uniform(config.elevation_min_deg, config.elevation_max_deg);
            const Matrix3d R = rot_x(elevation * deg) * kBaseRotation * rot_y(azimuth * deg);

            MatrixX2d clean(K, 2);
            if (config.projection == SynthConfig::Projection::perspective)
            {
                const double depth = rng.uniform(config.depth_min, config.depth_max);
                const double lx = depth * rng.uniform(-config.lateral_frac, config.lateral_frac);
                const double ly = depth * rng.uniform(-config.vertical_frac, config.vertical_frac);
                inst.gt_pose = QuatPose::from_rt(R, Vector3d(lx, ly, depth));
                for (int i = 0; i < K; ++i)
                    clean.row(i) = project(inst.gt_shape.row(i).transpose(), inst.gt_pose,
                                           config.intrinsics)
                                       .transpose();

                // perturbed initialization (stand-in for an external 3D proposal)
                const double daz = rng.uniform(0.5 * config.init_azimuth_jitter_deg,
                                               config.init_azimuth_jitter_deg) *
                                   (rng.uniform() < 0.5 ? -1.0 : 1.0);
                Vector3d dt;
                for (int k = 0; k < 3; ++k)
                    dt[k] = config.init_translation_jitter * rng.normal();
                const Matrix3d R_init =
                    rot_x(elevation * deg) * kBaseRotation * rot_y((azimuth + daz) * deg);
                inst.init_pose = QuatPose::from_rt(R_init, inst.gt_pose.t + dt);
            }
            else
            {
                OrthoCam cam;
                const Matrix3d R_full = R; // reuse the same rotation distribution
                cam.R = R_full.topRows<2>();
                cam.c = rng.uniform(config.ortho_scale_min, config.ortho_scale_max);
                cam.t = Vector3d::Zero();
                inst.gt_ortho = cam;
                for (int i = 0; i < K; ++i)
                    clean.row(i) =
                        ortho_project(inst.gt_shape.row(i).transpose(), cam).transpose();
            }

            // occlusion: ray-traced candidates first in perspective mode, random in ortho
            std::vector<int> occ_order;
            if (config.projection == SynthConfig::Projection::perspective && n_occluded > 0)
            {
                const Eigen::VectorXd w_vis =
                    visibility_prior(inst.gt_shape, prior.topology, inst.gt_pose);
                std::vector<int> occluded_first, rest;
                for (int i = 0; i < K; ++i)
                    (w_vis[i] < 1.0 ? occluded_first : rest).push_back(i);
                rng.shuffle(occluded_first);
                rng.shuffle(rest);
                occ_order = occluded_first;
                occ_order.insert(occ_order.end(), rest.begin(), rest.end());
            }
            else if (n_occluded > 0)
            {
                occ_order.resize(static_cast<size_t>(K));
                std::iota(occ_order.begin(), occ_order.end(), 0);
                rng.shuffle(occ_order);
            }
            for (int k = 0; k < n_occluded && k < K; ++k)
                inst.occluded[static_cast<size_t>(occ_order[static_cast<size_t>(k)])] = true;

            std::vector<int> visible_ids;
            for (int i = 0; i < K; ++i)
                if (!inst.occluded[static_cast<size_t>(i)])
                    visible_ids.push_back(i);
            if (static_cast<int>(visible_ids.size()) < config.min_visible)
                continue; // regenerate

            // outliers among the visible keypoints
            std::vector<int> outlier_pool = visible_ids;
            rng.shuffle(outlier_pool);
            for (int k = 0; k < n_outliers && k < static_cast<int>(outlier_pool.size()); ++k)
                inst.outlier[static_cast<size_t>(outlier_pool[static_cast<size_t>(k)])] = true;

            inst.observations.resize(static_cast<size_t>(K));
            for (int i = 0; i < K; ++i)
            {
                KeypointObservation& o = inst.observations[static_cast<size_t>(i)];
                o.index = i;
                o.visible = !inst.occluded[static_cast<size_t>(i)];
                Vector2d uv = clean.row(i).transpose();
                if (o.visible)
                {
                    o.w_cnn = rng.uniform(config.w_cnn_min, config.w_cnn_max);
                    uv.x() += config.pixel_noise_sigma * rng.normal();
                    uv.y() += config.pixel_noise_sigma * rng.normal();
                    if (inst.outlier[static_cast<size_t>(i)])
                    {
                        const double angle = rng.uniform(0.0, 2.0 * M_PI);
                        uv += config.outlier_magnitude * Vector2d(std::cos(angle), std::sin(angle));
                    }
                }
                else if (config.projection == SynthConfig::Projection::perspective)
                {
                    // approximate fill-in from the upstream detector
                    o.w_cnn = config.occluded_w_cnn;
                    const double s = config.pixel_noise_sigma + config.occluded_extra_sigma;
                    uv.x() += s * rng.normal();
                    uv.y() += s * rng.normal();
                }
                else
                {
                    o.w_cnn = 0.0;
                    uv.setZero();
                }
                o.uv = uv;
            }
            dataset.instances.push_back(std::move(inst));
            generated = true;
        }
        if (!generated)
            throw DegenerateInputError("synth_generate: could not place enough visible keypoints "
                                       "for instance " +
                                       instance_id(m) + " (occlusion fraction too high)");
    }
    return dataset;
}

AnnotationSet to_annotations(const SynthDataset& dataset)
{
    AnnotationSet set;
    set.names = dataset.prior.names;
    for (const auto& inst : dataset.instances)
    {
        AnnotationInstance a;
        a.id = inst.id;
        a.keypoints.resize(inst.observations.size());
        for (size_t i = 0; i < inst.observations.size(); ++i)
        {
            const auto& o = inst.observations[i];
            a.keypoints[i].visible = o.visible;
            a.keypoints[i].uv = o.visible ? o.uv : Vector2d::Zero();
        }
        set.instances.push_back(std::move(a));
    }
    return set;
}

} // namespace carshape
