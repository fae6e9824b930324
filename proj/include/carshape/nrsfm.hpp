/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: include/carshape/nrsfm.hpp
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

#include <vector>

namespace carshape {

struct EmConfig
{
    int max_iters = 500;
    double tol = 1e-6;          // relative log-likelihood change
    int min_visible = 4;        // instances below this are rejected
    double sigma2_floor = 1e-8; // px^2; keeps the marginal likelihood well conditioned

    void validate() const;
};

struct NrsfmInstanceFit
{
    OrthoCam cam;
    LatentCoeffs lambda;
    bool used = false; // false for rejected instances
};

struct NrsfmReport
{
    std::vector<double> loglik;  // marginal log-likelihood per EM iteration
    std::vector<int> rejected;   // input indices with too few visible keypoints
    bool rank_deficient = false; // measurement matrix close to rank < 3
    int iterations = 0;
};

struct NrsfmResult
{
    ShapePrior prior;
    std::vector<NrsfmInstanceFit> instances; // aligned with the input instances
    NrsfmReport report;
};

/**
 * Learns a shape prior from 2D keypoint annotations by EM for the low-rank
 * scaled-orthographic model with Gaussian latent weights. Missing annotations
 * are handled by restricting each instance to its visible rows; the E-step
 * posterior imputes them in the reconstructions.
 *
 * The result is expressed in the canonical object frame derived from the
 * template's symmetry pairs (medial plane x = 0, left keypoints negative x,
 * y up, z forward) with the mean orthographic scale normalized to 1. Basis
 * directions are orthonormal with nonincreasing variances; per-instance
 * coefficients reproduce the fitted shapes exactly.
 *
 * `metadata_template` supplies topology, symmetry pairs and names; it defaults
 * to the built-in car template (requires the annotation names to match).
 */
NrsfmResult nrsfm_fit(const AnnotationSet& data, int basis_size, const EmConfig& config = {},
                      const ShapePrior* metadata_template = nullptr);

} // namespace carshape
