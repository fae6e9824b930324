/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: tests/nrsfm_eval.hpp
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

// Shared evaluation helper for the prior-learning tests: reconstruction error
// of the fitted model against the generator, measured after one similarity
// alignment (reflection permitted, matching the gauge freedom of orthographic
// factorization) applied to the whole set.

#include "carshape/metrics.hpp"
#include "carshape/nrsfm.hpp"
#include "carshape/synth.hpp"

namespace nrsfm_eval {

using namespace carshape;

/// Relative RMSE (fraction of the mean ground-truth shape diameter) of all
/// fitted instance shapes after a single set-level similarity alignment.
inline double aligned_relative_rmse(const SynthDataset& truth, const NrsfmResult& fit)
{
    const int K = truth.prior.keypoint_count();
    int used = 0;
    for (const auto& f : fit.instances)
        used += f.used ? 1 : 0;
    MatrixX3d recon(used * K, 3), gt(used * K, 3);
    double diameter = 0.0;
    int row = 0;
    for (size_t m = 0; m < fit.instances.size(); ++m)
    {
        if (!fit.instances[m].used)
            continue;
        const MatrixX3d s = instantiate(fit.prior, fit.instances[m].lambda);
        recon.middleRows(row * K, K) = s;
        gt.middleRows(row * K, K) = truth.instances[m].gt_shape;
        diameter += shape_diameter(truth.instances[m].gt_shape);
        ++row;
    }
    diameter /= static_cast<double>(used);
    const Similarity sim = align_similarity(recon, gt, /*allow_reflection=*/true);
    return rmse(sim.apply(recon), gt) / diameter;
}

/// Orthographic synthetic set with the requested number of true modes.
inline SynthDataset ortho_dataset(int modes, int instances, std::uint64_t seed,
                                  double occlusion_fraction = 0.0)
{
    SynthConfig cfg;
    cfg.projection = SynthConfig::Projection::orthographic;
    cfg.instance_count = instances;
    cfg.seed = seed;
    cfg.occlusion_fraction = occlusion_fraction;
    return synth_generate(default_car_prior(modes), cfg);
}

} // namespace nrsfm_eval
