/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: tests/test_nrsfm.cpp
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
#include "carshape/nrsfm.hpp"

#include "carshape/synth.hpp"
#include "nrsfm_eval.hpp"

#include <doctest.h>

using namespace carshape;
using nrsfm_eval::aligned_relative_rmse;
using nrsfm_eval::ortho_dataset;

TEST_CASE("nrsfm_fit: noiseless rank-3 data is reconstructed to high accuracy")
{
    const SynthDataset ds = ortho_dataset(/*modes=*/3, /*instances=*/60, /*seed=*/101);
    const NrsfmResult fit = nrsfm_fit(to_annotations(ds), 3);
    CHECK(aligned_relative_rmse(ds, fit) < 1e-3);
    CHECK_NOTHROW(fit.prior.validate());
    CHECK(fit.prior.basis_size() == 3);
}

TEST_CASE("nrsfm_fit: log-likelihood is nondecreasing across EM iterations")
{
    const SynthDataset ds = ortho_dataset(3, 40, 102);
    EmConfig cfg;
    cfg.max_iters = 120;
    const NrsfmResult fit = nrsfm_fit(to_annotations(ds), 3, cfg);
    REQUIRE(fit.report.loglik.size() >= 2);
    for (size_t t = 1; t < fit.report.loglik.size(); ++t)
        CHECK(fit.report.loglik[t] >=
              fit.report.loglik[t - 1] - 1e-9 * (1.0 + std::abs(fit.report.loglik[t - 1])));
}

TEST_CASE("nrsfm_fit: 20% missing keypoints still fit well")
{
    const SynthDataset ds = ortho_dataset(3, 60, 103, /*occlusion_fraction=*/0.2);
    const NrsfmResult fit = nrsfm_fit(to_annotations(ds), 3);
    CHECK(aligned_relative_rmse(ds, fit) < 5e-2);
}

TEST_CASE("nrsfm_fit: rigid data drives the leading eigenvalue to zero")
{
    const SynthDataset ds = ortho_dataset(/*modes=*/0, 40, 104);
    // modes = 0 means every instance equals the mean shape
    const NrsfmResult fit = nrsfm_fit(to_annotations(ds), 1);
    const double total_var = fit.prior.mean.squaredNorm();
    CHECK(fit.prior.eigenvalues[0] < 1e-8 * total_var);
    CHECK(aligned_relative_rmse(ds, fit) < 1e-6);
}

TEST_CASE("nrsfm_fit: variance_explained saturates at the true rank")
{
    const SynthDataset ds = ortho_dataset(/*modes=*/2, 50, 105);
    const NrsfmResult fit = nrsfm_fit(to_annotations(ds), 4);
    CHECK(variance_explained(fit.prior, 2) >= 0.9999);
    CHECK(variance_explained(fit.prior, 4) == doctest::Approx(1.0));
}

TEST_CASE("nrsfm_fit: reconstruction is equivariant to a common in-plane rotation")
{
    const SynthDataset ds = ortho_dataset(3, 40, 106);
    AnnotationSet plain = to_annotations(ds);

    const double theta = 0.83;
    Eigen::Matrix2d G;
    G << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    AnnotationSet rotated = plain;
    for (auto& inst : rotated.instances)
        for (auto& kp : inst.keypoints)
            if (kp.visible)
                kp.uv = G * kp.uv;

    const NrsfmResult fit_a = nrsfm_fit(plain, 3);
    const NrsfmResult fit_b = nrsfm_fit(rotated, 3);

    const int K = ds.prior.keypoint_count();
    const int M = static_cast<int>(ds.instances.size());
    MatrixX3d all_a(M * K, 3), all_b(M * K, 3);
    for (int m = 0; m < M; ++m)
    {
        all_a.middleRows(m * K, K) =
            instantiate(fit_a.prior, fit_a.instances[static_cast<size_t>(m)].lambda);
        all_b.middleRows(m * K, K) =
            instantiate(fit_b.prior, fit_b.instances[static_cast<size_t>(m)].lambda);
    }
    const Similarity sim = align_similarity(all_b, all_a, true);
    const double diam = shape_diameter(ds.prior.mean);
    CHECK(rmse(sim.apply(all_b), all_a) / diam < 1e-4);
}

TEST_CASE("nrsfm_fit: instances with too few visible keypoints are rejected and reported")
{
    SynthDataset ds = ortho_dataset(2, 12, 107);
    AnnotationSet ann = to_annotations(ds);
    // blank out all but 3 keypoints of two instances
    for (const int victim : {2, 7})
        for (int i = 3; i < 14; ++i)
            ann.instances[static_cast<size_t>(victim)]
                .keypoints[static_cast<size_t>(i)]
                .visible = false;

    const NrsfmResult fit = nrsfm_fit(ann, 2);
    CHECK(fit.report.rejected == std::vector<int>{2, 7});
    CHECK_FALSE(fit.instances[2].used);
    CHECK_FALSE(fit.instances[7].used);
    CHECK(fit.instances[0].used);
    // the rest still fits
    int used = 0;
    for (const auto& f : fit.instances)
        used += f.used ? 1 : 0;
    CHECK(used == 10);
}

TEST_CASE("nrsfm_fit: near-identical viewpoints raise the rank-deficiency flag")
{
    // all instances share one camera: the measurement matrix is rank <= 2
    const ShapePrior gen = default_car_prior(0);
    AnnotationSet ann;
    ann.names = gen.names;
    OrthoCam cam;
    cam.R << 1, 0, 0, 0, 1, 0;
    cam.c = 80.0;
    for (int m = 0; m < 12; ++m)
    {
        AnnotationInstance inst;
        inst.id = "same_" + std::to_string(m);
        inst.keypoints.resize(14);
        for (int i = 0; i < 14; ++i)
        {
            inst.keypoints[static_cast<size_t>(i)].visible = true;
            inst.keypoints[static_cast<size_t>(i)].uv =
                ortho_project(gen.mean.row(i).transpose(), cam);
        }
        ann.instances.push_back(std::move(inst));
    }
    const NrsfmResult fit = nrsfm_fit(ann, 1);
    CHECK(fit.report.rank_deficient);
}

TEST_CASE("nrsfm_fit: per-instance cameras reproduce the observations")
{
    const SynthDataset ds = ortho_dataset(3, 40, 108);
    const NrsfmResult fit = nrsfm_fit(to_annotations(ds), 3);
    double worst = 0.0;
    for (size_t m = 0; m < fit.instances.size(); ++m)
    {
        const auto& f = fit.instances[m];
        REQUIRE(f.used);
        CHECK_NOTHROW(f.cam.validate(1e-6));
        const MatrixX3d shape = instantiate(fit.prior, f.lambda);
        for (const auto& o : ds.instances[m].observations)
        {
            const Vector2d re = ortho_project(shape.row(o.index).transpose(), f.cam);
            worst = std::max(worst, (re - o.uv).norm());
        }
    }
    // noiseless data: reprojection error should be far below a pixel
    CHECK(worst < 0.05);
}

TEST_CASE("nrsfm_fit input validation")
{
    const SynthDataset ds = ortho_dataset(2, 10, 109);
    const AnnotationSet ann = to_annotations(ds);
    CHECK_THROWS_AS(nrsfm_fit(ann, 0), DegenerateInputError);
    CHECK_THROWS_AS(nrsfm_fit(ann, 10), DegenerateInputError); // > M - 1
    AnnotationSet renamed = ann;
    renamed.names[0] = "not_a_wheel";
    CHECK_THROWS_AS(nrsfm_fit(renamed, 2), DegenerateInputError);
}
