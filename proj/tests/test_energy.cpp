/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: tests/test_energy.cpp
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
#include "carshape/energy.hpp"

#include "carshape/shape_adjust.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace carshape;
using test_support::canonical_pose;
using test_support::exact_observations;
using test_support::test_intrinsics;

namespace {

Eigen::VectorXd flatten_shape(const MatrixX3d& m)
{
    Eigen::VectorXd v(m.size());
    for (int i = 0; i < m.rows(); ++i)
        v.segment<3>(3 * i) = m.row(i).transpose();
    return v;
}

MatrixX3d unflatten_shape(const Eigen::VectorXd& v)
{
    MatrixX3d m(v.size() / 3, 3);
    for (int i = 0; i < m.rows(); ++i)
        m.row(i) = v.segment<3>(3 * i).transpose();
    return m;
}

} // namespace

TEST_CASE("e_reproj: exact projections, displaced point, quadratic weighting")
{
    const ShapePrior prior = default_car_prior(0);
    const Intrinsics K = test_intrinsics();
    const QuatPose pose = canonical_pose(50.0, 3.0, 12.0);
    auto obs = exact_observations(prior.mean, pose, K);
    Eigen::VectorXd W = Eigen::VectorXd::Ones(14);

    CHECK(e_reproj(prior.mean, pose, obs, K, W) == doctest::Approx(0.0));

    obs[4].uv += Vector2d(3.0, 4.0);
    CHECK(e_reproj(prior.mean, pose, obs, K, W) == doctest::Approx(25.0));

    W[4] = 0.5;
    CHECK(e_reproj(prior.mean, pose, obs, K, W) == doctest::Approx(6.25));

    // invisible observations are excluded
    obs[4].visible = false;
    CHECK(e_reproj(prior.mean, pose, obs, K, W) == doctest::Approx(0.0));
}

TEST_CASE("e_reproj: behind-camera points give a large finite penalty")
{
    MatrixX3d shape(4, 3);
    shape << 0, 0, -3, 1, 0, 4, 0, 1, 4, 1, 1, 4;
    const Intrinsics K = test_intrinsics();
    const QuatPose identity;
    std::vector<KeypointObservation> obs;
    for (int i = 0; i < 4; ++i)
        obs.push_back({i, Vector2d(620, 180), 1.0, true});
    const Eigen::VectorXd W = Eigen::VectorXd::Ones(4);
    const double e = e_reproj(shape, identity, obs, K, W);
    CHECK(std::isfinite(e));
    CHECK(e > 1e6);
}

TEST_CASE("e_planar: coplanar square, norm penalty, best-fit oracle limit")
{
    QuadMesh mesh;
    mesh.vertex_count = 4;
    mesh.faces = {{0, 1, 2, 3}};
    const std::vector<bool> no_ground = {false};

    MatrixX3d square(4, 3);
    square << 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0;

    SUBCASE("unit square with its exact plane is zero")
    {
        const std::vector<Plane> planes = {Plane{Vector3d(0, 0, 1), 0.0}};
        CHECK(e_planar(square, mesh, planes, 1.0, std::nullopt, no_ground, 0.1) ==
              doctest::Approx(0.0));
    }

    SUBCASE("doubled normal pays the squared norm penalty only")
    {
        const std::vector<Plane> planes = {Plane{Vector3d(0, 0, 2), 0.0}};
        const double mu_f = 0.7;
        // points stay on the plane (n.X = 0), right angles keep rect at 0
        CHECK(e_planar(square, mesh, planes, mu_f, std::nullopt, no_ground, 0.1) ==
              doctest::Approx(9.0 * mu_f));
    }

    SUBCASE("non-planar quad with its best-fit plane: positive, vanishing with the bend")
    {
        double prev = std::numeric_limits<double>::infinity();
        for (const double eps : {0.2, 0.1, 0.05})
        {
            MatrixX3d bent = square;
            bent(3, 2) = eps;
            const Plane best = fit_plane(bent);
            const std::vector<Plane> planes = {best};
            const double e =
                e_planar(bent, mesh, planes, 1.0, std::nullopt, no_ground, 0.0);
            CHECK(e > 0.0);
            CHECK(e < prev);
            // the point term of the best-fit plane matches the sphere-sampling oracle
            const double point_term = oracles::best_fit_plane_energy_brute(bent);
            double mine = 0.0;
            for (int v = 0; v < 4; ++v)
                mine += std::pow(best.signed_distance(bent.row(v).transpose()), 2);
            CHECK(mine == doctest::Approx(point_term).epsilon(5e-3));
            prev = e;
        }
    }

    SUBCASE("ground-parallel flag penalizes tilted normals")
    {
        const std::vector<Plane> tilted = {Plane{Vector3d(0, std::sqrt(0.5), std::sqrt(0.5)), 0.0}};
        const std::vector<bool> ground = {true};
        const double e_with = e_planar(square, mesh, tilted, 0.0, Vector3d(0, 0, 1), ground, 0.0);
        const double e_without =
            e_planar(square, mesh, tilted, 0.0, std::nullopt, ground, 0.0);
        CHECK(e_with - e_without == doctest::Approx(0.5)); // sin^2(45 deg)
    }

    SUBCASE("plane count must match faces")
    {
        const std::vector<Plane> none;
        CHECK_THROWS_AS(e_planar(square, mesh, none, 1.0, std::nullopt, no_ground, 0.1),
                        DegenerateInputError);
    }
}

TEST_CASE("e_sym: mirror pairs, unit residual, rotated-frame oracle")
{
    const Plane medial{Vector3d(1, 0, 0), 0.0};
    MatrixX3d pts(2, 3);
    const std::vector<std::pair<int, int>> pairs = {{1, 0}}; // (left, right): left is row 1

    pts << 1, 0, 0, -1, 0, 0;
    CHECK(e_sym(pts, pairs, medial) == doctest::Approx(0.0));

    pts << 1, 0, 0, -1, 1, 0;
    CHECK(e_sym(pts, pairs, medial) == doctest::Approx(1.0));

    // random symmetric shape rotated together with its plane stays at zero
    Rng rng(41);
    for (int trial = 0; trial < 10; ++trial)
    {
        const int n_pairs = 5;
        MatrixX3d shape(2 * n_pairs, 3);
        std::vector<std::pair<int, int>> sym;
        for (int p = 0; p < n_pairs; ++p)
        {
            const Vector3d right(rng.uniform(0.2, 2.0), rng.normal(), rng.normal());
            shape.row(2 * p) = right.transpose();
            shape.row(2 * p + 1) = Vector3d(-right.x(), right.y(), right.z()).transpose();
            sym.push_back({2 * p + 1, 2 * p});
        }
        const Matrix3d R = test_support::random_rotation(rng);
        MatrixX3d rotated = (R * shape.transpose()).transpose();
        Plane rotated_plane{R * Vector3d(1, 0, 0), 0.0};
        CHECK(e_sym(rotated, sym, rotated_plane) < 1e-12);

        // oracle: reflect the rotated right points across the rotated plane directly
        for (int p = 0; p < n_pairs; ++p)
        {
            const Vector3d Xr = rotated.row(2 * p).transpose();
            const Vector3d refl =
                Xr - 2.0 * (rotated_plane.n.dot(Xr)) * rotated_plane.n;
            CHECK((refl - rotated.row(2 * p + 1).transpose()).norm() < 1e-10);
        }
    }
}

TEST_CASE("e_sym invariance under rigid motion of shape and plane")
{
    Rng rng(42);
    MatrixX3d shape(6, 3);
    for (int i = 0; i < 6; ++i)
        for (int k = 0; k < 3; ++k)
            shape(i, k) = rng.normal();
    const std::vector<std::pair<int, int>> pairs = {{0, 1}, {2, 3}, {4, 5}};
    const Plane medial{Vector3d(1, 0, 0), 0.0};
    const double base = e_sym(shape, pairs, medial);

    for (int trial = 0; trial < 10; ++trial)
    {
        const Matrix3d R = test_support::random_rotation(rng);
        const Vector3d t(rng.normal(), rng.normal(), rng.normal());
        MatrixX3d moved = (R * shape.transpose()).transpose();
        moved.rowwise() += t.transpose();
        // the reflection formula treats the plane as { n.X = d }, so the
        // rigidly moved plane is (R n, d + (R n).t)
        const Vector3d n_new = R * medial.n;
        const double d_new = medial.d + n_new.dot(t);
        CHECK(e_sym(moved, pairs, Plane{n_new, d_new}) == doctest::Approx(base).epsilon(1e-10));
    }
}

TEST_CASE("e_dim: matched priors, single-axis deviation, self-consistency")
{
    const ShapePrior prior = default_car_prior(0);
    CHECK(e_dim(prior.mean, prior.dim_priors, 1.0, 1.0, 1.0) == doctest::Approx(0.0));

    // stretch length by 1 m: mu_l * 1^2
    MatrixX3d stretched = prior.mean;
    int imax = 0;
    stretched.col(2).maxCoeff(&imax);
    stretched(imax, 2) += 1.0;
    CHECK(e_dim(stretched, prior.dim_priors, 2.0, 1.0, 1.0) == doctest::Approx(2.0));

    const Vector3d measured = shape_extents(stretched);
    CHECK(e_dim(stretched, measured, 5.0, 7.0, 9.0) == doctest::Approx(0.0));
}

TEST_CASE("e_lap: weighted-centroid zero, two-vertex case, tetrahedron oracle")
{
    SUBCASE("two mutually adjacent vertices each contribute d^2")
    {
        MatrixX3d two(2, 3);
        two << 0, 0, 0, 0.8, 0, 0;
        const std::vector<std::vector<int>> nbd = {{1}, {0}};
        CHECK(e_lap(two, nbd) == doctest::Approx(2.0 * 0.8 * 0.8));
    }

    SUBCASE("vertex at the weighted combination of its neighbors contributes zero")
    {
        // two neighbors symmetric about vertex 0: weights are equal, centroid at 0
        MatrixX3d pts(3, 3);
        pts << 0, 0, 0, 1, 0, 0, -1, 0, 0;
        const std::vector<std::vector<int>> nbd = {{1, 2}, {0}, {0}};
        MatrixX3d grad;
        const double e = e_lap(pts, nbd, &grad);
        // only the terms of vertices 1 and 2 remain
        const double expected = 2.0 * 1.0; // each of the outer vertices is 1 away from vertex 0
        CHECK(e == doctest::Approx(expected));
    }

    SUBCASE("regular tetrahedron: value matches an independent scalar evaluation")
    {
        MatrixX3d tet(4, 3);
        tet << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
        const std::vector<std::vector<int>> nbd = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
        const double mine = e_lap(tet, nbd);

        double oracle = 0.0;
        for (int i = 0; i < 4; ++i)
        {
            double wsum = 0.0;
            Vector3d acc = Vector3d::Zero();
            for (int j : nbd[static_cast<size_t>(i)])
            {
                const double w =
                    std::exp(-(tet.row(i) - tet.row(j)).squaredNorm());
                wsum += w;
                acc += w * tet.row(j).transpose();
            }
            oracle += (tet.row(i).transpose() - acc / wsum).squaredNorm();
        }
        CHECK(mine == doctest::Approx(oracle).epsilon(1e-12));

        // the literal unnormalized variant differs and matches its own oracle
        const double literal = e_lap(tet, nbd, nullptr, false);
        double oracle_literal = 0.0;
        for (int i = 0; i < 4; ++i)
        {
            Vector3d acc = Vector3d::Zero();
            for (int j : nbd[static_cast<size_t>(i)])
                acc += std::exp(-(tet.row(i) - tet.row(j)).squaredNorm()) *
                       tet.row(j).transpose();
            oracle_literal += (tet.row(i).transpose() - acc).squaredNorm();
        }
        CHECK(literal == doctest::Approx(oracle_literal).epsilon(1e-12));
        CHECK(literal != doctest::Approx(mine));
    }

    SUBCASE("isolated vertices are a configuration error")
    {
        MatrixX3d pts(2, 3);
        pts.setZero();
        const std::vector<std::vector<int>> nbd = {{1}, {}};
        CHECK_THROWS_AS(e_lap(pts, nbd), DegenerateInputError);
    }
}

TEST_CASE("per-term analytic gradients match central finite differences")
{
    const ShapePrior prior = default_car_prior(3);
    const Intrinsics K = test_intrinsics();
    const QuatPose pose = canonical_pose(33.0, 5.0, 11.0);
    Rng rng(43);

    for (int trial = 0; trial < 20; ++trial)
    {
        MatrixX3d shape = prior.mean;
        for (int i = 0; i < shape.rows(); ++i)
            for (int k = 0; k < 3; ++k)
                shape(i, k) += 0.15 * rng.normal();

        // e_reproj
        {
            auto obs = exact_observations(prior.mean, pose, K);
            Eigen::VectorXd W(14);
            for (int i = 0; i < 14; ++i)
                W[i] = rng.uniform(0.1, 1.0);
            MatrixX3d grad;
            e_reproj(shape, pose, obs, K, W, &grad);
            const auto f = [&](const Eigen::VectorXd& x) {
                return e_reproj(unflatten_shape(x), pose, obs, K, W);
            };
            const Eigen::VectorXd fd = oracles::fd_gradient(f, flatten_shape(shape));
            CHECK(oracles::gradient_rel_error(flatten_shape(grad), fd) < 1e-5);
        }
        // e_planar (points + norm + rect + ground), incl. plane gradients
        {
            std::vector<Plane> planes = initial_planes(shape, prior.topology);
            for (auto& p : planes)
            {
                p.n += 0.2 * Vector3d(rng.normal(), rng.normal(), rng.normal());
                p.d += 0.2 * rng.normal();
            }
            MatrixX3d grad;
            std::vector<Eigen::Vector4d> dplanes;
            e_planar(shape, prior.topology, planes, 0.8, Vector3d(0, 1, 0),
                     prior.ground_parallel, 0.3, &grad, &dplanes);
            const auto f_shape = [&](const Eigen::VectorXd& x) {
                return e_planar(unflatten_shape(x), prior.topology, planes, 0.8,
                                Vector3d(0, 1, 0), prior.ground_parallel, 0.3);
            };
            const Eigen::VectorXd fd = oracles::fd_gradient(f_shape, flatten_shape(shape));
            CHECK(oracles::gradient_rel_error(flatten_shape(grad), fd) < 1e-5);

            Eigen::VectorXd pl(4 * static_cast<int>(planes.size()));
            for (size_t f = 0; f < planes.size(); ++f)
            {
                pl.segment<3>(4 * static_cast<int>(f)) = planes[f].n;
                pl[4 * static_cast<int>(f) + 3] = planes[f].d;
            }
            const auto f_planes = [&](const Eigen::VectorXd& x) {
                std::vector<Plane> ps = planes;
                for (size_t f = 0; f < ps.size(); ++f)
                {
                    ps[f].n = x.segment<3>(4 * static_cast<int>(f));
                    ps[f].d = x[4 * static_cast<int>(f) + 3];
                }
                return e_planar(shape, prior.topology, ps, 0.8, Vector3d(0, 1, 0),
                                prior.ground_parallel, 0.3);
            };
            Eigen::VectorXd dp_flat(pl.size());
            for (size_t f = 0; f < dplanes.size(); ++f)
                dp_flat.segment<4>(4 * static_cast<int>(f)) = dplanes[f];
            const Eigen::VectorXd fd_p = oracles::fd_gradient(f_planes, pl);
            CHECK(oracles::gradient_rel_error(dp_flat, fd_p) < 1e-5);
        }
        // e_sym
        {
            MatrixX3d grad;
            e_sym(shape, prior.symmetry_pairs, prior.medial_plane, &grad);
            const auto f = [&](const Eigen::VectorXd& x) {
                return e_sym(unflatten_shape(x), prior.symmetry_pairs, prior.medial_plane);
            };
            const Eigen::VectorXd fd = oracles::fd_gradient(f, flatten_shape(shape));
            CHECK(oracles::gradient_rel_error(flatten_shape(grad), fd) < 1e-5);
        }
        // e_dim
        {
            MatrixX3d grad;
            e_dim(shape, prior.dim_priors, 1.3, 0.7, 2.1, &grad);
            const auto f = [&](const Eigen::VectorXd& x) {
                return e_dim(unflatten_shape(x), prior.dim_priors, 1.3, 0.7, 2.1);
            };
            const Eigen::VectorXd fd = oracles::fd_gradient(f, flatten_shape(shape));
            CHECK(oracles::gradient_rel_error(flatten_shape(grad), fd) < 1e-5);
        }
        // e_lap, both weight conventions
        {
            for (const bool normalized : {true, false})
            {
                MatrixX3d grad;
                e_lap(shape, prior.topology, &grad, normalized);
                const auto f = [&](const Eigen::VectorXd& x) {
                    return e_lap(unflatten_shape(x), prior.topology, nullptr, normalized);
                };
                const Eigen::VectorXd fd = oracles::fd_gradient(f, flatten_shape(shape));
                CHECK(oracles::gradient_rel_error(flatten_shape(grad), fd) < 1e-5);
            }
        }
    }
}

TEST_CASE("e_total: empty objective, single-term equality, finite-difference gradient")
{
    const ShapePrior prior = default_car_prior(3);
    const Intrinsics K = test_intrinsics();
    const QuatPose pose = canonical_pose(20.0, 4.0, 13.0);
    const auto obs = exact_observations(prior.mean, pose, K);
    Rng rng(44);

    EnergyState state;
    state.pose = pose;
    state.lambda = 0.25 * rng.normal_vector(3);
    state.planes = initial_planes(prior.mean, prior.topology);
    state.weights = Eigen::VectorXd::Ones(14);

    SUBCASE("all weights zero give zero energy and zero gradient")
    {
        EnergyConfig zero;
        zero.eta1 = zero.eta2 = zero.eta3 = zero.eta4 = zero.eta5 = 0.0;
        Eigen::VectorXd grad;
        CHECK(e_total(prior, obs, K, state, zero, &grad) == 0.0);
        CHECK(grad.norm() == 0.0);
    }

    SUBCASE("single active term equals the standalone value")
    {
        EnergyConfig only_sym;
        only_sym.eta1 = only_sym.eta2 = only_sym.eta4 = only_sym.eta5 = 0.0;
        only_sym.eta3 = 1.7;
        const MatrixX3d shape = instantiate(prior, state.lambda);
        EnergyBreakdown bd;
        const double total = e_total(prior, obs, K, state, only_sym, nullptr, &bd);
        CHECK(total ==
              doctest::Approx(1.7 * e_sym(shape, prior.symmetry_pairs, prior.medial_plane)));
        CHECK(bd.sym == doctest::Approx(total));
        CHECK(bd.reproj == 0.0);
    }

    SUBCASE("gradient w.r.t. (lambda, planes) matches finite differences")
    {
        EnergyConfig cfg; // defaults: every term active
        for (int trial = 0; trial < 10; ++trial)
        {
            EnergyState s = state;
            s.lambda = 0.3 * rng.normal_vector(3);
            for (auto& p : s.planes)
            {
                p.n += 0.15 * Vector3d(rng.normal(), rng.normal(), rng.normal());
                p.d += 0.15 * rng.normal();
            }
            Eigen::VectorXd grad;
            e_total(prior, obs, K, s, cfg, &grad);
            const Eigen::VectorXd x0 = pack_energy_state(s);
            const auto f = [&](const Eigen::VectorXd& x) {
                EnergyState sx = s;
                unpack_energy_state(x, sx);
                return e_total(prior, obs, K, sx, cfg);
            };
            const Eigen::VectorXd fd = oracles::fd_gradient(f, x0);
            CHECK(oracles::gradient_rel_error(grad, fd) < 1e-5);
        }
    }
}
