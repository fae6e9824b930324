/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: tests/test_geometry.cpp
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
#include "carshape/geometry.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>

using namespace carshape;

TEST_CASE("quat_to_rotation: identity and homogeneity")
{
    CHECK((quat_to_rotation({1, 0, 0, 0}) - Matrix3d::Identity()).norm() == doctest::Approx(0.0));
    CHECK((quat_to_rotation({2, 0, 0, 0}) - Matrix3d::Identity()).norm() ==
          doctest::Approx(0.0).epsilon(1e-12));

    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial)
    {
        Vector4d q;
        for (int k = 0; k < 4; ++k)
            q[k] = rng.normal();
        const double s = rng.uniform(0.1, 5.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        CHECK((quat_to_rotation(q) - quat_to_rotation(s * q)).norm() < 1e-12);
        const Matrix3d R = quat_to_rotation(q);
        CHECK((R.transpose() * R - Matrix3d::Identity()).norm() < 1e-12);
    }
}

TEST_CASE("quat_to_rotation: y-axis rotation matches the axis-angle oracle")
{
    const double deg = M_PI / 180.0;
    const Vector4d q(std::cos(15.0 * deg), 0.0, std::sin(15.0 * deg), 0.0);
    const Matrix3d R = quat_to_rotation(q);
    const Matrix3d R_oracle = oracles::axis_angle_rotation(Vector3d(0, 1, 0), 30.0 * deg);
    CHECK((R - R_oracle).norm() < 1e-12);

    const Vector3d mapped = R * Vector3d(0, 0, 1);
    CHECK(mapped.x() == doctest::Approx(std::sin(30.0 * deg)).epsilon(1e-12));
    CHECK(mapped.y() == doctest::Approx(0.0));
    CHECK(mapped.z() == doctest::Approx(std::cos(30.0 * deg)).epsilon(1e-12));

    // random quaternions against the oracle via their axis-angle form
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial)
    {
        Vector3d axis;
        for (int k = 0; k < 3; ++k)
            axis[k] = rng.normal();
        axis.normalize();
        const double angle = rng.uniform(-3.0, 3.0);
        const Vector4d qq(std::cos(angle / 2.0), axis.x() * std::sin(angle / 2.0),
                          axis.y() * std::sin(angle / 2.0), axis.z() * std::sin(angle / 2.0));
        CHECK((quat_to_rotation(qq) - oracles::axis_angle_rotation(axis, angle)).norm() < 1e-10);
    }
}

TEST_CASE("quat_to_rotation: zero quaternion is rejected")
{
    CHECK_THROWS_AS(quat_to_rotation({0, 0, 0, 0}), DegenerateInputError);
}

TEST_CASE("quat_to_rotation_jacobian matches finite differences")
{
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial)
    {
        Vector4d q;
        for (int k = 0; k < 4; ++k)
            q[k] = rng.normal();
        const double h = 1e-7;
        for (int k = 0; k < 4; ++k)
        {
            Vector4d qp = q, qm = q;
            qp[k] += h;
            qm[k] -= h;
            const Matrix3d fd = (quat_to_rotation(qp) - quat_to_rotation(qm)) / (2.0 * h);
            CHECK((quat_to_rotation_jacobian(q, k) - fd).norm() < 1e-6);
        }
    }
}

TEST_CASE("project: principal ray and pixel arithmetic")
{
    Intrinsics K{500, 500, 320, 240, 0};
    QuatPose identity;
    CHECK((project({0, 0, 1}, identity, K) - Vector2d(320, 240)).norm() < 1e-12);
    CHECK((project({1, 0, 2}, identity, K) - Vector2d(570, 240)).norm() < 1e-12);

    QuatPose shifted;
    shifted.t = Vector3d(0, 0, 1);
    CHECK((project({0, 1, 1}, shifted, K) - Vector2d(320, 490)).norm() < 1e-12);
}

TEST_CASE("project: behind-camera raises, quaternion negation does not matter")
{
    Intrinsics K{500, 500, 320, 240, 0};
    QuatPose identity;
    CHECK_THROWS_AS(project({0, 0, -1}, identity, K), BehindCameraError);
    CHECK_THROWS_AS(project({0, 0, 0}, identity, K), BehindCameraError);

    Rng rng(14);
    for (int trial = 0; trial < 20; ++trial)
    {
        QuatPose pose;
        for (int k = 0; k < 4; ++k)
            pose.q[k] = rng.normal();
        pose.t = Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(4, 9));
        QuatPose negated = pose;
        negated.q = -negated.q;
        const Vector3d X(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        CHECK((project(X, pose, K) - project(X, negated, K)).norm() < 1e-12);
    }
}

TEST_CASE("ortho_project: axis aligned, translation cancellation, scale linearity")
{
    OrthoCam cam; // identity rows, t = 0, c = 1
    CHECK((ortho_project({1, 2, 3}, cam) - Vector2d(1, 2)).norm() < 1e-15);

    Rng rng(15);
    OrthoCam cam2;
    cam2.R = test_support::random_rotation(rng).topRows<2>();
    cam2.t = Vector3d(-1, -2, -3);
    CHECK(ortho_project({1, 2, 3}, cam2).norm() < 1e-15);

    for (int trial = 0; trial < 20; ++trial)
    {
        OrthoCam a;
        a.R = test_support::random_rotation(rng).topRows<2>();
        a.t = Vector3d(rng.normal(), rng.normal(), rng.normal());
        a.c = 1.0;
        OrthoCam b = a;
        b.c = 2.0;
        const Vector3d X(rng.normal(), rng.normal(), rng.normal());
        CHECK((ortho_project(X, b) - 2.0 * ortho_project(X, a)).norm() < 1e-12);
    }
}

TEST_CASE("QuatPose canonicalization makes the scalar component nonnegative")
{
    QuatPose p;
    p.q = Vector4d(-2.0, 1.0, 0.5, -0.25);
    const QuatPose c = p.canonical();
    CHECK(c.q[0] > 0.0);
    CHECK(c.q.norm() == doctest::Approx(1.0));
    CHECK((quat_to_rotation(p.q) - quat_to_rotation(c.q)).norm() < 1e-12);

    QuatPose flip;
    flip.q = Vector4d(0.0, -1.0, 0.0, 0.0);
    CHECK(flip.canonical().q[1] > 0.0);
}

TEST_CASE("QuadMesh: adjacency is symmetric and consistent under relabeling")
{
    QuadMesh mesh;
    mesh.vertex_count = 6;
    mesh.faces = {{0, 1, 2, 3}, {2, 3, 4, 5}};
    mesh.validate();

    const auto nbd = mesh.neighbors();
    for (int i = 0; i < mesh.vertex_count; ++i)
        for (int j : nbd[static_cast<size_t>(i)])
            CHECK(std::count(nbd[static_cast<size_t>(j)].begin(),
                             nbd[static_cast<size_t>(j)].end(), i) == 1);

    // relabel vertices by a permutation and compare adjacency
    const std::vector<int> perm = {3, 5, 0, 1, 4, 2};
    QuadMesh relabeled;
    relabeled.vertex_count = 6;
    for (const auto& f : mesh.faces)
        relabeled.faces.push_back({perm[static_cast<size_t>(f[0])], perm[static_cast<size_t>(f[1])],
                                   perm[static_cast<size_t>(f[2])],
                                   perm[static_cast<size_t>(f[3])]});
    const auto nbd2 = relabeled.neighbors();
    for (int i = 0; i < 6; ++i)
    {
        std::vector<int> mapped;
        for (int j : nbd[static_cast<size_t>(i)])
            mapped.push_back(perm[static_cast<size_t>(j)]);
        std::sort(mapped.begin(), mapped.end());
        CHECK(mapped == nbd2[static_cast<size_t>(perm[static_cast<size_t>(i)])]);
    }
}

TEST_CASE("QuadMesh validation rejects malformed faces")
{
    QuadMesh bad;
    bad.vertex_count = 4;
    bad.faces = {{0, 1, 2, 2}};
    CHECK_THROWS_AS(bad.validate(), DegenerateInputError);

    QuadMesh out_of_range;
    out_of_range.vertex_count = 3;
    out_of_range.faces = {{0, 1, 2, 3}};
    CHECK_THROWS_AS(out_of_range.validate(), DegenerateInputError);

    QuadMesh duplicate;
    duplicate.vertex_count = 4;
    duplicate.faces = {{0, 1, 2, 3}, {3, 2, 1, 0}};
    CHECK_THROWS_AS(duplicate.validate(), DegenerateInputError);
}

TEST_CASE("fit_plane recovers exact planes and matches the sphere-sampling oracle")
{
    MatrixX3d square(4, 3);
    square << 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0;
    const Plane p = fit_plane(square);
    CHECK(std::abs(std::abs(p.n.z()) - 1.0) < 1e-12);
    CHECK(std::abs(p.d) < 1e-12);

    Rng rng(16);
    for (int trial = 0; trial < 5; ++trial)
    {
        MatrixX3d pts(6, 3);
        for (int i = 0; i < 6; ++i)
            for (int k = 0; k < 3; ++k)
                pts(i, k) = rng.normal();
        const Plane fit = fit_plane(pts);
        double e_fit = 0.0;
        for (int i = 0; i < 6; ++i)
            e_fit += std::pow(fit.signed_distance(pts.row(i).transpose()), 2);
        const double e_oracle = oracles::best_fit_plane_energy_brute(pts);
        CHECK(e_fit <= e_oracle * (1.0 + 1e-6) + 1e-12); // fit is at least as good
        CHECK(e_fit >= e_oracle * (1.0 - 3e-2) - 1e-9);  // oracle grid comes close
    }
}

TEST_CASE("segment_hits_triangle agrees with the barycentric oracle")
{
    Rng rng(17);
    int hits = 0;
    for (int trial = 0; trial < 500; ++trial)
    {
        Vector3d a, b, t0, t1, t2;
        for (int k = 0; k < 3; ++k)
        {
            a[k] = rng.uniform(-2, 2);
            b[k] = rng.uniform(-2, 2);
            t0[k] = rng.uniform(-1, 1);
            t1[k] = rng.uniform(-1, 1);
            t2[k] = rng.uniform(-1, 1);
        }
        const bool mine = segment_hits_triangle(a, b, t0, t1, t2);
        const bool oracle = oracles::segment_hits_triangle_brute(a, b, t0, t1, t2);
        CHECK(mine == oracle);
        hits += mine ? 1 : 0;
    }
    CHECK(hits > 10); // the sample exercises both outcomes
}
