/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: tests/test_support.hpp
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
#include "carshape/rng.hpp"

#include <vector>

namespace test_support {

using namespace carshape;

inline Intrinsics test_intrinsics()
{
    return Intrinsics{720.0, 720.0, 620.0, 180.0, 0.0};
}

/// Pose looking from camera center C (object frame) toward `target`, with the
/// object up direction mapping to image up (camera -y).
inline QuatPose make_lookat_pose(const Vector3d& C, const Vector3d& target,
                                 const Vector3d& up = Vector3d(0, 1, 0))
{
    const Vector3d z = (target - C).normalized();
    Vector3d x = z.cross(up);
    if (x.norm() < 1e-9)
        x = z.cross(Vector3d(1, 0, 0));
    x.normalize();
    const Vector3d y = z.cross(x);
    Matrix3d R;
    R.row(0) = x.transpose();
    R.row(1) = y.transpose();
    R.row(2) = z.transpose();
    return QuatPose::from_rt(R, -(R * C));
}

/// Random rotation from a uniformly distributed unit quaternion.
inline Matrix3d random_rotation(Rng& rng)
{
    Vector4d q;
    for (int k = 0; k < 4; ++k)
        q[k] = rng.normal();
    return quat_to_rotation(q);
}

/// Exact observations of a shape under a pose (all keypoints, confidence 1).
inline std::vector<KeypointObservation> exact_observations(const MatrixX3d& shape,
                                                           const QuatPose& pose,
                                                           const Intrinsics& K)
{
    std::vector<KeypointObservation> obs;
    for (int i = 0; i < shape.rows(); ++i)
        obs.push_back({i, project(shape.row(i).transpose(), pose, K), 1.0, true});
    return obs;
}

/// A pose placing the car at `depth` meters with the given azimuth, as the
/// synthetic generator does.
inline QuatPose canonical_pose(double azimuth_deg, double elevation_deg, double depth,
                               const Vector3d& offset = Vector3d::Zero())
{
    const double d = M_PI / 180.0;
    Matrix3d rx, ry, base;
    const double e = elevation_deg * d, a = azimuth_deg * d;
    rx << 1, 0, 0, 0, std::cos(e), -std::sin(e), 0, std::sin(e), std::cos(e);
    ry << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
    base << 1, 0, 0, 0, -1, 0, 0, 0, -1;
    return QuatPose::from_rt(rx * base * ry, Vector3d(0, 0, depth) + offset);
}

} // namespace test_support
