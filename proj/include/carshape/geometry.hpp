/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: include/carshape/geometry.hpp
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

#include "carshape/errors.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <utility>
#include <vector>

namespace carshape {

using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::Vector4d;
using MatrixX3d = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using MatrixX2d = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/**
 * Pinhole camera intrinsics in pixels. Skew defaults to zero.
 */
struct Intrinsics
{
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    double skew = 0.0;

    Matrix3d matrix() const
    {
        Matrix3d K;
        K << fx, skew, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
        return K;
    }

    void validate() const
    {
        if (!(fx > 0.0) || !(fy > 0.0))
            throw DegenerateInputError("Intrinsics: focal lengths must be positive");
    }
};

/**
 * Rigid pose with a non-unit quaternion rotation (scalar-first, q = (a,b,c,d))
 * and a translation in meters. The rotation is R(q) = R~(q)/|q|^2 so any
 * nonzero scaling of q represents the same rotation.
 */
struct QuatPose
{
    Vector4d q{1.0, 0.0, 0.0, 0.0};
    Vector3d t{0.0, 0.0, 0.0};

    Matrix3d rotation() const;

    /// Unit-norm quaternion with a >= 0 (first nonzero component positive if a == 0).
    QuatPose canonical() const;

    static QuatPose from_rt(const Matrix3d& R, const Vector3d& t);
};

/**
 * Scaled orthographic camera: a row-orthonormal 2x3 rotation R, an object-frame
 * translation t and a positive scale c. Projection is c * R * (X + t).
 */
struct OrthoCam
{
    Eigen::Matrix<double, 2, 3> R = Eigen::Matrix<double, 2, 3>::Identity();
    Vector3d t{0.0, 0.0, 0.0};
    double c = 1.0;

    void validate(double tol = 1e-9) const;
};

/**
 * Quad mesh over the keypoints: faces are 4-tuples of vertex indices, the edge
 * set and vertex adjacency are derived from the faces.
 */
struct QuadMesh
{
    int vertex_count = 0;
    std::vector<std::array<int, 4>> faces;

    /// Unique undirected edges (i < j), sorted lexicographically.
    std::vector<std::pair<int, int>> edges() const;

    /// Per-vertex sorted neighbor lists (symmetric by construction).
    std::vector<std::vector<int>> neighbors() const;

    void validate() const;
};

/// Plane n . X + d = 0. The normal is unit length after optimization.
struct Plane
{
    Vector3d n{0.0, 0.0, 1.0};
    double d = 0.0;

    double signed_distance(const Vector3d& X) const { return n.dot(X) + d; }
};

/**
 * Rotation matrix of a non-unit quaternion: R~(q)/|q|^2 with R~ the standard
 * homogeneous quaternion-to-matrix form. Throws DegenerateInputError on a
 * (numerically) zero quaternion.
 */
Matrix3d quat_to_rotation(const Vector4d& q);

/// Derivative of quat_to_rotation with respect to component k of q.
Matrix3d quat_to_rotation_jacobian(const Vector4d& q, int k);

/**
 * Perspective projection of an object-frame point into pixels.
 * Throws BehindCameraError if the camera-frame depth is not positive.
 */
Vector2d project(const Vector3d& X, const QuatPose& pose, const Intrinsics& K);

/// Perspective division of an already camera-frame point.
Vector2d project_camera_point(const Vector3d& Xc, const Intrinsics& K);

/**
 * Barrier-guarded projection for solvers: clamps the depth at `eps` and adds a
 * linear penalty of slope `barrier` below it, so the result stays finite and
 * pulls points back in front of the camera. Optional Jacobian w.r.t. Xc.
 */
Vector2d project_guarded(const Vector3d& Xc, const Intrinsics& K, double eps, double barrier,
                         Eigen::Matrix<double, 2, 3>* J = nullptr);

/// Scaled orthographic projection c * R * (X + t).
Vector2d ortho_project(const Vector3d& X, const OrthoCam& cam);

/// Camera center in the object frame (the point with R*C + t = 0).
Vector3d camera_center(const QuatPose& pose);

/**
 * Segment/triangle intersection test (Moller-Trumbore). The segment runs from
 * `a` to `b`; intersections within `eps` of either endpoint do not count.
 */
bool segment_hits_triangle(const Vector3d& a, const Vector3d& b, const Vector3d& t0,
                           const Vector3d& t1, const Vector3d& t2, double eps = 1e-9);

/// Least-squares plane through a set of points, normal canonicalized.
Plane fit_plane(const MatrixX3d& points);

} // namespace carshape
