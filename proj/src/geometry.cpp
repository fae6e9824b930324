/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: src/geometry.cpp
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

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <set>

namespace carshape {

namespace {

// Homogeneous (unnormalized) quaternion-to-matrix form.
Matrix3d quat_matrix_raw(const Vector4d& q)
{
    const double a = q[0], b = q[1], c = q[2], d = q[3];
    Matrix3d R;
    R << a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c),
        2.0 * (b * c + a * d), a * a - b * b + c * c - d * d, 2.0 * (c * d - a * b),
        2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a - b * b - c * c + d * d;
    return R;
}

Matrix3d quat_matrix_raw_jacobian(const Vector4d& q, int k)
{
    const double a = q[0], b = q[1], c = q[2], d = q[3];
    Matrix3d J;
    switch (k)
    {
    case 0:
        J << a, -d, c, d, a, -b, -c, b, a;
        break;
    case 1:
        J << b, c, d, c, -b, -a, d, a, -b;
        break;
    case 2:
        J << -c, b, a, b, c, d, -a, d, -c;
        break;
    default:
        J << -d, -a, b, a, -d, c, b, c, d;
        break;
    }
    return 2.0 * J;
}

} // namespace

Matrix3d quat_to_rotation(const Vector4d& q)
{
    const double n2 = q.squaredNorm();
    if (n2 < 1e-30)
        throw DegenerateInputError("quat_to_rotation: zero quaternion");
    return quat_matrix_raw(q) / n2;
}

Matrix3d quat_to_rotation_jacobian(const Vector4d& q, int k)
{
    const double n2 = q.squaredNorm();
    if (n2 < 1e-30)
        throw DegenerateInputError("quat_to_rotation_jacobian: zero quaternion");
    // d(R~/n2) = dR~/n2 - R~ * 2 q_k / n2^2
    return quat_matrix_raw_jacobian(q, k) / n2 - quat_matrix_raw(q) * (2.0 * q[k] / (n2 * n2));
}

Matrix3d QuatPose::rotation() const
{
    return quat_to_rotation(q);
}

QuatPose QuatPose::canonical() const
{
    const double n = q.norm();
    if (n < 1e-15)
        throw DegenerateInputError("QuatPose::canonical: zero quaternion");
    Vector4d u = q / n;
    for (int k = 0; k < 4; ++k)
    {
        if (u[k] > 0.0)
            break;
        if (u[k] < 0.0)
        {
            u = -u;
            break;
        }
    }
    return QuatPose{u, t};
}

QuatPose QuatPose::from_rt(const Matrix3d& R, const Vector3d& t)
{
    const Eigen::Quaterniond eq(R);
    QuatPose pose;
    pose.q = Vector4d(eq.w(), eq.x(), eq.y(), eq.z());
    pose.t = t;
    return pose.canonical();
}

void OrthoCam::validate(double tol) const
{
    const Eigen::Matrix2d gram = R * R.transpose();
    if ((gram - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() > tol)
        throw DegenerateInputError("OrthoCam: rows of R are not orthonormal");
    if (!(c > 0.0))
        throw DegenerateInputError("OrthoCam: scale must be positive");
}

std::vector<std::pair<int, int>> QuadMesh::edges() const
{
    std::set<std::pair<int, int>> unique;
    for (const auto& f : faces)
        for (int k = 0; k < 4; ++k)
        {
            int i = f[k], j = f[(k + 1) % 4];
            unique.emplace(std::min(i, j), std::max(i, j));
        }
    return {unique.begin(), unique.end()};
}

std::vector<std::vector<int>> QuadMesh::neighbors() const
{
    std::vector<std::vector<int>> nbd(static_cast<size_t>(vertex_count));
    for (const auto& [i, j] : edges())
    {
        nbd[static_cast<size_t>(i)].push_back(j);
        nbd[static_cast<size_t>(j)].push_back(i);
    }
    for (auto& list : nbd)
        std::sort(list.begin(), list.end());
    return nbd;
}

void QuadMesh::validate() const
{
    std::set<std::array<int, 4>> seen;
    for (const auto& f : faces)
    {
        std::set<int> distinct(f.begin(), f.end());
        if (distinct.size() != 4)
            throw DegenerateInputError("QuadMesh: face vertices must be distinct");
        for (int v : f)
            if (v < 0 || v >= vertex_count)
                throw DegenerateInputError("QuadMesh: vertex index out of range");
        std::array<int, 4> key = f;
        std::sort(key.begin(), key.end());
        if (!seen.insert(key).second)
            throw DegenerateInputError("QuadMesh: duplicate face");
    }
}

Vector2d project_camera_point(const Vector3d& Xc, const Intrinsics& K)
{
    if (!(Xc.z() > 0.0))
        throw BehindCameraError("project: point has nonpositive camera depth");
    return {(K.fx * Xc.x() + K.skew * Xc.y()) / Xc.z() + K.cx, K.fy * Xc.y() / Xc.z() + K.cy};
}

Vector2d project(const Vector3d& X, const QuatPose& pose, const Intrinsics& K)
{
    return project_camera_point(pose.rotation() * X + pose.t, K);
}

Vector2d project_guarded(const Vector3d& Xc, const Intrinsics& K, double eps, double barrier,
                         Eigen::Matrix<double, 2, 3>* J)
{
    const double z = std::max(Xc.z(), eps);
    Vector2d uv{(K.fx * Xc.x() + K.skew * Xc.y()) / z + K.cx, K.fy * Xc.y() / z + K.cy};
    if (J)
    {
        (*J)(0, 0) = K.fx / z;
        (*J)(0, 1) = K.skew / z;
        (*J)(1, 0) = 0.0;
        (*J)(1, 1) = K.fy / z;
        if (Xc.z() > eps)
        {
            (*J)(0, 2) = -(K.fx * Xc.x() + K.skew * Xc.y()) / (z * z);
            (*J)(1, 2) = -K.fy * Xc.y() / (z * z);
        }
        else
        {
            (*J)(0, 2) = -barrier;
            (*J)(1, 2) = -barrier;
        }
    }
    if (Xc.z() <= eps)
    {
        const double pen = barrier * (eps - Xc.z());
        uv[0] += pen;
        uv[1] += pen;
    }
    return uv;
}

Vector2d ortho_project(const Vector3d& X, const OrthoCam& cam)
{
    return cam.c * (cam.R * (X + cam.t));
}

Vector3d camera_center(const QuatPose& pose)
{
    return -(pose.rotation().transpose() * pose.t);
}

bool segment_hits_triangle(const Vector3d& a, const Vector3d& b, const Vector3d& t0,
                           const Vector3d& t1, const Vector3d& t2, double eps)
{
    const Vector3d dir = b - a;
    const Vector3d e1 = t1 - t0;
    const Vector3d e2 = t2 - t0;
    const Vector3d p = dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-14)
        return false; // segment parallel to the triangle plane
    const double inv = 1.0 / det;
    const Vector3d s = a - t0;
    const double u = s.dot(p) * inv;
    if (u < -1e-12 || u > 1.0 + 1e-12)
        return false;
    const Vector3d qv = s.cross(e1);
    const double v = dir.dot(qv) * inv;
    if (v < -1e-12 || u + v > 1.0 + 1e-12)
        return false;
    const double s_param = e2.dot(qv) * inv;
    return s_param > eps && s_param < 1.0 - eps;
}

Plane fit_plane(const MatrixX3d& points)
{
    if (points.rows() < 3)
        throw DegenerateInputError("fit_plane: need at least 3 points");
    const Vector3d centroid = points.colwise().mean();
    const MatrixX3d centered = points.rowwise() - centroid.transpose();
    const Matrix3d cov = centered.transpose() * centered;
    Eigen::SelfAdjointEigenSolver<Matrix3d> eig(cov);
    Vector3d n = eig.eigenvectors().col(0); // smallest eigenvalue
    // Deterministic sign: largest-magnitude component positive.
    int imax = 0;
    n.cwiseAbs().maxCoeff(&imax);
    if (n[imax] < 0.0)
        n = -n;
    return Plane{n, -n.dot(centroid)};
}

} // namespace carshape
