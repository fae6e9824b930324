/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: src/prior.cpp
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
#include "carshape/prior.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace carshape {

namespace {

Eigen::VectorXd flatten(const MatrixX3d& M)
{
    Eigen::VectorXd v(M.size());
    for (int i = 0; i < M.rows(); ++i)
        v.segment<3>(3 * i) = M.row(i).transpose();
    return v;
}

MatrixX3d unflatten(const Eigen::VectorXd& v)
{
    MatrixX3d M(v.size() / 3, 3);
    for (int i = 0; i < M.rows(); ++i)
        M.row(i) = v.segment<3>(3 * i).transpose();
    return M;
}

} // namespace

int ShapePrior::keypoint_index(const std::string& name) const
{
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name)
            return static_cast<int>(i);
    return -1;
}

void ShapePrior::validate() const
{
    const int K = keypoint_count();
    if (K < 4)
        throw DegenerateInputError("ShapePrior: needs at least 4 keypoints");
    if (static_cast<int>(names.size()) != K)
        throw DegenerateInputError("ShapePrior: name table size mismatch");
    if (eigenvalues.size() != basis_size())
        throw DegenerateInputError("ShapePrior: eigenvalue count must match basis size");
    for (const auto& V : basis)
        if (V.rows() != K)
            throw DegenerateInputError("ShapePrior: basis vector row count mismatch");
    for (int j = 0; j + 1 < eigenvalues.size(); ++j)
        if (eigenvalues[j] + 1e-12 < eigenvalues[j + 1])
            throw DegenerateInputError("ShapePrior: eigenvalues must be nonincreasing");
    for (size_t a = 0; a < basis.size(); ++a)
        for (size_t b = a + 1; b < basis.size(); ++b)
            if (std::abs(flatten(basis[a]).dot(flatten(basis[b]))) > 1e-8)
                throw DegenerateInputError("ShapePrior: basis vectors must be orthogonal");

    if (topology.vertex_count != K)
        throw DegenerateInputError("ShapePrior: topology vertex count mismatch");
    topology.validate();
    if (ground_parallel.size() != topology.faces.size())
        throw DegenerateInputError("ShapePrior: ground_parallel flag count mismatch");

    // Symmetry pairs plus on-plane indices must partition the keypoints.
    std::set<int> covered(on_plane.begin(), on_plane.end());
    for (const auto& [l, r] : symmetry_pairs)
    {
        if (l < 0 || l >= K || r < 0 || r >= K || l == r)
            throw DegenerateInputError("ShapePrior: invalid symmetry pair");
        if (!covered.insert(l).second || !covered.insert(r).second)
            throw DegenerateInputError("ShapePrior: keypoint appears in two symmetry entries");
    }
    if (static_cast<int>(covered.size()) != K)
        throw DegenerateInputError("ShapePrior: symmetry metadata does not cover all keypoints");
}

std::vector<int> AnnotationSet::deficient_instances(int min_visible) const
{
    std::vector<int> out;
    for (int m = 0; m < instance_count(); ++m)
    {
        int visible = 0;
        for (const auto& a : instances[static_cast<size_t>(m)].keypoints)
            visible += a.visible ? 1 : 0;
        if (visible < min_visible)
            out.push_back(m);
    }
    return out;
}

void AnnotationSet::validate(int min_visible) const
{
    const int K = keypoint_count();
    if (K == 0)
        throw DegenerateInputError("AnnotationSet: empty keypoint name table");
    for (const auto& inst : instances)
    {
        if (static_cast<int>(inst.keypoints.size()) != K)
            throw DegenerateInputError("AnnotationSet: instance keypoint count mismatch: " + inst.id);
        for (const auto& a : inst.keypoints)
            if (a.visible && !a.uv.allFinite())
                throw DegenerateInputError("AnnotationSet: visible keypoint with non-finite coordinates: " +
                                           inst.id);
    }
    (void)min_visible; // deficiency is reported, not fatal; see deficient_instances()
}

MatrixX3d instantiate(const ShapePrior& prior, const LatentCoeffs& coeffs)
{
    if (coeffs.size() != prior.basis_size())
        throw DegenerateInputError("instantiate: coefficient count must match basis size");
    MatrixX3d shape = prior.mean;
    for (int j = 0; j < prior.basis_size(); ++j)
        shape += coeffs[j] * prior.basis[static_cast<size_t>(j)];
    return shape;
}

double variance_explained(const ShapePrior& prior, int n)
{
    const int N = prior.basis_size();
    if (n < 1 || n > N)
        throw DegenerateInputError("variance_explained: n out of range");
    const double total = prior.eigenvalues.sum();
    if (total <= 0.0)
        return 1.0;
    return prior.eigenvalues.head(n).sum() / total;
}

Vector3d shape_extents(const MatrixX3d& shape)
{
    const Vector3d lo = shape.colwise().minCoeff();
    const Vector3d hi = shape.colwise().maxCoeff();
    // canonical frame: x lateral (width), y up (height), z forward (length)
    return {hi.z() - lo.z(), hi.x() - lo.x(), hi.y() - lo.y()};
}

double shape_diameter(const MatrixX3d& shape)
{
    double best = 0.0;
    for (int i = 0; i < shape.rows(); ++i)
        for (int j = i + 1; j < shape.rows(); ++j)
            best = std::max(best, (shape.row(i) - shape.row(j)).norm());
    return best;
}

const std::vector<std::string>& default_keypoint_names()
{
    static const std::vector<std::string> names = {
        "wheel_front_left", "wheel_front_right", "wheel_back_left", "wheel_back_right",
        "headlight_left",   "headlight_right",   "taillight_left",  "taillight_right",
        "mirror_left",      "mirror_right",      "roof_front_left", "roof_front_right",
        "roof_back_left",   "roof_back_right"};
    return names;
}

ShapePrior default_car_prior(int n_modes)
{
    if (n_modes < 0 || n_modes > 5)
        throw DegenerateInputError("default_car_prior: supports 0..5 modes");

    ShapePrior prior;
    prior.names = default_keypoint_names();

    MatrixX3d mean(14, 3);
    // x lateral (left negative), y up, z forward; meters, centered.
    mean << -0.80, -0.60, 1.25, //  0 wheel_front_left
        0.80, -0.60, 1.25,      //  1 wheel_front_right
        -0.80, -0.60, -1.25,    //  2 wheel_back_left
        0.80, -0.60, -1.25,     //  3 wheel_back_right
        -0.65, -0.10, 2.10,     //  4 headlight_left
        0.65, -0.10, 2.10,      //  5 headlight_right
        -0.70, 0.00, -2.10,     //  6 taillight_left
        0.70, 0.00, -2.10,      //  7 taillight_right
        -0.95, 0.45, 0.85,      //  8 mirror_left
        0.95, 0.45, 0.85,       //  9 mirror_right
        -0.60, 0.85, 0.55,      // 10 roof_front_left
        0.60, 0.85, 0.55,       // 11 roof_front_right
        -0.60, 0.85, -0.95,     // 12 roof_back_left
        0.60, 0.85, -0.95;      // 13 roof_back_right
    prior.mean = mean;

    prior.topology.vertex_count = 14;
    prior.topology.faces = {
        {0, 1, 3, 2},    // wheel centers (ground-parallel plane)
        {10, 11, 13, 12}, // rooftop
        {0, 2, 12, 10},  // left side
        {1, 3, 13, 11},  // right side
        {4, 5, 11, 10},  // front
        {6, 7, 13, 12},  // rear
        {8, 9, 11, 10},  // mirrors / windshield band
    };
    prior.ground_parallel = {true, false, false, false, false, false, false};

    prior.symmetry_pairs = {{0, 1}, {2, 3}, {4, 5}, {6, 7}, {8, 9}, {10, 11}, {12, 13}};
    prior.on_plane = {};
    prior.medial_plane = Plane{Vector3d(1, 0, 0), 0.0};
    prior.dim_priors = shape_extents(prior.mean);

    // Bilaterally symmetric deformation modes, one (dx, dy, dz) triple per
    // symmetry pair (the left partner mirrors dx). The profiles are generic:
    // no mode is a coordinate rescaling of the mean and no profile row is a
    // multiple of another, so the stacked [mean; basis] matrix has full rank
    // and synthetic datasets drawn from the prior keep their nominal rank.
    // Wheel dy values are equal within each mode, which keeps the four wheel
    // centers exactly coplanar with a ground-parallel normal.
    // pair order: wheels front, wheels back, headlights, taillights,
    //             mirrors, roof front, roof back
    static const double mode_table[5][7][3] = {
        // profile / height
        {{0.05, 0.10, 0.12},
         {0.04, 0.10, -0.08},
         {0.06, 0.22, 0.15},
         {0.03, 0.28, -0.18},
         {0.10, 0.42, 0.05},
         {0.02, 0.55, -0.10},
         {-0.03, 0.62, 0.08}},
        // length
        {{0.03, -0.04, 0.45},
         {-0.02, -0.04, -0.52},
         {0.05, 0.06, 0.85},
         {-0.04, 0.10, -0.95},
         {0.06, -0.08, 0.30},
         {0.02, 0.12, 0.38},
         {0.04, -0.10, -0.55}},
        // width
        {{0.42, 0.05, 0.06},
         {0.48, 0.05, -0.04},
         {0.35, -0.08, 0.10},
         {0.38, 0.06, -0.12},
         {0.65, 0.10, 0.04},
         {0.22, -0.06, 0.08},
         {0.25, 0.09, -0.06}},
        // cabin shift
        {{0.04, 0.02, -0.10},
         {-0.05, 0.02, 0.08},
         {0.03, -0.12, -0.25},
         {0.02, 0.08, 0.20},
         {0.08, 0.15, 0.80},
         {-0.04, 0.18, 0.85},
         {0.05, 0.12, 0.78}},
        // wheelbase
        {{0.06, 0.03, 0.70},
         {0.05, 0.03, -0.75},
         {-0.04, 0.10, 0.35},
         {0.06, -0.06, -0.30},
         {0.03, 0.05, 0.15},
         {-0.02, 0.08, 0.12},
         {0.04, 0.06, -0.18}}};

    std::vector<MatrixX3d> raw;
    for (int j = 0; j < n_modes; ++j)
    {
        MatrixX3d V = MatrixX3d::Zero(14, 3);
        for (int p = 0; p < 7; ++p)
        {
            const auto& [l, r] = prior.symmetry_pairs[static_cast<size_t>(p)];
            const double* d = mode_table[j][p];
            V.row(r) = Vector3d(d[0], d[1], d[2]).transpose();
            V.row(l) = Vector3d(-d[0], d[1], d[2]).transpose();
        }
        raw.push_back(std::move(V));
    }

    // Gram-Schmidt in the flattened 42-dim space.
    std::vector<Eigen::VectorXd> ortho;
    for (const auto& V : raw)
    {
        Eigen::VectorXd v = flatten(V);
        for (const auto& u : ortho)
            v -= u.dot(v) * u;
        const double n = v.norm();
        if (n > 1e-12)
            ortho.push_back(v / n);
    }
    prior.basis.clear();
    for (const auto& u : ortho)
        prior.basis.push_back(unflatten(u));

    const double eig_all[5] = {0.030, 0.018, 0.010, 0.006, 0.004}; // m^2 per mode
    prior.eigenvalues.resize(static_cast<int>(prior.basis.size()));
    for (int j = 0; j < prior.eigenvalues.size(); ++j)
        prior.eigenvalues[j] = eig_all[j];
    prior.sigma2 = 0.0;

    prior.validate();
    return prior;
}

} // namespace carshape
