/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: include/carshape/prior.hpp
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

#include <Eigen/Core>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace carshape {

/// Basis coefficients of a shape instance.
using LatentCoeffs = Eigen::VectorXd;

/**
 * Category-level shape prior: mean 3D keypoints, a low-rank deformation basis,
 * and the structural metadata (mesh topology, bilateral symmetry, dimension
 * priors) that the adjustment energies consume.
 *
 * Basis vectors are orthonormal in the flattened 3K space; per-direction
 * variances live in `eigenvalues` (nonincreasing). The canonical object frame
 * is x lateral (medial plane x = 0, left keypoints negative), y up, z forward.
 */
struct ShapePrior
{
    std::vector<std::string> names;            // K keypoint names
    MatrixX3d mean;                            // K x 3, meters
    std::vector<MatrixX3d> basis;              // N deformation directions, each K x 3
    Eigen::VectorXd eigenvalues;               // N variances, nonincreasing
    double sigma2 = 0.0;                       // observation noise of the learning model, px^2
    QuadMesh topology;
    std::vector<bool> ground_parallel;         // per face: constrain normal to the ground normal
    std::vector<std::pair<int, int>> symmetry_pairs; // (left index, right index)
    std::vector<int> on_plane;                 // keypoints on the medial plane
    Plane medial_plane{Vector3d(1, 0, 0), 0.0};
    Vector3d dim_priors{0.0, 0.0, 0.0};        // (length, width, height) in meters

    int keypoint_count() const { return static_cast<int>(mean.rows()); }
    int basis_size() const { return static_cast<int>(basis.size()); }

    int keypoint_index(const std::string& name) const; // -1 if unknown
    void validate() const;
};

/// One 2D keypoint annotation slot of a training instance.
struct Annotation
{
    Vector2d uv{0.0, 0.0};
    bool visible = false;
};

struct AnnotationInstance
{
    std::string id;
    std::vector<Annotation> keypoints; // size K, aligned with the name table
};

/**
 * A 2D keypoint-annotated training set. All instances share the keypoint name
 * table; visibility masks mark the missing annotations.
 */
struct AnnotationSet
{
    std::vector<std::string> names;
    std::vector<AnnotationInstance> instances;

    int keypoint_count() const { return static_cast<int>(names.size()); }
    int instance_count() const { return static_cast<int>(instances.size()); }

    /// Indices of instances with fewer than `min_visible` visible keypoints.
    std::vector<int> deficient_instances(int min_visible) const;

    void validate(int min_visible = 4) const;
};

/// Instantiate a shape from the prior: mean + sum_j lambda_j * V_j.
MatrixX3d instantiate(const ShapePrior& prior, const LatentCoeffs& coeffs);

/// Fraction of total variance captured by the first n basis directions.
double variance_explained(const ShapePrior& prior, int n);

/// Axis-aligned extents (length, width, height) of a shape in the canonical frame.
Vector3d shape_extents(const MatrixX3d& shape);

/// Largest pairwise distance between keypoints.
double shape_diameter(const MatrixX3d& shape);

/**
 * Built-in 14-keypoint car template: 4 wheels, 2 headlights, 2 taillights,
 * 2 side-view mirrors, 4 rooftop corners, with quad-mesh topology, symmetry
 * pairs and `n_modes` smooth symmetric deformation modes (n_modes <= 5).
 */
ShapePrior default_car_prior(int n_modes = 5);

/// Name table of the default car template.
const std::vector<std::string>& default_keypoint_names();

} // namespace carshape
