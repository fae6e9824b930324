/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: include/carshape/energy.hpp
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

#include <optional>
#include <span>
#include <vector>

namespace carshape {

/**
 * Hyperparameters of the shape-aware adjustment energy
 *   E_total = eta1 E_reproj + eta2 E_planar + eta3 E_sym + eta4 E_dim + eta5 E_lap.
 */
struct EnergyConfig
{
    double eta1 = 1.0;  // reprojection
    double eta2 = 0.1;  // planarization
    double eta3 = 0.5;  // symmetrization
    double eta4 = 0.05; // dimension priors
    double eta5 = 0.05; // Laplacian smoothing

    double mu_f = 1.0;        // unit-normal penalty inside E_planar
    double rect_weight = 0.1; // rectangularity penalty inside E_planar
    double mu_l = 1.0, mu_w = 1.0, mu_h = 1.0;
    std::optional<Vector3d> ground_normal = Vector3d(0.0, 1.0, 0.0);

    int irls_rounds = 5;
    int nls_max_iters = 100;
    double nls_tol = 1e-12;

    double depth_eps = 1e-6;
    double depth_barrier = 1e4;
    bool normalized_laplacian = true; // false: literal unnormalized exp(-d^2) weights

    IrlsConfig irls; // weight-update hyperparameters, reused from the pose stage

    void validate() const;
};

struct EnergyBreakdown
{
    double reproj = 0.0;
    double planar = 0.0;
    double sym = 0.0;
    double dim = 0.0;
    double lap = 0.0;
    double total = 0.0;
};

/**
 * Weighted reprojection energy over visible observations:
 * sum_i w_i^2 |project(X_i) - uv_i|^2, with a finite depth barrier instead of
 * an exception for points behind the camera. Optional gradient w.r.t. shape.
 */
double e_reproj(const MatrixX3d& shape, const QuatPose& pose,
                std::span<const KeypointObservation> obs, const Intrinsics& K,
                const Eigen::VectorXd& weights, MatrixX3d* d_shape = nullptr,
                double depth_eps = 1e-6, double depth_barrier = 1e4);

/**
 * Planarization energy: per-face point-to-plane terms, the squared unit-normal
 * penalty mu_f (1 - n.n)^2, rectangularity of adjacent edges, and (for faces
 * flagged ground-parallel) the squared sine between the face normal and the
 * ground normal.
 */
double e_planar(const MatrixX3d& shape, const QuadMesh& topology, std::span<const Plane> planes,
                double mu_f, const std::optional<Vector3d>& ground_normal,
                const std::vector<bool>& ground_parallel, double rect_weight,
                MatrixX3d* d_shape = nullptr, std::vector<Eigen::Vector4d>* d_planes = nullptr);

/// Symmetrization energy: reflect each right keypoint across the medial plane
/// and penalize the gap to its left partner. The reflection term
/// X_r + 2 (d - n.X_r) n treats the plane as { n.X = d }; medial planes are
/// stored canonically with d = 0, where both plane conventions coincide.
double e_sym(const MatrixX3d& shape, std::span<const std::pair<int, int>> pairs,
             const Plane& medial, MatrixX3d* d_shape = nullptr);

/// Dimension regularizer on the canonical-frame axis-aligned extents.
double e_dim(const MatrixX3d& shape, const Vector3d& dim_priors, double mu_l, double mu_w,
             double mu_h, MatrixX3d* d_shape = nullptr);

/// Laplacian regularizer with Gaussian edge weights (normalized per vertex by
/// default; `normalized = false` gives the raw exp(-d^2) weights).
double e_lap(const MatrixX3d& shape, const std::vector<std::vector<int>>& neighbors,
             MatrixX3d* d_shape = nullptr, bool normalized = true);

/// Overload deriving the neighborhoods from a quad mesh; throws on isolated vertices.
double e_lap(const MatrixX3d& shape, const QuadMesh& topology, MatrixX3d* d_shape = nullptr,
             bool normalized = true);

/// Optimization state of one instance: basis coefficients plus per-face planes.
struct EnergyState
{
    LatentCoeffs lambda;
    std::vector<Plane> planes;
    Eigen::VectorXd weights; // per keypoint, used by the reprojection term
    QuatPose pose;           // held fixed
};

/**
 * Total adjustment energy with the shape expressed through the prior basis.
 * The optional gradient is with respect to the packed variable vector
 * [lambda; n_0; d_0; ...; n_{F-1}; d_{F-1}].
 */
double e_total(const ShapePrior& prior, std::span<const KeypointObservation> obs,
               const Intrinsics& K, const EnergyState& state, const EnergyConfig& config,
               Eigen::VectorXd* grad = nullptr, EnergyBreakdown* breakdown = nullptr);

/// Packed variable layout helpers shared with the solver.
Eigen::VectorXd pack_energy_state(const EnergyState& state);
void unpack_energy_state(const Eigen::VectorXd& x, EnergyState& state);

} // namespace carshape
