/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: include/carshape/energy_rows.hpp
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

// Internal residual-row representation shared between the energy terms and the
// shape-adjustment solver. Each energy is a sum of squared rows; a row carries
// its value together with sparse derivatives w.r.t. shape vertices and plane
// parameters (flat index 4*f + {0,1,2} for n, 4*f + 3 for d).

#include "carshape/energy.hpp"

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace carshape::detail {

struct Row
{
    double r = 0.0;
    std::vector<std::pair<int, Eigen::RowVector3d>> dX;
    std::vector<std::pair<int, double>> dP;
};

void add_reproj_rows(std::vector<Row>& rows, const MatrixX3d& shape, const QuatPose& pose,
                     std::span<const KeypointObservation> obs, const Intrinsics& K,
                     const Eigen::VectorXd& weights, double scale, double depth_eps,
                     double depth_barrier);

void add_planar_rows(std::vector<Row>& rows, const MatrixX3d& shape, const QuadMesh& topology,
                     std::span<const Plane> planes, double mu_f,
                     const std::optional<Vector3d>& ground_normal,
                     const std::vector<bool>& ground_parallel, double rect_weight, double scale);

void add_sym_rows(std::vector<Row>& rows, const MatrixX3d& shape,
                  std::span<const std::pair<int, int>> pairs, const Plane& medial, double scale);

void add_dim_rows(std::vector<Row>& rows, const MatrixX3d& shape, const Vector3d& dim_priors,
                  double mu_l, double mu_w, double mu_h, double scale);

void add_lap_rows(std::vector<Row>& rows, const MatrixX3d& shape,
                  const std::vector<std::vector<int>>& neighbors, bool normalized, double scale);

double rows_value(std::span<const Row> rows);

void rows_accumulate_gradients(std::span<const Row> rows, MatrixX3d* d_shape,
                               std::vector<Eigen::Vector4d>* d_planes);

struct EnergyRows
{
    struct Section
    {
        double* slot;
        std::size_t start;
        std::size_t count;
    };
    std::vector<Row> rows;
    std::vector<Section> sections;
    EnergyBreakdown breakdown;
};

/// Build all weighted rows of E_total at the given state (shape instantiated
/// from the prior), filling the per-term breakdown.
EnergyRows build_energy_rows(const ShapePrior& prior, std::span<const KeypointObservation> obs,
                             const Intrinsics& K, const EnergyState& state,
                             const EnergyConfig& config);

} // namespace carshape::detail
