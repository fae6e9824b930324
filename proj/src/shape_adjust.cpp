/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: src/shape_adjust.cpp
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
#include "carshape/shape_adjust.hpp"

#include "carshape/energy_rows.hpp"
#include "carshape/lm.hpp"

#include <algorithm>
#include <cmath>

namespace carshape {

namespace {

// Dense Jacobian of the energy rows w.r.t. the packed state [lambda; planes].
void rows_to_system(const detail::EnergyRows& built, const ShapePrior& prior, int N, int F,
                    Eigen::VectorXd& r, Eigen::MatrixXd* J)
{
    const int n_rows = static_cast<int>(built.rows.size());
    r.resize(n_rows);
    if (J)
        J->setZero(n_rows, N + 4 * F);
    for (int i = 0; i < n_rows; ++i)
    {
        const auto& row = built.rows[static_cast<size_t>(i)];
        r[i] = row.r;
        if (!J)
            continue;
        for (const auto& [v, g] : row.dX)
            for (int j = 0; j < N; ++j)
                (*J)(i, j) += g.dot(prior.basis[static_cast<size_t>(j)].row(v));
        for (const auto& [pid, g] : row.dP)
            (*J)(i, N + pid) += g;
    }
}

} // namespace

std::vector<Plane> initial_planes(const MatrixX3d& shape, const QuadMesh& topology)
{
    std::vector<Plane> planes;
    planes.reserve(topology.faces.size());
    for (const auto& face : topology.faces)
    {
        MatrixX3d pts(4, 3);
        for (int k = 0; k < 4; ++k)
            pts.row(k) = shape.row(face[static_cast<size_t>(k)]);
        planes.push_back(fit_plane(pts));
    }
    return planes;
}

InstanceReconstruction shape_adjust(const ShapePrior& prior,
                                    std::span<const KeypointObservation> obs, const QuatPose& pose,
                                    const Intrinsics& K, const EnergyConfig& config,
                                    const std::optional<Eigen::VectorXd>& initial_weights)
{
    config.validate();
    prior.validate();
    const int Kp = prior.keypoint_count();
    const int N = prior.basis_size();
    const int F = static_cast<int>(prior.topology.faces.size());

    EnergyState state;
    state.pose = pose;
    state.lambda = LatentCoeffs::Zero(N);
    state.planes = initial_planes(prior.mean, prior.topology);

    if (initial_weights)
    {
        if (initial_weights->size() != Kp)
            throw DegenerateInputError("shape_adjust: initial weight vector size mismatch");
        state.weights = *initial_weights;
    }
    else
    {
        const Eigen::VectorXd w_vis =
            visibility_prior(prior.mean, prior.topology, pose, config.irls.v_occ);
        state.weights = Eigen::VectorXd::Zero(Kp);
        for (const auto& o : obs)
            if (o.index >= 0 && o.index < Kp && o.uv.allFinite())
                state.weights[o.index] = weight_init(std::clamp(o.w_cnn, 0.0, 1.0),
                                                     w_vis[o.index], config.irls.mu0,
                                                     config.irls.weight_floor);
    }

    InstanceReconstruction rec;
    e_total(prior, obs, K, state, config, nullptr, &rec.energy_initial);

    auto solve_round = [&](std::vector<double>& costs) {
        Eigen::VectorXd x = pack_energy_state(state);
        LmOptions lm;
        lm.max_iters = config.nls_max_iters;
        lm.step_tol = config.nls_tol;
        lm.cost_floor = 0.0;
        auto fn = [&](const Eigen::VectorXd& xi, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
            EnergyState s = state;
            unpack_energy_state(xi, s);
            const auto built = detail::build_energy_rows(prior, obs, K, s, config);
            rows_to_system(built, prior, N, F, r, J);
        };
        const LmSummary summary = lm_minimize(fn, x, lm);
        unpack_energy_state(x, state);
        costs = summary.cost_history;
        return summary;
    };

    // Mirror of the pose-stage error normalization: invert so that the weight
    // decreases with increasing reprojection error.
    auto update_weights = [&]() {
        const MatrixX3d shape = instantiate(prior, state.lambda);
        const Eigen::VectorXd w_vis =
            visibility_prior(shape, prior.topology, pose, config.irls.v_occ);
        const Matrix3d R = pose.rotation();
        Eigen::VectorXd err = Eigen::VectorXd::Zero(Kp);
        std::vector<bool> active(static_cast<size_t>(Kp), false);
        for (const auto& o : obs)
        {
            if (!o.visible || o.index < 0 || o.index >= Kp || !o.uv.allFinite())
                continue;
            const Vector3d Xc = R * shape.row(o.index).transpose() + pose.t;
            const Vector2d uv = project_guarded(Xc, K, config.depth_eps, config.depth_barrier);
            err[o.index] = (uv - o.uv).norm();
            active[static_cast<size_t>(o.index)] = true;
        }
        double max_err = 0.0;
        for (int i = 0; i < Kp; ++i)
            if (active[static_cast<size_t>(i)])
                max_err = std::max(max_err, err[i]);
        for (int i = 0; i < Kp; ++i)
        {
            if (!active[static_cast<size_t>(i)])
                continue;
            const double e_norm = (max_err > 1e-12) ? std::clamp(err[i] / max_err, 0.0, 1.0) : 0.0;
            const double e_arg = config.irls.literal_error_term ? e_norm : 1.0 - e_norm;
            state.weights[i] = weight_update(state.weights[i], e_arg, w_vis[i], config.irls.mu1,
                                             config.irls.mu2, config.irls.weight_floor);
        }
    };

    bool any_round_failed = false;
    for (int round = 0; round < config.irls_rounds; ++round)
    {
        std::vector<double> costs;
        const LmSummary summary = solve_round(costs);
        rec.round_costs.push_back(std::move(costs));
        if (summary.final_cost > summary.initial_cost + 1e-12)
            any_round_failed = true;
        update_weights();
    }

    rec.lambda = state.lambda;
    rec.planes = state.planes;
    rec.keypoints3d = instantiate(prior, state.lambda);
    rec.kp_weights = state.weights;
    e_total(prior, obs, K, state, config, nullptr, &rec.energy);
    rec.diverged = any_round_failed ||
                   rec.energy.total > rec.energy_initial.total * (1.0 + 1e-9) + 1e-12;
    return rec;
}

} // namespace carshape
