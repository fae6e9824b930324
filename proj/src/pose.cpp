/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: src/pose.cpp
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
#include "carshape/pose.hpp"

#include "carshape/lm.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace carshape {

namespace {

double clamp01(double x)
{
    return std::clamp(x, 0.0, 1.0);
}

struct UsedObservation
{
    int index;
    Vector2d uv;
    double w;
};

std::vector<UsedObservation> usable_observations(std::span<const KeypointObservation> obs,
                                                 const Eigen::VectorXd& weights, double floor)
{
    std::vector<UsedObservation> used;
    for (const auto& o : obs)
    {
        if (o.index < 0 || o.index >= weights.size() || !o.uv.allFinite())
            continue;
        const double w = weights[o.index];
        if (w > floor)
            used.push_back({o.index, o.uv, w});
    }
    return used;
}

// Closed-form weighted least squares for t given R, on the depth-multiplied
// (algebraic) residual, which is linear in t.
std::optional<Vector3d> translation_seed(const MatrixX3d& shape,
                                         const std::vector<UsedObservation>& used,
                                         const Intrinsics& K, const Matrix3d& R)
{
    Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    for (const auto& o : used)
    {
        const Vector3d Y = R * shape.row(o.index).transpose();
        const double du = o.uv.x() - K.cx;
        const double dv = o.uv.y() - K.cy;
        Eigen::Matrix<double, 2, 3> Ai;
        Ai << K.fx, K.skew, -du, 0.0, K.fy, -dv;
        const Vector2d bi{K.fx * Y.x() + K.skew * Y.y() - du * Y.z(), K.fy * Y.y() - dv * Y.z()};
        const double w2 = o.w * o.w;
        A += w2 * Ai.transpose() * Ai;
        b += w2 * Ai.transpose() * (-bi);
    }
    const Eigen::LDLT<Eigen::Matrix3d> ldlt(A);
    if (ldlt.info() != Eigen::Success)
        return std::nullopt;
    const Vector3d t = ldlt.solve(b);
    if (!t.allFinite())
        return std::nullopt;
    return t;
}

// Depth heuristic: place the shape so its centroid sits on the mean viewing
// ray at the depth where the model radius matches the observed pixel radius.
Vector3d translation_heuristic(const MatrixX3d& shape, const std::vector<UsedObservation>& used,
                               const Intrinsics& K, const Matrix3d& R)
{
    Vector3d centroid = Vector3d::Zero();
    Vector2d uv_mean = Vector2d::Zero();
    double wsum = 0.0;
    for (const auto& o : used)
    {
        centroid += o.w * shape.row(o.index).transpose();
        uv_mean += o.w * o.uv;
        wsum += o.w;
    }
    centroid /= wsum;
    uv_mean /= wsum;

    double r3 = 0.0, r2 = 0.0;
    for (const auto& o : used)
    {
        r3 += o.w * (shape.row(o.index).transpose() - centroid).squaredNorm();
        const Vector2d n{(o.uv.x() - K.cx) / K.fx, (o.uv.y() - K.cy) / K.fy};
        const Vector2d nm{(uv_mean.x() - K.cx) / K.fx, (uv_mean.y() - K.cy) / K.fy};
        r2 += o.w * (n - nm).squaredNorm();
    }
    const double depth = (r2 > 1e-12) ? std::sqrt(r3 / r2) : 10.0;
    const Vector3d dir{(uv_mean.x() - K.cx) / K.fx, (uv_mean.y() - K.cy) / K.fy, 1.0};
    return depth * dir - R * centroid;
}

// The 24 rotations of the chiral octahedral group (signed permutations with
// determinant +1), in a fixed deterministic order.
const std::vector<Matrix3d>& octahedral_rotations()
{
    static const std::vector<Matrix3d> rots = [] {
        std::vector<Matrix3d> out;
        const int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
        for (const auto& p : perms)
            for (int signs = 0; signs < 8; ++signs)
            {
                Matrix3d R = Matrix3d::Zero();
                for (int row = 0; row < 3; ++row)
                    R(row, p[row]) = (signs >> row) & 1 ? -1.0 : 1.0;
                if (R.determinant() > 0.5)
                    out.push_back(R);
            }
        return out;
    }();
    return rots;
}

struct PnpProblem
{
    const MatrixX3d& shape;
    const std::vector<UsedObservation>& used;
    const Intrinsics& K;
    const PnpOptions& options;

    void operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd* J) const
    {
        const Vector4d q = x.head<4>();
        const Vector3d t = x.tail<3>();
        const Matrix3d R = quat_to_rotation(q);
        Matrix3d dR[4];
        if (J)
        {
            for (int k = 0; k < 4; ++k)
                dR[k] = quat_to_rotation_jacobian(q, k);
            J->resize(2 * static_cast<int>(used.size()), 7);
        }
        r.resize(2 * static_cast<int>(used.size()));
        for (size_t i = 0; i < used.size(); ++i)
        {
            const auto& o = used[i];
            const Vector3d X = shape.row(o.index).transpose();
            const Vector3d Xc = R * X + t;
            Eigen::Matrix<double, 2, 3> dpi;
            const Vector2d uv =
                project_guarded(Xc, K, options.depth_eps, options.depth_barrier, J ? &dpi : nullptr);
            r.segment<2>(2 * static_cast<int>(i)) = o.w * (uv - o.uv);
            if (J)
            {
                for (int k = 0; k < 4; ++k)
                    J->block<2, 1>(2 * static_cast<int>(i), k) = o.w * (dpi * (dR[k] * X));
                J->block<2, 3>(2 * static_cast<int>(i), 4) = o.w * dpi;
            }
        }
    }
};

double refine_from(const MatrixX3d& shape, const std::vector<UsedObservation>& used,
                   const Intrinsics& K, const PnpOptions& options, QuatPose& pose)
{
    Eigen::VectorXd x(7);
    x.head<4>() = pose.q.normalized();
    x.tail<3>() = pose.t;
    LmOptions lm;
    lm.max_iters = options.lm_max_iters;
    lm.cost_floor = 1e-22;
    const LmSummary s = lm_minimize(PnpProblem{shape, used, K, options}, x, lm);
    pose.q = x.head<4>();
    pose.t = x.tail<3>();
    return s.final_cost;
}

} // namespace

void IrlsConfig::validate() const
{
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in01(mu0) || !in01(mu1) || !in01(mu2))
        throw DegenerateInputError("IrlsConfig: mu parameters must lie in [0, 1]");
    if (max_iters < 1)
        throw DegenerateInputError("IrlsConfig: max_iters must be >= 1");
    if (!(weight_floor > 0.0) || weight_floor >= 1.0)
        throw DegenerateInputError("IrlsConfig: weight_floor must lie in (0, 1)");
}

double weight_init(double w_cnn, double w_vis, double mu0, double weight_floor)
{
    const double w = mu0 * w_cnn + (1.0 - mu0) * w_vis;
    return std::clamp(w, weight_floor, 1.0);
}

double weight_update(double w_prev, double e, double w_vis, double mu1, double mu2,
                     double weight_floor)
{
    const double w = mu1 * w_prev + (1.0 - mu1) * (mu2 * e + (1.0 - mu2) * w_vis);
    return std::clamp(w, weight_floor, 1.0);
}

Eigen::VectorXd visibility_prior(const MatrixX3d& shape, const QuadMesh& topology,
                                 const QuatPose& pose, double v_occ)
{
    const int K = static_cast<int>(shape.rows());
    const Matrix3d R = pose.rotation();
    const Vector3d cam = camera_center(pose);
    Eigen::VectorXd w = Eigen::VectorXd::Ones(K);
    for (int i = 0; i < K; ++i)
    {
        const Vector3d X = shape.row(i).transpose();
        if ((R * X + pose.t).z() <= 0.0)
        {
            w[i] = v_occ;
            continue;
        }
        bool occluded = false;
        for (const auto& f : topology.faces)
        {
            if (f[0] == i || f[1] == i || f[2] == i || f[3] == i)
                continue;
            const Vector3d v0 = shape.row(f[0]).transpose();
            const Vector3d v1 = shape.row(f[1]).transpose();
            const Vector3d v2 = shape.row(f[2]).transpose();
            const Vector3d v3 = shape.row(f[3]).transpose();
            if (segment_hits_triangle(cam, X, v0, v1, v2) ||
                segment_hits_triangle(cam, X, v0, v2, v3))
            {
                occluded = true;
                break;
            }
        }
        if (occluded)
            w[i] = v_occ;
    }
    return w;
}

double pnp_cost(const MatrixX3d& shape, std::span<const KeypointObservation> obs,
                const Intrinsics& K, const Eigen::VectorXd& weights, const QuatPose& pose,
                const PnpOptions& options)
{
    const auto used = usable_observations(obs, weights, options.weight_floor);
    const Matrix3d R = pose.rotation();
    double cost = 0.0;
    for (const auto& o : used)
    {
        const Vector3d Xc = R * shape.row(o.index).transpose() + pose.t;
        const Vector2d uv = project_guarded(Xc, K, options.depth_eps, options.depth_barrier);
        cost += o.w * o.w * (uv - o.uv).squaredNorm();
    }
    return cost;
}

QuatPose pnp_weighted(const MatrixX3d& shape, std::span<const KeypointObservation> obs,
                      const Intrinsics& K, const Eigen::VectorXd& weights,
                      const std::optional<QuatPose>& init, const PnpOptions& options)
{
    K.validate();
    if (weights.size() != shape.rows())
        throw DegenerateInputError("pnp_weighted: weight vector size must match shape rows");
    const auto used = usable_observations(obs, weights, options.weight_floor);
    if (used.size() < 4)
        throw TooFewPointsError("pnp_weighted: need at least 4 usable observations, have " +
                                std::to_string(used.size()));

    // Reject collinear point configurations.
    {
        Vector3d mean = Vector3d::Zero();
        for (const auto& o : used)
            mean += shape.row(o.index).transpose();
        mean /= static_cast<double>(used.size());
        Matrix3d cov = Matrix3d::Zero();
        for (const auto& o : used)
        {
            const Vector3d d = shape.row(o.index).transpose() - mean;
            cov += d * d.transpose();
        }
        const Eigen::JacobiSVD<Matrix3d> svd(cov);
        if (svd.singularValues()(1) <= 1e-10 * std::max(svd.singularValues()(0), 1e-300))
            throw DegenerateConfigError("pnp_weighted: observed shape points are collinear");
    }

    double best_cost = std::numeric_limits<double>::infinity();
    QuatPose best;
    bool have_best = false;
    auto consider = [&](QuatPose seed) {
        const double cost = refine_from(shape, used, K, options, seed);
        if (!have_best || cost < best_cost)
        {
            best_cost = cost;
            best = seed;
            have_best = true;
        }
    };

    if (init)
        consider(*init);
    if (options.multi_start || !init)
    {
        for (const Matrix3d& R : octahedral_rotations())
        {
            QuatPose seed = QuatPose::from_rt(R, Vector3d::Zero());
            auto t = translation_seed(shape, used, K, R);
            bool ok = t.has_value();
            if (ok)
            {
                // require a usable depth, otherwise fall back to the heuristic
                double zmin = std::numeric_limits<double>::infinity();
                for (const auto& o : used)
                    zmin = std::min(zmin, (R * shape.row(o.index).transpose() + *t).z());
                ok = zmin > 0.0;
            }
            seed.t = ok ? *t : translation_heuristic(shape, used, K, R);
            consider(seed);
        }
    }

    best = best.canonical();
    return best;
}

PoseResult irls_pose(const ShapePrior& prior, std::span<const KeypointObservation> obs,
                     const Intrinsics& K, const IrlsConfig& config,
                     const std::optional<QuatPose>& init)
{
    config.validate();
    const int Kp = prior.keypoint_count();
    const MatrixX3d& shape = prior.mean;

    PnpOptions pnp_opts;
    pnp_opts.weight_floor = 0.0;

    std::vector<bool> observed(static_cast<size_t>(Kp), false);
    for (const auto& o : obs)
    {
        if (o.index < 0 || o.index >= Kp)
            throw DegenerateInputError("irls_pose: observation index out of range");
        if (o.uv.allFinite())
            observed[static_cast<size_t>(o.index)] = true;
    }

    // The visibility prior needs some pose. Use the provided initialization,
    // otherwise bootstrap one from a detector-confidence-only solve.
    QuatPose vis_pose;
    if (init)
        vis_pose = *init;
    else
    {
        Eigen::VectorXd w_boot = Eigen::VectorXd::Zero(Kp);
        for (const auto& o : obs)
            if (o.uv.allFinite())
                w_boot[o.index] =
                    weight_init(clamp01(o.w_cnn), 1.0, config.mu0, config.weight_floor);
        vis_pose = pnp_weighted(shape, obs, K, w_boot, std::nullopt, pnp_opts);
    }
    Eigen::VectorXd w_vis = visibility_prior(shape, prior.topology, vis_pose, config.v_occ);

    Eigen::VectorXd weights = Eigen::VectorXd::Zero(Kp);
    for (const auto& o : obs)
        if (o.uv.allFinite())
            weights[o.index] =
                weight_init(clamp01(o.w_cnn), w_vis[o.index], config.mu0, config.weight_floor);

    PoseResult result;
    result.weight_history.push_back(weights);
    QuatPose pose = pnp_weighted(shape, obs, K, weights, init ? init : std::optional<QuatPose>(vis_pose),
                                 pnp_opts);

    auto reprojection_errors = [&](const QuatPose& p) {
        Eigen::VectorXd err = Eigen::VectorXd::Zero(Kp);
        const Matrix3d R = p.rotation();
        for (const auto& o : obs)
        {
            if (!o.uv.allFinite())
                continue;
            const Vector3d Xc = R * shape.row(o.index).transpose() + p.t;
            const Vector2d uv = project_guarded(Xc, K, pnp_opts.depth_eps, pnp_opts.depth_barrier);
            err[o.index] = (uv - o.uv).norm();
        }
        return err;
    };

    for (int iter = 0; iter < config.max_iters; ++iter)
    {
        w_vis = visibility_prior(shape, prior.topology, pose, config.v_occ);
        const Eigen::VectorXd err = reprojection_errors(pose);
        double max_err = 0.0;
        for (int i = 0; i < Kp; ++i)
            if (observed[static_cast<size_t>(i)])
                max_err = std::max(max_err, err[i]);
        for (int i = 0; i < Kp; ++i)
        {
            if (!observed[static_cast<size_t>(i)])
                continue;
            const double e_norm = (max_err > 1e-12) ? clamp01(err[i] / max_err) : 0.0;
            const double e_arg = config.literal_error_term ? e_norm : 1.0 - e_norm;
            weights[i] = weight_update(weights[i], e_arg, w_vis[i], config.mu1, config.mu2,
                                       config.weight_floor);
        }
        result.weight_history.push_back(weights);
        pose = pnp_weighted(shape, obs, K, weights, pose, pnp_opts);
    }

    result.pose = pose.canonical();
    result.weights = weights;
    result.residuals = reprojection_errors(pose);
    result.iterations = config.max_iters;
    result.final_cost = pnp_cost(shape, obs, K, weights, pose, pnp_opts);
    return result;
}

} // namespace carshape
