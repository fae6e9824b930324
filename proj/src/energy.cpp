/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: src/energy.cpp
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
#include "carshape/energy.hpp"

#include "carshape/energy_rows.hpp"

#include <cmath>

namespace carshape {

namespace detail {

void add_reproj_rows(std::vector<Row>& rows, const MatrixX3d& shape, const QuatPose& pose,
                     std::span<const KeypointObservation> obs, const Intrinsics& K,
                     const Eigen::VectorXd& weights, double scale, double depth_eps,
                     double depth_barrier)
{
    if (scale == 0.0)
        return;
    const Matrix3d R = pose.rotation();
    for (const auto& o : obs)
    {
        if (!o.visible || o.index < 0 || o.index >= shape.rows() || !o.uv.allFinite())
            continue;
        const double w = (o.index < weights.size()) ? weights[o.index] : 1.0;
        if (w == 0.0)
            continue;
        const Vector3d Xc = R * shape.row(o.index).transpose() + pose.t;
        Eigen::Matrix<double, 2, 3> dpi;
        const Vector2d uv = project_guarded(Xc, K, depth_eps, depth_barrier, &dpi);
        const Eigen::Matrix<double, 2, 3> dX = dpi * R;
        for (int k = 0; k < 2; ++k)
        {
            Row row;
            row.r = scale * w * (uv[k] - o.uv[k]);
            row.dX.emplace_back(o.index, scale * w * dX.row(k));
            rows.push_back(std::move(row));
        }
    }
}

void add_planar_rows(std::vector<Row>& rows, const MatrixX3d& shape, const QuadMesh& topology,
                     std::span<const Plane> planes, double mu_f,
                     const std::optional<Vector3d>& ground_normal,
                     const std::vector<bool>& ground_parallel, double rect_weight, double scale)
{
    if (scale == 0.0)
        return;
    if (planes.size() != topology.faces.size())
        throw DegenerateInputError("e_planar: one plane required per face");

    const double s_norm = scale * std::sqrt(std::max(mu_f, 0.0));
    const double s_rect = scale * std::sqrt(std::max(rect_weight, 0.0));

    for (size_t f = 0; f < topology.faces.size(); ++f)
    {
        const auto& face = topology.faces[f];
        const Plane& pl = planes[f];
        const int base = 4 * static_cast<int>(f);

        // point-to-plane residuals
        for (int v : face)
        {
            const Vector3d X = shape.row(v).transpose();
            Row row;
            row.r = scale * (pl.n.dot(X) + pl.d);
            row.dX.emplace_back(v, scale * pl.n.transpose());
            for (int k = 0; k < 3; ++k)
                row.dP.emplace_back(base + k, scale * X[k]);
            row.dP.emplace_back(base + 3, scale);
            rows.push_back(std::move(row));
        }

        // unit-normal penalty (1 - n.n)
        if (s_norm > 0.0)
        {
            Row row;
            row.r = s_norm * (1.0 - pl.n.squaredNorm());
            for (int k = 0; k < 3; ++k)
                row.dP.emplace_back(base + k, -2.0 * s_norm * pl.n[k]);
            rows.push_back(std::move(row));
        }

        // rectangularity: inner products of normalized adjacent edge directions
        if (s_rect > 0.0)
        {
            for (int k = 0; k < 4; ++k)
            {
                const int p = face[k];
                const int q = face[(k + 1) % 4];
                const int r = face[(k + 2) % 4];
                const Vector3d u = shape.row(q).transpose() - shape.row(p).transpose();
                const Vector3d v = shape.row(r).transpose() - shape.row(q).transpose();
                const double nu = u.norm(), nv = v.norm();
                if (nu < 1e-12 || nv < 1e-12)
                    continue;
                const Vector3d uh = u / nu, vh = v / nv;
                const double dot = uh.dot(vh);
                const Eigen::RowVector3d du = ((vh - dot * uh) / nu).transpose();
                const Eigen::RowVector3d dv = ((uh - dot * vh) / nv).transpose();
                Row row;
                row.r = s_rect * dot;
                row.dX.emplace_back(q, s_rect * (du - dv));
                row.dX.emplace_back(p, -s_rect * du);
                row.dX.emplace_back(r, s_rect * dv);
                rows.push_back(std::move(row));
            }
        }

        // ground-parallel normals: components of normalize(n) x normalize(g)
        if (ground_normal && f < ground_parallel.size() && ground_parallel[f])
        {
            const Vector3d g = ground_normal->normalized();
            const double nn = pl.n.norm();
            if (nn > 1e-12)
            {
                const Vector3d nh = pl.n / nn;
                const Vector3d c = nh.cross(g);
                // d(n x g / |n|)/dn = -[g]_x / |n| - (n x g) nh^T / |n|^2
                Matrix3d gx;
                gx << 0, -g.z(), g.y(), g.z(), 0, -g.x(), -g.y(), g.x(), 0;
                const Matrix3d dc = -gx / nn - (pl.n.cross(g) / (nn * nn)) * nh.transpose();
                for (int k = 0; k < 3; ++k)
                {
                    Row row;
                    row.r = scale * c[k];
                    for (int j = 0; j < 3; ++j)
                        row.dP.emplace_back(base + j, scale * dc(k, j));
                    rows.push_back(std::move(row));
                }
            }
        }
    }
}

void add_sym_rows(std::vector<Row>& rows, const MatrixX3d& shape,
                  std::span<const std::pair<int, int>> pairs, const Plane& medial, double scale)
{
    if (scale == 0.0)
        return;
    const Vector3d n = medial.n;
    const Matrix3d reflect = Matrix3d::Identity() - 2.0 * n * n.transpose();
    for (const auto& [l, r] : pairs)
    {
        const Vector3d Xr = shape.row(r).transpose();
        const Vector3d Xl = shape.row(l).transpose();
        const Vector3d res = Xr + 2.0 * (medial.d - n.dot(Xr)) * n - Xl;
        for (int k = 0; k < 3; ++k)
        {
            Row row;
            row.r = scale * res[k];
            row.dX.emplace_back(r, scale * reflect.row(k));
            Eigen::RowVector3d dl = Eigen::RowVector3d::Zero();
            dl[k] = -scale;
            row.dX.emplace_back(l, dl);
            rows.push_back(std::move(row));
        }
    }
}

void add_dim_rows(std::vector<Row>& rows, const MatrixX3d& shape, const Vector3d& dim_priors,
                  double mu_l, double mu_w, double mu_h, double scale)
{
    if (scale == 0.0)
        return;
    // extents: length along z, width along x, height along y
    const int axis_of[3] = {2, 0, 1};
    const double mu[3] = {mu_l, mu_w, mu_h};
    for (int e = 0; e < 3; ++e)
    {
        const double s = scale * std::sqrt(std::max(mu[e], 0.0));
        if (s == 0.0)
            continue;
        const int axis = axis_of[e];
        int imax = 0, imin = 0;
        shape.col(axis).maxCoeff(&imax);
        shape.col(axis).minCoeff(&imin);
        Row row;
        row.r = s * ((shape(imax, axis) - shape(imin, axis)) - dim_priors[e]);
        Eigen::RowVector3d d = Eigen::RowVector3d::Zero();
        d[axis] = s;
        row.dX.emplace_back(imax, d);
        row.dX.emplace_back(imin, -d);
        rows.push_back(std::move(row));
    }
}

void add_lap_rows(std::vector<Row>& rows, const MatrixX3d& shape,
                  const std::vector<std::vector<int>>& neighbors, bool normalized, double scale)
{
    if (scale == 0.0)
        return;
    const int K = static_cast<int>(shape.rows());
    if (static_cast<int>(neighbors.size()) != K)
        throw DegenerateInputError("e_lap: neighborhood table size mismatch");
    for (int i = 0; i < K; ++i)
    {
        const auto& nbd = neighbors[static_cast<size_t>(i)];
        if (nbd.empty())
            throw DegenerateInputError("e_lap: keypoint " + std::to_string(i) + " has no neighbors");
        const Vector3d Xi = shape.row(i).transpose();

        std::vector<double> w(nbd.size());
        double wsum = 0.0;
        for (size_t a = 0; a < nbd.size(); ++a)
        {
            w[a] = std::exp(-(Xi - shape.row(nbd[a]).transpose()).squaredNorm());
            wsum += w[a];
        }
        if (normalized)
            for (double& x : w)
                x /= wsum;

        Vector3d Xbar = Vector3d::Zero();
        for (size_t a = 0; a < nbd.size(); ++a)
            Xbar += w[a] * shape.row(nbd[a]).transpose();
        const Vector3d res = Xi - Xbar;

        Matrix3d Dii = Matrix3d::Identity();
        std::vector<Matrix3d> Dip(nbd.size());
        for (size_t a = 0; a < nbd.size(); ++a)
        {
            const Vector3d Xp = shape.row(nbd[a]).transpose();
            if (normalized)
            {
                Dii += 2.0 * w[a] * Xp * (Xbar - Xp).transpose();
                Dip[a] = -w[a] * Matrix3d::Identity() -
                         2.0 * w[a] * (Xp - Xbar) * (Xi - Xp).transpose();
            }
            else
            {
                Dii += 2.0 * w[a] * Xp * (Xi - Xp).transpose();
                Dip[a] = -w[a] * Matrix3d::Identity() - 2.0 * w[a] * Xp * (Xi - Xp).transpose();
            }
        }

        for (int k = 0; k < 3; ++k)
        {
            Row row;
            row.r = scale * res[k];
            row.dX.emplace_back(i, scale * Dii.row(k));
            for (size_t a = 0; a < nbd.size(); ++a)
                row.dX.emplace_back(nbd[a], scale * Dip[a].row(k));
            rows.push_back(std::move(row));
        }
    }
}

double rows_value(std::span<const Row> rows)
{
    double sum = 0.0;
    for (const auto& row : rows)
        sum += row.r * row.r;
    return sum;
}

void rows_accumulate_gradients(std::span<const Row> rows, MatrixX3d* d_shape,
                               std::vector<Eigen::Vector4d>* d_planes)
{
    for (const auto& row : rows)
    {
        if (d_shape)
            for (const auto& [v, g] : row.dX)
                d_shape->row(v) += 2.0 * row.r * g;
        if (d_planes)
            for (const auto& [pid, g] : row.dP)
                (*d_planes)[static_cast<size_t>(pid / 4)][pid % 4] += 2.0 * row.r * g;
    }
}

} // namespace detail

void EnergyConfig::validate() const
{
    for (double v : {eta1, eta2, eta3, eta4, eta5, mu_f, mu_l, mu_w, mu_h, rect_weight})
        if (v < 0.0)
            throw DegenerateInputError("EnergyConfig: weights must be nonnegative");
    if (irls_rounds < 0)
        throw DegenerateInputError("EnergyConfig: irls_rounds must be >= 0");
    if (nls_max_iters < 1)
        throw DegenerateInputError("EnergyConfig: nls_max_iters must be >= 1");
    irls.validate();
}

double e_reproj(const MatrixX3d& shape, const QuatPose& pose,
                std::span<const KeypointObservation> obs, const Intrinsics& K,
                const Eigen::VectorXd& weights, MatrixX3d* d_shape, double depth_eps,
                double depth_barrier)
{
    std::vector<detail::Row> rows;
    detail::add_reproj_rows(rows, shape, pose, obs, K, weights, 1.0, depth_eps, depth_barrier);
    if (d_shape)
    {
        d_shape->setZero(shape.rows(), 3);
        detail::rows_accumulate_gradients(rows, d_shape, nullptr);
    }
    return detail::rows_value(rows);
}

double e_planar(const MatrixX3d& shape, const QuadMesh& topology, std::span<const Plane> planes,
                double mu_f, const std::optional<Vector3d>& ground_normal,
                const std::vector<bool>& ground_parallel, double rect_weight, MatrixX3d* d_shape,
                std::vector<Eigen::Vector4d>* d_planes)
{
    std::vector<detail::Row> rows;
    detail::add_planar_rows(rows, shape, topology, planes, mu_f, ground_normal, ground_parallel,
                            rect_weight, 1.0);
    if (d_shape)
        d_shape->setZero(shape.rows(), 3);
    if (d_planes)
        d_planes->assign(planes.size(), Eigen::Vector4d::Zero());
    if (d_shape || d_planes)
        detail::rows_accumulate_gradients(rows, d_shape, d_planes);
    return detail::rows_value(rows);
}

double e_sym(const MatrixX3d& shape, std::span<const std::pair<int, int>> pairs,
             const Plane& medial, MatrixX3d* d_shape)
{
    std::vector<detail::Row> rows;
    detail::add_sym_rows(rows, shape, pairs, medial, 1.0);
    if (d_shape)
    {
        d_shape->setZero(shape.rows(), 3);
        detail::rows_accumulate_gradients(rows, d_shape, nullptr);
    }
    return detail::rows_value(rows);
}

double e_dim(const MatrixX3d& shape, const Vector3d& dim_priors, double mu_l, double mu_w,
             double mu_h, MatrixX3d* d_shape)
{
    std::vector<detail::Row> rows;
    detail::add_dim_rows(rows, shape, dim_priors, mu_l, mu_w, mu_h, 1.0);
    if (d_shape)
    {
        d_shape->setZero(shape.rows(), 3);
        detail::rows_accumulate_gradients(rows, d_shape, nullptr);
    }
    return detail::rows_value(rows);
}

double e_lap(const MatrixX3d& shape, const std::vector<std::vector<int>>& neighbors,
             MatrixX3d* d_shape, bool normalized)
{
    std::vector<detail::Row> rows;
    detail::add_lap_rows(rows, shape, neighbors, normalized, 1.0);
    if (d_shape)
    {
        d_shape->setZero(shape.rows(), 3);
        detail::rows_accumulate_gradients(rows, d_shape, nullptr);
    }
    return detail::rows_value(rows);
}

double e_lap(const MatrixX3d& shape, const QuadMesh& topology, MatrixX3d* d_shape, bool normalized)
{
    return e_lap(shape, topology.neighbors(), d_shape, normalized);
}

Eigen::VectorXd pack_energy_state(const EnergyState& state)
{
    const int N = static_cast<int>(state.lambda.size());
    const int F = static_cast<int>(state.planes.size());
    Eigen::VectorXd x(N + 4 * F);
    x.head(N) = state.lambda;
    for (int f = 0; f < F; ++f)
    {
        x.segment<3>(N + 4 * f) = state.planes[static_cast<size_t>(f)].n;
        x[N + 4 * f + 3] = state.planes[static_cast<size_t>(f)].d;
    }
    return x;
}

void unpack_energy_state(const Eigen::VectorXd& x, EnergyState& state)
{
    const int N = static_cast<int>(state.lambda.size());
    const int F = static_cast<int>(state.planes.size());
    state.lambda = x.head(N);
    for (int f = 0; f < F; ++f)
    {
        state.planes[static_cast<size_t>(f)].n = x.segment<3>(N + 4 * f);
        state.planes[static_cast<size_t>(f)].d = x[N + 4 * f + 3];
    }
}

namespace detail {

EnergyRows build_energy_rows(const ShapePrior& prior, std::span<const KeypointObservation> obs,
                             const Intrinsics& K, const EnergyState& state,
                             const EnergyConfig& config)
{
    const MatrixX3d shape = instantiate(prior, state.lambda);
    EnergyRows out;
    auto mark = [&](double* slot) {
        out.sections.push_back({slot, out.rows.size(), 0});
    };
    auto close = [&] { out.sections.back().count = out.rows.size() - out.sections.back().start; };

    mark(&out.breakdown.reproj);
    add_reproj_rows(out.rows, shape, state.pose, obs, K, state.weights, std::sqrt(config.eta1),
                    config.depth_eps, config.depth_barrier);
    close();

    mark(&out.breakdown.planar);
    add_planar_rows(out.rows, shape, prior.topology, state.planes, config.mu_f,
                    config.ground_normal, prior.ground_parallel, config.rect_weight,
                    std::sqrt(config.eta2));
    close();

    mark(&out.breakdown.sym);
    add_sym_rows(out.rows, shape, prior.symmetry_pairs, prior.medial_plane, std::sqrt(config.eta3));
    close();

    mark(&out.breakdown.dim);
    add_dim_rows(out.rows, shape, prior.dim_priors, config.mu_l, config.mu_w, config.mu_h,
                 std::sqrt(config.eta4));
    close();

    mark(&out.breakdown.lap);
    if (config.eta5 > 0.0)
        add_lap_rows(out.rows, shape, prior.topology.neighbors(), config.normalized_laplacian,
                     std::sqrt(config.eta5));
    close();

    for (const auto& sec : out.sections)
        *sec.slot = rows_value(std::span<const Row>(out.rows).subspan(sec.start, sec.count));
    out.breakdown.total = out.breakdown.reproj + out.breakdown.planar + out.breakdown.sym +
                          out.breakdown.dim + out.breakdown.lap;
    return out;
}

} // namespace detail

double e_total(const ShapePrior& prior, std::span<const KeypointObservation> obs,
               const Intrinsics& K, const EnergyState& state, const EnergyConfig& config,
               Eigen::VectorXd* grad, EnergyBreakdown* breakdown)
{
    const auto built = detail::build_energy_rows(prior, obs, K, state, config);
    if (breakdown)
        *breakdown = built.breakdown;
    if (grad)
    {
        const int N = static_cast<int>(state.lambda.size());
        const int F = static_cast<int>(state.planes.size());
        grad->setZero(N + 4 * F);
        for (const auto& row : built.rows)
        {
            for (const auto& [v, g] : row.dX)
                for (int j = 0; j < N; ++j)
                    (*grad)[j] += 2.0 * row.r * g.dot(prior.basis[static_cast<size_t>(j)].row(v));
            for (const auto& [pid, g] : row.dP)
                (*grad)[N + pid] += 2.0 * row.r * g;
        }
    }
    return built.breakdown.total;
}

} // namespace carshape
