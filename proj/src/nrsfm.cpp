/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: src/nrsfm.cpp
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
#include "carshape/nrsfm.hpp"

#include "carshape/lm.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace carshape {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Matrix23 = Eigen::Matrix<double, 2, 3>;

struct Instance
{
    int input_index;
    std::vector<int> vis;               // visible keypoint indices
    std::vector<Vector2d> uv;           // aligned with vis
    Matrix23 G = Matrix23::Identity();  // c * R
    Vector2d tau = Vector2d::Zero();    // 2D translation (G * t)
    VectorXd mu;                        // posterior mean of lambda
    MatrixXd phi;                       // posterior covariance of lambda
};

struct Model
{
    MatrixX3d Sbar;              // K x 3
    std::vector<MatrixX3d> V;    // N basis shapes (model scale, not unit norm)
    double sigma2 = 1.0;
    int K = 0, N = 0;
};

// 3 x N matrix of the basis restricted to keypoint i (column j = V_j row i).
MatrixXd basis_at(const Model& model, int i)
{
    MatrixXd B(3, model.N);
    for (int j = 0; j < model.N; ++j)
        B.col(j) = model.V[static_cast<size_t>(j)].row(i).transpose();
    return B;
}

// Project an unconstrained 2x3 camera onto the scaled row-orthonormal manifold.
Matrix23 project_to_scaled_rotation(const Matrix23& G, double* scale = nullptr)
{
    const Eigen::JacobiSVD<Matrix23> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double c = 0.5 * (svd.singularValues()(0) + svd.singularValues()(1));
    const Matrix23 R =
        svd.matrixU() * svd.matrixV().leftCols<2>().transpose();
    if (scale)
        *scale = c;
    return c * R;
}

// E-step for one instance; also returns its marginal log-likelihood.
double e_step(Instance& inst, const Model& model)
{
    const int v = static_cast<int>(inst.vis.size());
    const int d = 2 * v;
    MatrixXd M(d, model.N);
    VectorXd e(d);
    for (int a = 0; a < v; ++a)
    {
        const int i = inst.vis[static_cast<size_t>(a)];
        M.middleRows<2>(2 * a) = inst.G * basis_at(model, i);
        e.segment<2>(2 * a) =
            inst.uv[static_cast<size_t>(a)] - (inst.G * model.Sbar.row(i).transpose() + inst.tau);
    }
    const MatrixXd A = MatrixXd::Identity(model.N, model.N) + M.transpose() * M / model.sigma2;
    const Eigen::LDLT<MatrixXd> ldlt(A);
    inst.phi = ldlt.solve(MatrixXd::Identity(model.N, model.N));
    inst.mu = inst.phi * (M.transpose() * e) / model.sigma2;

    // log N(p; b, M M^T + sigma2 I) via the matrix determinant lemma
    const double quad = (e.squaredNorm() - e.dot(M * ldlt.solve(M.transpose() * e)) / model.sigma2) /
                        model.sigma2;
    double logdet_A = 0.0;
    const VectorXd D = ldlt.vectorD();
    for (int j = 0; j < D.size(); ++j)
        logdet_A += std::log(std::max(D[j], 1e-300));
    const double logdet = d * std::log(model.sigma2) + logdet_A;
    return -0.5 * (quad + logdet + d * std::log(2.0 * std::numbers::pi));
}

// Expected fit error of instance `inst` under camera G and translation tau,
// using the current posterior moments (the Q-function contribution).
double expected_error(const Instance& inst, const Model& model, const Matrix23& G,
                      const Vector2d& tau)
{
    double q = 0.0;
    for (size_t a = 0; a < inst.vis.size(); ++a)
    {
        const int i = inst.vis[a];
        const MatrixXd B = basis_at(model, i);
        const Vector3d Ef = model.Sbar.row(i).transpose() + B * inst.mu;
        const Matrix3d Eff =
            Ef * Ef.transpose() + B * inst.phi * B.transpose(); // E[f f^T]
        const Vector2d s = inst.uv[a] - tau;
        q += s.squaredNorm() - 2.0 * s.dot(G * Ef) + (G * Eff * G.transpose()).trace();
    }
    return q;
}

// Exact local minimization of the expected fit error over the constrained
// camera c * R, parametrized by a non-unit quaternion and the scale. The LM
// objective equals the expected error up to no offset at all:
//   E|s~ - G f|^2 = |s~ - G E[f]|^2 + |G B chol(phi)|_F^2.
Matrix23 refine_camera_constrained(const Instance& inst, const Model& model, const Matrix23& G0,
                                   const Vector2d& tau)
{
    struct Item
    {
        Vector2d s;
        Vector3d Ef;
        Eigen::Matrix<double, 3, Eigen::Dynamic> L;
    };
    std::vector<Item> items;
    items.reserve(inst.vis.size());
    const Eigen::LLT<MatrixXd> llt(inst.phi + 1e-300 * MatrixXd::Identity(model.N, model.N));
    const MatrixXd Lphi = llt.matrixL();
    for (size_t a = 0; a < inst.vis.size(); ++a)
    {
        const int i = inst.vis[a];
        const MatrixXd B = basis_at(model, i);
        Item item;
        item.s = inst.uv[a] - tau;
        item.Ef = model.Sbar.row(i).transpose() + B * inst.mu;
        item.L = B * Lphi;
        items.push_back(std::move(item));
    }

    double c0 = 1.0;
    const Matrix23 cR = project_to_scaled_rotation(G0, &c0);
    c0 = std::max(c0, 1e-9);
    Matrix3d Rfull;
    Rfull.topRows<2>() = cR / c0;
    Rfull.row(2) = Rfull.row(0).cross(Rfull.row(1));
    const QuatPose qp = QuatPose::from_rt(Rfull, Vector3d::Zero());

    const int ncols = static_cast<int>(items.empty() ? 0 : items[0].L.cols());
    const int rows_per_item = 2 + 2 * ncols;
    Eigen::VectorXd x(5);
    x << qp.q, c0;
    auto fn = [&](const Eigen::VectorXd& xi, Eigen::VectorXd& r, Eigen::MatrixXd* J) {
        const Vector4d q = xi.head<4>();
        const double c = xi[4];
        const Matrix3d R = quat_to_rotation(q);
        Matrix3d dR[4];
        if (J)
        {
            for (int k = 0; k < 4; ++k)
                dR[k] = quat_to_rotation_jacobian(q, k);
            J->setZero(static_cast<int>(items.size()) * rows_per_item, 5);
        }
        r.resize(static_cast<int>(items.size()) * rows_per_item);
        int row = 0;
        for (const auto& item : items)
        {
            const Vector2d fit = item.s - c * (R.topRows<2>() * item.Ef);
            r.segment<2>(row) = fit;
            if (J)
            {
                for (int k = 0; k < 4; ++k)
                    J->block<2, 1>(row, k) = -c * (dR[k].topRows<2>() * item.Ef);
                J->block<2, 1>(row, 4) = -(R.topRows<2>() * item.Ef);
            }
            row += 2;
            for (int col = 0; col < ncols; ++col)
            {
                const Vector3d l = item.L.col(col);
                r.segment<2>(row) = c * (R.topRows<2>() * l);
                if (J)
                {
                    for (int k = 0; k < 4; ++k)
                        J->block<2, 1>(row, k) = c * (dR[k].topRows<2>() * l);
                    J->block<2, 1>(row, 4) = R.topRows<2>() * l;
                }
                row += 2;
            }
        }
    };
    LmOptions opts;
    opts.max_iters = 25;
    lm_minimize(fn, x, opts);

    const double c = x[4];
    if (!(c > 1e-12) || !x.head<4>().allFinite() || x.head<4>().norm() < 1e-12)
        return G0;
    return c * quat_to_rotation(x.head<4>()).topRows<2>();
}

void m_step_cameras(std::vector<Instance>& instances, const Model& model)
{
    for (auto& inst : instances)
    {
        auto recenter = [&]() {
            Vector2d tau = Vector2d::Zero();
            for (size_t a = 0; a < inst.vis.size(); ++a)
            {
                const int i = inst.vis[a];
                const Vector3d Ef =
                    model.Sbar.row(i).transpose() + basis_at(model, i) * inst.mu;
                tau += inst.uv[a] - inst.G * Ef;
            }
            inst.tau = tau / static_cast<double>(inst.vis.size());
        };
        recenter();

        // Jump candidate: project the unconstrained least-squares camera onto
        // the c * R manifold. Kept only when it improves the expected fit.
        Matrix3d A = Matrix3d::Zero();
        Matrix23 B = Matrix23::Zero();
        for (size_t a = 0; a < inst.vis.size(); ++a)
        {
            const int i = inst.vis[a];
            const MatrixXd Bi = basis_at(model, i);
            const Vector3d Ef = model.Sbar.row(i).transpose() + Bi * inst.mu;
            A += Ef * Ef.transpose() + Bi * inst.phi * Bi.transpose();
            B += (inst.uv[a] - inst.tau) * Ef.transpose();
        }
        const Eigen::LDLT<Matrix3d> ldlt(A + 1e-12 * Matrix3d::Identity());
        const Matrix23 G_free = ldlt.solve(B.transpose()).transpose();
        const Matrix23 G_cand = project_to_scaled_rotation(G_free);
        if (G_cand.allFinite() &&
            expected_error(inst, model, G_cand, inst.tau) <=
                expected_error(inst, model, inst.G, inst.tau))
            inst.G = G_cand;

        // Exact constrained descent from the accepted camera; never worsens
        // the expected fit, so the generalized M-step stays monotone.
        const Matrix23 G_refined = refine_camera_constrained(inst, model, inst.G, inst.tau);
        if (G_refined.allFinite() &&
            expected_error(inst, model, G_refined, inst.tau) <=
                expected_error(inst, model, inst.G, inst.tau))
            inst.G = G_refined;

        recenter();
    }
}

void m_step_shape(std::vector<Instance>& instances, Model& model)
{
    const int n_unknown = 3 * (model.N + 1);
    for (int i = 0; i < model.K; ++i)
    {
        MatrixXd A = MatrixXd::Zero(n_unknown, n_unknown);
        VectorXd b = VectorXd::Zero(n_unknown);
        bool seen = false;
        for (const auto& inst : instances)
        {
            const auto it = std::find(inst.vis.begin(), inst.vis.end(), i);
            if (it == inst.vis.end())
                continue;
            seen = true;
            const size_t a = static_cast<size_t>(it - inst.vis.begin());
            const Matrix3d GtG = inst.G.transpose() * inst.G;
            const Vector3d Gts = inst.G.transpose() * (inst.uv[a] - inst.tau);

            // lambda~ = [1; lambda]; moments of the outer product
            MatrixXd lam2(model.N + 1, model.N + 1);
            lam2(0, 0) = 1.0;
            lam2.block(0, 1, 1, model.N) = inst.mu.transpose();
            lam2.block(1, 0, model.N, 1) = inst.mu;
            lam2.block(1, 1, model.N, model.N) = inst.phi + inst.mu * inst.mu.transpose();

            for (int p = 0; p <= model.N; ++p)
            {
                for (int q = 0; q <= model.N; ++q)
                    A.block<3, 3>(3 * p, 3 * q) += lam2(p, q) * GtG;
                b.segment<3>(3 * p) += (p == 0 ? 1.0 : inst.mu[p - 1]) * Gts;
            }
        }
        if (!seen)
            continue; // never-observed keypoint: leave as-is
        A.diagonal().array() += 1e-10 * (1.0 + A.trace() / n_unknown);
        const VectorXd z = A.ldlt().solve(b);
        model.Sbar.row(i) = z.segment<3>(0).transpose();
        for (int j = 0; j < model.N; ++j)
            model.V[static_cast<size_t>(j)].row(i) = z.segment<3>(3 * (j + 1)).transpose();
    }
}

void m_step_sigma2(std::vector<Instance>& instances, Model& model, double floor)
{
    double sse = 0.0;
    int count = 0;
    for (const auto& inst : instances)
    {
        for (size_t a = 0; a < inst.vis.size(); ++a)
        {
            const int i = inst.vis[a];
            const MatrixXd B = basis_at(model, i);
            const Vector3d Ef = model.Sbar.row(i).transpose() + B * inst.mu;
            const Vector2d r = inst.uv[a] - inst.tau - inst.G * Ef;
            const MatrixXd GB = inst.G * B;
            sse += r.squaredNorm() + (GB * inst.phi * GB.transpose()).trace();
            count += 2;
        }
    }
    model.sigma2 = std::max(sse / std::max(count, 1), floor);
}

// Rank-3 factorization of the centered measurement matrix with the classical
// metric upgrade, used purely as the EM initialization.
void initialize(std::vector<Instance>& instances, Model& model, int K, bool* rank_deficient)
{
    const int M = static_cast<int>(instances.size());
    MatrixXd W = MatrixXd::Zero(2 * M, K);
    MatrixXd mask = MatrixXd::Zero(2 * M, K);
    for (int m = 0; m < M; ++m)
    {
        auto& inst = instances[static_cast<size_t>(m)];
        for (size_t a = 0; a < inst.vis.size(); ++a)
        {
            W(2 * m, inst.vis[a]) = inst.uv[a].x();
            W(2 * m + 1, inst.vis[a]) = inst.uv[a].y();
            mask(2 * m, inst.vis[a]) = 1.0;
            mask(2 * m + 1, inst.vis[a]) = 1.0;
        }
        // center rows over visible entries; the row means seed tau
        const double nu = mask.row(2 * m).sum();
        const double mu_u = W.row(2 * m).sum() / nu;
        const double mu_v = W.row(2 * m + 1).sum() / nu;
        inst.tau = Vector2d(mu_u, mu_v);
        for (int i = 0; i < K; ++i)
            if (mask(2 * m, i) > 0.0)
            {
                W(2 * m, i) -= mu_u;
                W(2 * m + 1, i) -= mu_v;
            }
    }
    // fill missing entries with column means of the centered visible entries
    for (int i = 0; i < K; ++i)
    {
        const double n_vis = mask.col(i).sum();
        const double mean = (n_vis > 0.0) ? W.col(i).sum() / n_vis : 0.0;
        for (int r = 0; r < 2 * M; ++r)
            if (mask(r, i) == 0.0)
                W(r, i) = mean;
    }

    Eigen::BDCSVD<MatrixXd> svd(W, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd sv = svd.singularValues();
    *rank_deficient = sv.size() >= 3 && sv[2] <= 1e-8 * std::max(sv[0], 1e-300);

    MatrixXd M0 = svd.matrixU().leftCols(3);
    MatrixXd S0 = svd.matrixV().leftCols(3).transpose();
    for (int k = 0; k < 3; ++k)
    {
        const double s = std::sqrt(std::max(sv[k], 1e-300));
        M0.col(k) *= s;
        S0.row(k) *= s;
    }

    // metric upgrade: find symmetric H with r1 H r1^T = r2 H r2^T, r1 H r2^T = 0
    auto vech_coeffs = [](const Vector3d& x, const Vector3d& y) {
        Eigen::Matrix<double, 6, 1> c;
        c << x[0] * y[0], x[0] * y[1] + x[1] * y[0], x[0] * y[2] + x[2] * y[0], x[1] * y[1],
            x[1] * y[2] + x[2] * y[1], x[2] * y[2];
        return c;
    };
    MatrixXd C(2 * M + 1, 6);
    VectorXd rhs = VectorXd::Zero(2 * M + 1);
    for (int m = 0; m < M; ++m)
    {
        const Vector3d r1 = M0.row(2 * m).transpose();
        const Vector3d r2 = M0.row(2 * m + 1).transpose();
        C.row(2 * m) = (vech_coeffs(r1, r1) - vech_coeffs(r2, r2)).transpose();
        C.row(2 * m + 1) = vech_coeffs(r1, r2).transpose();
    }
    // normalization: average squared row norm equals one
    Eigen::Matrix<double, 6, 1> norm_row = Eigen::Matrix<double, 6, 1>::Zero();
    for (int m = 0; m < M; ++m)
    {
        const Vector3d r1 = M0.row(2 * m).transpose();
        const Vector3d r2 = M0.row(2 * m + 1).transpose();
        norm_row += vech_coeffs(r1, r1) + vech_coeffs(r2, r2);
    }
    C.row(2 * M) = norm_row.transpose();
    rhs[2 * M] = 2.0 * M;

    const Eigen::Matrix<double, 6, 1> h =
        C.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(rhs);
    Matrix3d H;
    H << h[0], h[1], h[2], h[1], h[3], h[4], h[2], h[4], h[5];
    Eigen::SelfAdjointEigenSolver<Matrix3d> eig(H);
    Vector3d evals = eig.eigenvalues();
    const double eig_floor = 1e-8 * std::max(evals.cwiseAbs().maxCoeff(), 1e-12);
    for (int k = 0; k < 3; ++k)
        evals[k] = std::max(evals[k], eig_floor);
    const Matrix3d Q = eig.eigenvectors() * evals.cwiseSqrt().asDiagonal();

    const MatrixXd motion = M0 * Q;
    const MatrixXd S_metric = Q.inverse() * S0; // 3 x K
    model.Sbar = S_metric.transpose();
    for (int m = 0; m < M; ++m)
        instances[static_cast<size_t>(m)].G =
            project_to_scaled_rotation(motion.middleRows<2>(2 * m));

    // basis init: principal directions of the backprojected residuals
    MatrixXd D = MatrixXd::Zero(M, 3 * K);
    for (int m = 0; m < M; ++m)
    {
        auto& inst = instances[static_cast<size_t>(m)];
        const Matrix23 G = inst.G;
        const Matrix3d GtG_inv =
            (G.transpose() * G + 1e-12 * Matrix3d::Identity()).ldlt().solve(Matrix3d::Identity());
        for (size_t a = 0; a < inst.vis.size(); ++a)
        {
            const int i = inst.vis[a];
            const Vector2d r = inst.uv[a] - inst.tau - G * model.Sbar.row(i).transpose();
            D.block<1, 3>(m, 3 * i) = (GtG_inv * (G.transpose() * r)).transpose();
        }
    }
    Eigen::BDCSVD<MatrixXd> dsvd(D, Eigen::ComputeThinV);
    model.V.assign(static_cast<size_t>(model.N), MatrixX3d::Zero(K, 3));
    const int avail = static_cast<int>(dsvd.singularValues().size());
    for (int j = 0; j < model.N && j < avail; ++j)
    {
        const double scale = dsvd.singularValues()(j) / std::sqrt(static_cast<double>(M));
        const VectorXd dir = dsvd.matrixV().col(j) * std::max(scale, 1e-6);
        for (int i = 0; i < K; ++i)
            model.V[static_cast<size_t>(j)].row(i) = dir.segment<3>(3 * i).transpose();
    }

    // sigma2 init: residual variance of the rigid fit
    double sse = 0.0;
    int count = 0;
    for (int m = 0; m < M; ++m)
    {
        const auto& inst = instances[static_cast<size_t>(m)];
        for (size_t a = 0; a < inst.vis.size(); ++a)
        {
            const int i = inst.vis[a];
            sse += (inst.uv[a] - inst.tau - inst.G * model.Sbar.row(i).transpose()).squaredNorm();
            count += 2;
        }
    }
    model.sigma2 = std::max(sse / std::max(count, 1), 1e-6);
}

// Canonical frame from the symmetry metadata: x along the medial normal with
// left keypoints negative, z the dominant in-plane direction, y = z x x.
// Applying T = [x y z]^T also resolves the reflection ambiguity of the
// orthographic factorization relative to the left/right labels.
void canonicalize(std::vector<Instance>& instances, Model& model,
                  const std::vector<std::pair<int, int>>& pairs)
{
    // lateral direction from the pair differences
    Matrix3d acc = Matrix3d::Zero();
    for (const auto& [l, r] : pairs)
    {
        const Vector3d d = (model.Sbar.row(r) - model.Sbar.row(l)).transpose();
        acc += d * d.transpose();
    }
    Vector3d x_axis;
    if (pairs.empty() || acc.norm() < 1e-30)
        x_axis = Vector3d(1, 0, 0);
    else
    {
        Eigen::SelfAdjointEigenSolver<Matrix3d> eig(acc);
        x_axis = eig.eigenvectors().col(2); // largest eigenvalue
        double sign = 0.0;
        for (const auto& [l, r] : pairs)
            sign += x_axis.dot((model.Sbar.row(r) - model.Sbar.row(l)).transpose());
        if (sign < 0.0)
            x_axis = -x_axis;
    }

    const Vector3d centroid = model.Sbar.colwise().mean().transpose();
    MatrixX3d centered = model.Sbar.rowwise() - centroid.transpose();
    // dominant direction within the medial plane
    Matrix3d cov = Matrix3d::Zero();
    for (int i = 0; i < model.K; ++i)
    {
        Vector3d p = centered.row(i).transpose();
        p -= x_axis.dot(p) * x_axis;
        cov += p * p.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Matrix3d> eig(cov);
    Vector3d z_axis = eig.eigenvectors().col(2);
    z_axis -= x_axis.dot(z_axis) * x_axis;
    z_axis.normalize();
    double zsign = 0.0;
    for (int i = 0; i < model.K; ++i)
        zsign += (i + 1) * z_axis.dot(centered.row(i).transpose());
    if (zsign < 0.0)
        z_axis = -z_axis;
    const Vector3d y_axis = z_axis.cross(x_axis);

    Matrix3d T;
    T.row(0) = x_axis.transpose();
    T.row(1) = y_axis.transpose();
    T.row(2) = z_axis.transpose();

    // normalize the global scale so the mean orthographic scale is 1
    double c_mean = 0.0;
    for (auto& inst : instances)
    {
        double c = 1.0;
        project_to_scaled_rotation(inst.G, &c);
        c_mean += c;
    }
    c_mean /= static_cast<double>(instances.size());
    if (!(c_mean > 1e-12))
        c_mean = 1.0;

    // S' = c_mean * T (S - centroid);  G' = G T^T / c_mean;  tau' = tau + G centroid
    for (int i = 0; i < model.K; ++i)
        model.Sbar.row(i) = (c_mean * (T * (model.Sbar.row(i).transpose() - centroid))).transpose();
    for (auto& V : model.V)
        for (int i = 0; i < model.K; ++i)
            V.row(i) = (c_mean * (T * V.row(i).transpose())).transpose();
    for (auto& inst : instances)
    {
        inst.tau += inst.G * centroid;
        inst.G = inst.G * T.transpose() / c_mean;
    }
}

} // namespace

void EmConfig::validate() const
{
    if (max_iters < 1)
        throw DegenerateInputError("EmConfig: max_iters must be >= 1");
    if (!(tol >= 0.0))
        throw DegenerateInputError("EmConfig: tol must be nonnegative");
    if (min_visible < 3)
        throw DegenerateInputError("EmConfig: min_visible must be >= 3");
}

NrsfmResult nrsfm_fit(const AnnotationSet& data, int basis_size, const EmConfig& config,
                      const ShapePrior* metadata_template)
{
    config.validate();
    data.validate(config.min_visible);
    const int K = data.keypoint_count();
    const int M_in = data.instance_count();
    if (basis_size < 1)
        throw DegenerateInputError("nrsfm_fit: basis_size must be >= 1");
    if (basis_size > std::min(3 * K, M_in) - 1)
        throw DegenerateInputError("nrsfm_fit: basis_size too large for the data");

    ShapePrior tmpl;
    if (metadata_template)
        tmpl = *metadata_template;
    else if (data.names == default_keypoint_names())
        tmpl = default_car_prior(0);
    else
        throw DegenerateInputError(
            "nrsfm_fit: annotations do not match the built-in template; supply metadata");
    if (tmpl.keypoint_count() != K)
        throw DegenerateInputError("nrsfm_fit: metadata template keypoint count mismatch");

    NrsfmResult result;
    result.instances.assign(static_cast<size_t>(M_in), NrsfmInstanceFit{});

    std::vector<Instance> instances;
    for (int m = 0; m < M_in; ++m)
    {
        Instance inst;
        inst.input_index = m;
        const auto& src = data.instances[static_cast<size_t>(m)];
        for (int i = 0; i < K; ++i)
            if (src.keypoints[static_cast<size_t>(i)].visible)
            {
                inst.vis.push_back(i);
                inst.uv.push_back(src.keypoints[static_cast<size_t>(i)].uv);
            }
        if (static_cast<int>(inst.vis.size()) < config.min_visible)
            result.report.rejected.push_back(m);
        else
            instances.push_back(std::move(inst));
    }
    if (static_cast<int>(instances.size()) < 2)
        throw DegenerateInputError("nrsfm_fit: fewer than 2 usable instances");

    Model model;
    model.K = K;
    model.N = basis_size;
    initialize(instances, model, K, &result.report.rank_deficient);

    double prev_ll = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < config.max_iters; ++iter)
    {
        double ll = 0.0;
        for (auto& inst : instances)
            ll += e_step(inst, model);
        result.report.loglik.push_back(ll);
        result.report.iterations = iter + 1;
        if (iter > 0 && std::abs(ll - prev_ll) <= config.tol * (1.0 + std::abs(ll)))
        {
            prev_ll = ll;
            break;
        }
        prev_ll = ll;

        m_step_cameras(instances, model);
        m_step_shape(instances, model);
        m_step_sigma2(instances, model, config.sigma2_floor);
    }
    // final posterior under the final parameters
    for (auto& inst : instances)
        e_step(inst, model);

    canonicalize(instances, model, tmpl.symmetry_pairs);

    // Re-express the fitted instance shapes over an orthonormal basis with
    // nonincreasing variances; fold the mean deviation into the mean shape.
    const int M = static_cast<int>(instances.size());
    MatrixXd devs(3 * K, M);
    for (int m = 0; m < M; ++m)
    {
        const auto& inst = instances[static_cast<size_t>(m)];
        for (int i = 0; i < K; ++i)
        {
            Vector3d d = Vector3d::Zero();
            for (int j = 0; j < model.N; ++j)
                d += inst.mu[j] * model.V[static_cast<size_t>(j)].row(i).transpose();
            devs.col(m).segment<3>(3 * i) = d;
        }
    }
    const VectorXd dev_mean = devs.rowwise().mean();
    devs.colwise() -= dev_mean;
    for (int i = 0; i < K; ++i)
        model.Sbar.row(i) += dev_mean.segment<3>(3 * i).transpose();

    Eigen::BDCSVD<MatrixXd> dev_svd(devs, Eigen::ComputeThinU);
    const int N_out = std::min<int>(model.N, static_cast<int>(dev_svd.singularValues().size()));

    ShapePrior prior = tmpl;
    prior.names = data.names;
    prior.mean = model.Sbar;
    prior.basis.clear();
    prior.eigenvalues.resize(N_out);
    MatrixXd U(3 * K, N_out);
    for (int j = 0; j < N_out; ++j)
    {
        U.col(j) = dev_svd.matrixU().col(j);
        const double sv = dev_svd.singularValues()(j);
        prior.eigenvalues[j] = sv * sv / M;
        MatrixX3d Vj(K, 3);
        for (int i = 0; i < K; ++i)
            Vj.row(i) = U.col(j).segment<3>(3 * i).transpose();
        prior.basis.push_back(Vj);
    }
    prior.sigma2 = model.sigma2;
    prior.medial_plane = Plane{Vector3d(1, 0, 0), 0.0};

    // per-instance coefficients in the new basis + camera recovery
    Vector3d dim_acc = Vector3d::Zero();
    for (int m = 0; m < M; ++m)
    {
        const auto& inst = instances[static_cast<size_t>(m)];
        NrsfmInstanceFit fit;
        fit.used = true;
        fit.lambda = U.transpose() * devs.col(m);

        double c = 1.0;
        const Matrix23 cR = project_to_scaled_rotation(inst.G, &c);
        OrthoCam cam;
        cam.c = std::max(c, 1e-12);
        cam.R = cR / cam.c;
        cam.t = inst.G.transpose() * inst.tau / (cam.c * cam.c);
        fit.cam = cam;

        dim_acc += shape_extents(instantiate(prior, fit.lambda));
        result.instances[static_cast<size_t>(inst.input_index)] = std::move(fit);
    }
    prior.dim_priors = dim_acc / M;

    prior.validate();
    result.prior = std::move(prior);
    return result;
}

} // namespace carshape
