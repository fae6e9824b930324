/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: include/carshape/lm.hpp
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

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <functional>
#include <vector>

namespace carshape {

struct LmOptions
{
    int max_iters = 100;
    double lambda_init = 1e-4;
    double lambda_up = 10.0;
    double lambda_down = 0.25;
    double lambda_max = 1e14;
    double gradient_tol = 1e-14;
    double step_tol = 1e-15;
    double cost_floor = 0.0; // stop once cost drops below this

    /// Hook invoked after each accepted step; may be empty.
    std::function<void(const Eigen::VectorXd&)> post_step;
};

struct LmSummary
{
    double initial_cost = 0.0;
    double final_cost = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> cost_history; // accepted costs, starting at the initial one
};

/**
 * Dense Levenberg-Marquardt on a residual functor fn(x, r, J). The accepted
 * cost sequence is nonincreasing by construction; rejected trial steps only
 * raise the damping. Suited to the small problems in this library (tens of
 * variables, hundreds of residuals).
 */
template <typename Residuals>
LmSummary lm_minimize(Residuals&& fn, Eigen::VectorXd& x, const LmOptions& opts = {})
{
    using Eigen::MatrixXd;
    using Eigen::VectorXd;

    LmSummary summary;
    VectorXd r;
    MatrixXd J;
    fn(x, r, &J);
    double cost = r.squaredNorm();
    summary.initial_cost = cost;
    summary.cost_history.push_back(cost);

    double lambda = opts.lambda_init;
    for (int iter = 0; iter < opts.max_iters; ++iter)
    {
        if (cost <= opts.cost_floor)
        {
            summary.converged = true;
            break;
        }
        const MatrixXd JtJ = J.transpose() * J;
        const VectorXd g = J.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() < opts.gradient_tol)
        {
            summary.converged = true;
            break;
        }

        VectorXd diag = JtJ.diagonal();
        for (int i = 0; i < diag.size(); ++i)
            diag[i] = std::max(diag[i], 1e-12);

        bool accepted = false;
        while (lambda <= opts.lambda_max)
        {
            MatrixXd A = JtJ;
            A.diagonal() += lambda * diag;
            const VectorXd dx = A.ldlt().solve(-g);
            if (!dx.allFinite())
            {
                lambda *= opts.lambda_up;
                continue;
            }
            const VectorXd x_try = x + dx;
            VectorXd r_try;
            MatrixXd J_try;
            fn(x_try, r_try, &J_try);
            const double cost_try = r_try.squaredNorm();
            if (cost_try < cost)
            {
                x = x_try;
                r.swap(r_try);
                J.swap(J_try);
                const double drop = cost - cost_try;
                cost = cost_try;
                summary.cost_history.push_back(cost);
                summary.iterations = iter + 1;
                if (opts.post_step)
                    opts.post_step(x);
                lambda = std::max(lambda * opts.lambda_down, 1e-14);
                accepted = true;
                if (dx.lpNorm<Eigen::Infinity>() < opts.step_tol || drop < opts.step_tol * (1.0 + cost))
                {
                    summary.converged = true;
                    iter = opts.max_iters; // outer break
                }
                break;
            }
            lambda *= opts.lambda_up;
        }
        if (!accepted)
        {
            summary.converged = true; // damping exhausted: local minimum to working precision
            break;
        }
    }
    summary.final_cost = cost;
    return summary;
}

} // namespace carshape
