/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: src/metrics.cpp
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
#include "carshape/metrics.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace carshape {

Box2d Box2d::hull(const MatrixX2d& points)
{
    if (points.rows() == 0)
        throw UndefinedMetricError("Box2d::hull: empty point set");
    Box2d box;
    box.xmin = points.col(0).minCoeff();
    box.xmax = points.col(0).maxCoeff();
    box.ymin = points.col(1).minCoeff();
    box.ymax = points.col(1).maxCoeff();
    return box;
}

double iou(const Box2d& a, const Box2d& b)
{
    const double ix = std::max(0.0, std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin));
    const double iy = std::max(0.0, std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin));
    const double inter = ix * iy;
    const double uni = a.width() * a.height() + b.width() * b.height() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

double angle_difference_deg(double a_deg, double b_deg)
{
    double d = std::fmod(std::abs(a_deg - b_deg), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

double aop(std::span<const AopItem> predictions, std::span<const AopItem> ground_truth,
           double angle_threshold_deg, double iou_threshold)
{
    if (predictions.empty() || predictions.size() != ground_truth.size())
        throw UndefinedMetricError("aop: empty or mismatched evaluation sets");
    int correct = 0;
    for (size_t m = 0; m < predictions.size(); ++m)
    {
        const bool box_ok = iou(predictions[m].box, ground_truth[m].box) > iou_threshold;
        const bool angle_ok =
            angle_difference_deg(predictions[m].azimuth_deg, ground_truth[m].azimuth_deg) <
            angle_threshold_deg;
        correct += (box_ok && angle_ok) ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

ApkResult apk(std::span<const MatrixX2d> pred_keypoints, std::span<const MatrixX2d> gt_keypoints,
              std::span<const Box2d> boxes, const std::vector<std::vector<bool>>& mask,
              double alpha)
{
    if (pred_keypoints.empty() || pred_keypoints.size() != gt_keypoints.size() ||
        pred_keypoints.size() != boxes.size() || mask.size() != pred_keypoints.size())
        throw UndefinedMetricError("apk: empty or mismatched evaluation sets");
    const int K = static_cast<int>(pred_keypoints[0].rows());

    Eigen::VectorXd correct = Eigen::VectorXd::Zero(K);
    Eigen::VectorXd counted = Eigen::VectorXd::Zero(K);
    for (size_t m = 0; m < pred_keypoints.size(); ++m)
    {
        const Box2d& box = boxes[m];
        if (!(box.width() > 0.0) || !(box.height() > 0.0))
            throw UndefinedMetricError("apk: degenerate bounding box");
        const double thresh = alpha * std::max(box.width(), box.height());
        for (int i = 0; i < K; ++i)
        {
            if (!mask[m][static_cast<size_t>(i)])
                continue;
            counted[i] += 1.0;
            const double err = (pred_keypoints[m].row(i) - gt_keypoints[m].row(i)).norm();
            if (err <= thresh)
                correct[i] += 1.0;
        }
    }
    ApkResult out;
    out.per_keypoint.resize(K);
    double sum = 0.0;
    int active = 0;
    for (int i = 0; i < K; ++i)
    {
        out.per_keypoint[i] = counted[i] > 0.0 ? correct[i] / counted[i] : 0.0;
        if (counted[i] > 0.0)
        {
            sum += out.per_keypoint[i];
            ++active;
        }
    }
    out.mean = active > 0 ? sum / active : 0.0;
    return out;
}

double hausdorff(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B)
{
    if (A.rows() == 0 || B.rows() == 0)
        throw UndefinedMetricError("hausdorff: empty point set");
    if (A.cols() != B.cols())
        throw UndefinedMetricError("hausdorff: dimension mismatch");
    auto directed = [](const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q) {
        double worst = 0.0;
        for (int i = 0; i < P.rows(); ++i)
        {
            double nearest = std::numeric_limits<double>::infinity();
            for (int j = 0; j < Q.rows(); ++j)
                nearest = std::min(nearest, (P.row(i) - Q.row(j)).norm());
            worst = std::max(worst, nearest);
        }
        return worst;
    };
    return std::max(directed(A, B), directed(B, A));
}

double mean_abs_angle_error(std::span<const double> pred_azimuth_deg,
                            std::span<const double> gt_azimuth_deg)
{
    if (pred_azimuth_deg.empty() || pred_azimuth_deg.size() != gt_azimuth_deg.size())
        throw UndefinedMetricError("mean_abs_angle_error: empty or mismatched sets");
    double sum = 0.0;
    for (size_t m = 0; m < pred_azimuth_deg.size(); ++m)
        sum += angle_difference_deg(pred_azimuth_deg[m], gt_azimuth_deg[m]);
    return sum / static_cast<double>(pred_azimuth_deg.size());
}

double azimuth_deg(const QuatPose& pose)
{
    const Vector3d f = pose.rotation() * Vector3d(0.0, 0.0, 1.0);
    return std::atan2(f.x(), f.z()) * 180.0 / M_PI;
}

double rotation_geodesic_deg(const QuatPose& a, const QuatPose& b)
{
    const Matrix3d D = a.rotation() * b.rotation().transpose();
    const double c = std::clamp((D.trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(c) * 180.0 / M_PI;
}

MatrixX3d Similarity::apply(const MatrixX3d& points) const
{
    return ((s * (R * points.transpose())).colwise() + t).transpose();
}

Similarity align_similarity(const MatrixX3d& src, const MatrixX3d& dst, bool allow_reflection)
{
    if (src.rows() != dst.rows() || src.rows() < 3)
        throw DegenerateInputError("align_similarity: need >= 3 paired points");
    const int n = static_cast<int>(src.rows());
    const Vector3d mu_s = src.colwise().mean();
    const Vector3d mu_d = dst.colwise().mean();
    const MatrixX3d cs = src.rowwise() - mu_s.transpose();
    const MatrixX3d cd = dst.rowwise() - mu_d.transpose();

    const Matrix3d cov = cd.transpose() * cs / n;
    const Eigen::JacobiSVD<Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vector3d S = Vector3d::Ones();
    if (!allow_reflection && (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0)
        S[2] = -1.0;

    Similarity sim;
    sim.R = svd.matrixU() * S.asDiagonal() * svd.matrixV().transpose();
    const double var_s = cs.squaredNorm() / n;
    sim.s = var_s > 1e-30 ? (svd.singularValues().dot(S)) / var_s : 1.0;
    sim.t = mu_d - sim.s * (sim.R * mu_s);
    return sim;
}

double rmse(const MatrixX3d& a, const MatrixX3d& b)
{
    if (a.rows() != b.rows())
        throw DegenerateInputError("rmse: size mismatch");
    return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.rows()));
}

} // namespace carshape
