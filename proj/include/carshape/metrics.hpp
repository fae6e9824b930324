/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: include/carshape/metrics.hpp
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

#include <span>
#include <vector>

namespace carshape {

struct Box2d
{
    double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }

    static Box2d hull(const MatrixX2d& points);
};

double iou(const Box2d& a, const Box2d& b);

/// One instance for orientation-precision evaluation.
struct AopItem
{
    Box2d box;
    double azimuth_deg = 0.0;
};

/**
 * Average Orientation Precision: the fraction of instances whose box overlaps
 * the ground truth with IoU greater than `iou_threshold` and whose azimuth
 * error is below `angle_threshold_deg`.
 */
double aop(std::span<const AopItem> predictions, std::span<const AopItem> ground_truth,
           double angle_threshold_deg, double iou_threshold = 0.7);

struct ApkResult
{
    Eigen::VectorXd per_keypoint; // precision per keypoint slot
    double mean = 0.0;
};

/**
 * Average Precision of Keypoints: a keypoint counts as correct when its pixel
 * error is at most alpha * max(box height, box width) (closed inequality).
 * `mask[m][i]` selects the keypoints that are evaluated for instance m.
 */
ApkResult apk(std::span<const MatrixX2d> pred_keypoints, std::span<const MatrixX2d> gt_keypoints,
              std::span<const Box2d> boxes, const std::vector<std::vector<bool>>& mask,
              double alpha = 0.1);

/// Hausdorff distance between two nonempty point sets (rows are points).
double hausdorff(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Mean absolute azimuth difference in degrees, wrapped to [0, 180].
double mean_abs_angle_error(std::span<const double> pred_azimuth_deg,
                            std::span<const double> gt_azimuth_deg);

/// Difference of two angles in degrees, wrapped to [0, 180].
double angle_difference_deg(double a_deg, double b_deg);

/// Azimuth (heading about the camera vertical) of the object forward axis, degrees.
double azimuth_deg(const QuatPose& pose);

/// Geodesic rotation distance between two poses, degrees.
double rotation_geodesic_deg(const QuatPose& a, const QuatPose& b);

/**
 * Similarity transform (s, R, t) aligning the rows of `src` onto `dst` in the
 * least-squares sense. With `allow_reflection`, R may be an improper rotation,
 * which matches the gauge freedom of orthographic factorization.
 */
struct Similarity
{
    double s = 1.0;
    Matrix3d R = Matrix3d::Identity();
    Vector3d t = Vector3d::Zero();

    MatrixX3d apply(const MatrixX3d& points) const;
};

Similarity align_similarity(const MatrixX3d& src, const MatrixX3d& dst,
                            bool allow_reflection = false);

/// Root-mean-square row distance between two equally sized point sets.
double rmse(const MatrixX3d& a, const MatrixX3d& b);

} // namespace carshape
