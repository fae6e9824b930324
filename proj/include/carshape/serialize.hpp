/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: include/carshape/serialize.hpp
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
#include "carshape/shape_adjust.hpp"
#include "carshape/synth.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

// File formats are JSON documents carrying format_version "major.minor";
// readers reject unknown major versions. All numbers are serialized with
// shortest round-trip precision, so identical inputs give identical bytes.

namespace carshape {

inline constexpr int kFormatMajor = 1;
inline constexpr int kFormatMinor = 0;

std::string format_version_string();

/// Throws SchemaError unless the document carries a compatible format_version.
void check_format_version(const nlohmann::json& j, const std::string& what);

// ---- shape prior ----
nlohmann::json prior_to_json(const ShapePrior& prior);
ShapePrior prior_from_json(const nlohmann::json& j);

// ---- 2D annotations (prior learning input) ----
nlohmann::json annotations_to_json(const AnnotationSet& set);
AnnotationSet annotations_from_json(const nlohmann::json& j);

// ---- keypoint detections (pose / shape stage input) ----
struct KeypointInstance
{
    std::string id;
    std::vector<KeypointObservation> observations;
};
struct KeypointFile
{
    std::vector<std::string> names;
    std::vector<KeypointInstance> instances;
};
nlohmann::json keypoints_to_json(const KeypointFile& file);
KeypointFile keypoints_from_json(const nlohmann::json& j);

// ---- intrinsics ----
nlohmann::json intrinsics_to_json(const Intrinsics& K);
Intrinsics intrinsics_from_json(const nlohmann::json& j);

// ---- pose records ----
struct PoseRecord
{
    std::string id;
    QuatPose pose;
    Eigen::VectorXd weights;
    Eigen::VectorXd residuals;
    int iterations = 0;
    double final_cost = 0.0;
};
struct PoseFailure
{
    std::string id;
    std::string error;
};
struct PoseFile
{
    std::vector<PoseRecord> poses;
    std::vector<PoseFailure> failures;
};
nlohmann::json poses_to_json(const PoseFile& file);
PoseFile poses_from_json(const nlohmann::json& j);

// ---- reconstructions ----
struct ReconstructionRecord
{
    std::string id;
    InstanceReconstruction reconstruction;
};
nlohmann::json reconstructions_to_json(const std::vector<ReconstructionRecord>& records);
std::vector<ReconstructionRecord> reconstructions_from_json(const nlohmann::json& j);

// ---- synthetic ground truth ----
struct GroundTruthInstance
{
    std::string id;
    QuatPose pose;
    QuatPose init_pose;
    OrthoCam ortho;
    LatentCoeffs lambda;
    std::vector<bool> outliers;
    std::vector<bool> occluded;
};
struct GroundTruthFile
{
    std::string projection; // "perspective" or "orthographic"
    std::vector<GroundTruthInstance> instances;
};
nlohmann::json ground_truth_to_json(const GroundTruthFile& file);
GroundTruthFile ground_truth_from_json(const nlohmann::json& j);
GroundTruthFile ground_truth_from_dataset(const SynthDataset& dataset);

// ---- configuration sections (partial documents override the defaults) ----
nlohmann::json irls_config_to_json(const IrlsConfig& c);
IrlsConfig irls_config_from_json(const nlohmann::json& j, IrlsConfig base = {});
nlohmann::json energy_config_to_json(const EnergyConfig& c);
EnergyConfig energy_config_from_json(const nlohmann::json& j, EnergyConfig base = {});
nlohmann::json synth_config_to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig base = {});

// ---- OBJ wireframe ----
std::string wireframe_to_obj(const MatrixX3d& points, const QuadMesh& topology);

// ---- files ----
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);
nlohmann::json load_json(const std::string& path);
void save_json(const std::string& path, const nlohmann::json& j);

} // namespace carshape
