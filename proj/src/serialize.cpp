/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: src/serialize.cpp
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
#include "carshape/serialize.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace carshape {

using nlohmann::json;

namespace {

json vec_to_json(const Eigen::VectorXd& v)
{
    json a = json::array();
    for (int i = 0; i < v.size(); ++i)
        a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vec_from_json(const json& a)
{
    Eigen::VectorXd v(a.size());
    for (size_t i = 0; i < a.size(); ++i)
        v[static_cast<int>(i)] = a[i].get<double>();
    return v;
}

json mat_to_json(const MatrixX3d& m)
{
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i)
        rows.push_back({m(i, 0), m(i, 1), m(i, 2)});
    return rows;
}

MatrixX3d mat_from_json(const json& rows)
{
    MatrixX3d m(static_cast<int>(rows.size()), 3);
    for (size_t i = 0; i < rows.size(); ++i)
        for (int k = 0; k < 3; ++k)
            m(static_cast<int>(i), k) = rows[i][static_cast<size_t>(k)].get<double>();
    return m;
}

json pose_to_json(const QuatPose& pose)
{
    const QuatPose c = pose.canonical();
    return json{{"quaternion", {c.q[0], c.q[1], c.q[2], c.q[3]}},
                {"translation", {c.t[0], c.t[1], c.t[2]}}};
}

QuatPose pose_from_json(const json& j)
{
    QuatPose p;
    for (int k = 0; k < 4; ++k)
        p.q[k] = j.at("quaternion")[static_cast<size_t>(k)].get<double>();
    for (int k = 0; k < 3; ++k)
        p.t[k] = j.at("translation")[static_cast<size_t>(k)].get<double>();
    return p;
}

json plane_to_json(const Plane& p)
{
    return json{{"n", {p.n[0], p.n[1], p.n[2]}}, {"d", p.d}};
}

Plane plane_from_json(const json& j)
{
    Plane p;
    for (int k = 0; k < 3; ++k)
        p.n[k] = j.at("n")[static_cast<size_t>(k)].get<double>();
    p.d = j.at("d").get<double>();
    return p;
}

json breakdown_to_json(const EnergyBreakdown& b)
{
    return json{{"reproj", b.reproj}, {"planar", b.planar}, {"sym", b.sym},
                {"dim", b.dim},       {"lap", b.lap},       {"total", b.total}};
}

EnergyBreakdown breakdown_from_json(const json& j)
{
    EnergyBreakdown b;
    b.reproj = j.at("reproj").get<double>();
    b.planar = j.at("planar").get<double>();
    b.sym = j.at("sym").get<double>();
    b.dim = j.at("dim").get<double>();
    b.lap = j.at("lap").get<double>();
    b.total = j.at("total").get<double>();
    return b;
}

const json& require(const json& j, const char* key, const std::string& what)
{
    const auto it = j.find(key);
    if (it == j.end())
        throw SchemaError(what + ": missing field '" + key + "'");
    return *it;
}

} // namespace

std::string format_version_string()
{
    return std::to_string(kFormatMajor) + "." + std::to_string(kFormatMinor);
}

void check_format_version(const json& j, const std::string& what)
{
    const std::string v = require(j, "format_version", what).get<std::string>();
    const auto dot = v.find('.');
    int major = -1;
    try
    {
        major = std::stoi(v.substr(0, dot));
    }
    catch (const std::exception&)
    {
        throw SchemaError(what + ": malformed format_version '" + v + "'");
    }
    if (major != kFormatMajor)
        throw SchemaError(what + ": unsupported format_version '" + v + "' (reader supports major " +
                          std::to_string(kFormatMajor) + ")");
}

json prior_to_json(const ShapePrior& prior)
{
    json j;
    j["format_version"] = format_version_string();
    j["kind"] = "shape_prior";
    j["names"] = prior.names;
    j["mean"] = mat_to_json(prior.mean);
    json basis = json::array();
    for (const auto& V : prior.basis)
        basis.push_back(mat_to_json(V));
    j["basis"] = basis;
    j["eigenvalues"] = vec_to_json(prior.eigenvalues);
    j["sigma2"] = prior.sigma2;
    json faces = json::array();
    for (const auto& f : prior.topology.faces)
        faces.push_back({f[0], f[1], f[2], f[3]});
    j["topology"] = json{{"vertex_count", prior.topology.vertex_count},
                         {"faces", faces},
                         {"ground_parallel", prior.ground_parallel}};
    json pairs = json::array();
    for (const auto& [l, r] : prior.symmetry_pairs)
        pairs.push_back({l, r});
    j["symmetry"] = json{{"pairs", pairs}, {"on_plane", prior.on_plane}};
    j["medial_plane"] = plane_to_json(prior.medial_plane);
    j["dim_priors"] = json{{"length", prior.dim_priors[0]},
                           {"width", prior.dim_priors[1]},
                           {"height", prior.dim_priors[2]}};
    return j;
}

ShapePrior prior_from_json(const json& j)
{
    check_format_version(j, "shape prior");
    ShapePrior prior;
    prior.names = require(j, "names", "shape prior").get<std::vector<std::string>>();
    prior.mean = mat_from_json(require(j, "mean", "shape prior"));
    for (const auto& V : require(j, "basis", "shape prior"))
        prior.basis.push_back(mat_from_json(V));
    prior.eigenvalues = vec_from_json(require(j, "eigenvalues", "shape prior"));
    prior.sigma2 = require(j, "sigma2", "shape prior").get<double>();
    const json& topo = require(j, "topology", "shape prior");
    prior.topology.vertex_count = topo.at("vertex_count").get<int>();
    for (const auto& f : topo.at("faces"))
        prior.topology.faces.push_back(
            {f[0].get<int>(), f[1].get<int>(), f[2].get<int>(), f[3].get<int>()});
    prior.ground_parallel = topo.at("ground_parallel").get<std::vector<bool>>();
    const json& sym = require(j, "symmetry", "shape prior");
    for (const auto& p : sym.at("pairs"))
        prior.symmetry_pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
    prior.on_plane = sym.at("on_plane").get<std::vector<int>>();
    prior.medial_plane = plane_from_json(require(j, "medial_plane", "shape prior"));
    const json& dims = require(j, "dim_priors", "shape prior");
    prior.dim_priors = Vector3d(dims.at("length").get<double>(), dims.at("width").get<double>(),
                                dims.at("height").get<double>());
    prior.validate();
    return prior;
}

json annotations_to_json(const AnnotationSet& set)
{
    json j;
    j["format_version"] = format_version_string();
    j["kind"] = "annotations";
    j["names"] = set.names;
    json instances = json::array();
    for (const auto& inst : set.instances)
    {
        json kp;
        for (size_t i = 0; i < inst.keypoints.size(); ++i)
        {
            const auto& a = inst.keypoints[i];
            kp[set.names[i]] =
                json{{"u", a.uv.x()}, {"v", a.uv.y()}, {"visible", a.visible}};
        }
        instances.push_back(json{{"id", inst.id}, {"keypoints", kp}});
    }
    j["instances"] = instances;
    return j;
}

AnnotationSet annotations_from_json(const json& j)
{
    check_format_version(j, "annotations");
    AnnotationSet set;
    set.names = require(j, "names", "annotations").get<std::vector<std::string>>();
    for (const auto& inst : require(j, "instances", "annotations"))
    {
        AnnotationInstance a;
        a.id = inst.at("id").get<std::string>();
        a.keypoints.resize(set.names.size());
        for (const auto& [name, val] : inst.at("keypoints").items())
        {
            const auto it = std::find(set.names.begin(), set.names.end(), name);
            if (it == set.names.end())
                throw SchemaError("annotations: unknown keypoint name '" + name + "' in instance " +
                                  a.id);
            auto& slot = a.keypoints[static_cast<size_t>(it - set.names.begin())];
            slot.uv = Vector2d(val.at("u").get<double>(), val.at("v").get<double>());
            slot.visible = val.at("visible").get<bool>();
        }
        set.instances.push_back(std::move(a));
    }
    return set;
}

json keypoints_to_json(const KeypointFile& file)
{
    json j;
    j["format_version"] = format_version_string();
    j["kind"] = "keypoints";
    j["names"] = file.names;
    json instances = json::array();
    for (const auto& inst : file.instances)
    {
        json kp;
        for (const auto& o : inst.observations)
        {
            if (o.index < 0 || o.index >= static_cast<int>(file.names.size()))
                throw SchemaError("keypoints: observation index out of range in " + inst.id);
            kp[file.names[static_cast<size_t>(o.index)]] = json{
                {"u", o.uv.x()}, {"v", o.uv.y()}, {"w_cnn", o.w_cnn}, {"visible", o.visible}};
        }
        instances.push_back(json{{"id", inst.id}, {"keypoints", kp}});
    }
    j["instances"] = instances;
    return j;
}

KeypointFile keypoints_from_json(const json& j)
{
    check_format_version(j, "keypoints");
    KeypointFile file;
    file.names = require(j, "names", "keypoints").get<std::vector<std::string>>();
    for (const auto& inst : require(j, "instances", "keypoints"))
    {
        KeypointInstance ki;
        ki.id = inst.at("id").get<std::string>();
        for (const auto& [name, val] : inst.at("keypoints").items())
        {
            const auto it = std::find(file.names.begin(), file.names.end(), name);
            if (it == file.names.end())
                throw SchemaError("keypoints: unknown keypoint name '" + name + "' in instance " +
                                  ki.id);
            KeypointObservation o;
            o.index = static_cast<int>(it - file.names.begin());
            o.uv = Vector2d(val.at("u").get<double>(), val.at("v").get<double>());
            o.w_cnn = val.at("w_cnn").get<double>();
            o.visible = val.at("visible").get<bool>();
            ki.observations.push_back(o);
        }
        std::sort(ki.observations.begin(), ki.observations.end(),
                  [](const auto& a, const auto& b) { return a.index < b.index; });
        for (size_t k = 1; k < ki.observations.size(); ++k)
            if (ki.observations[k].index == ki.observations[k - 1].index)
                throw SchemaError("keypoints: duplicate keypoint in instance " + ki.id);
        file.instances.push_back(std::move(ki));
    }
    return file;
}

json intrinsics_to_json(const Intrinsics& K)
{
    return json{{"format_version", format_version_string()},
                {"kind", "intrinsics"},
                {"fx", K.fx},
                {"fy", K.fy},
                {"cx", K.cx},
                {"cy", K.cy},
                {"skew", K.skew}};
}

Intrinsics intrinsics_from_json(const json& j)
{
    // tolerate the missing version when nested inside a config document
    if (j.contains("format_version"))
        check_format_version(j, "intrinsics");
    Intrinsics K;
    K.fx = require(j, "fx", "intrinsics").get<double>();
    K.fy = require(j, "fy", "intrinsics").get<double>();
    K.cx = require(j, "cx", "intrinsics").get<double>();
    K.cy = require(j, "cy", "intrinsics").get<double>();
    K.skew = j.value("skew", 0.0);
    K.validate();
    return K;
}

json poses_to_json(const PoseFile& file)
{
    json j;
    j["format_version"] = format_version_string();
    j["kind"] = "poses";
    json poses = json::array();
    for (const auto& rec : file.poses)
    {
        json p = pose_to_json(rec.pose);
        p["id"] = rec.id;
        p["weights"] = vec_to_json(rec.weights);
        p["residuals"] = vec_to_json(rec.residuals);
        p["iterations"] = rec.iterations;
        p["final_cost"] = rec.final_cost;
        poses.push_back(std::move(p));
    }
    j["poses"] = poses;
    json failures = json::array();
    for (const auto& f : file.failures)
        failures.push_back(json{{"id", f.id}, {"error", f.error}});
    j["failures"] = failures;
    return j;
}

PoseFile poses_from_json(const json& j)
{
    check_format_version(j, "poses");
    PoseFile file;
    for (const auto& p : require(j, "poses", "poses"))
    {
        PoseRecord rec;
        rec.id = p.at("id").get<std::string>();
        rec.pose = pose_from_json(p);
        rec.weights = vec_from_json(p.at("weights"));
        rec.residuals = vec_from_json(p.at("residuals"));
        rec.iterations = p.at("iterations").get<int>();
        rec.final_cost = p.at("final_cost").get<double>();
        file.poses.push_back(std::move(rec));
    }
    for (const auto& f : j.value("failures", json::array()))
        file.failures.push_back({f.at("id").get<std::string>(), f.at("error").get<std::string>()});
    return file;
}

json reconstructions_to_json(const std::vector<ReconstructionRecord>& records)
{
    json j;
    j["format_version"] = format_version_string();
    j["kind"] = "reconstructions";
    json arr = json::array();
    for (const auto& [id, rec] : records)
    {
        json planes = json::array();
        for (const auto& p : rec.planes)
            planes.push_back(plane_to_json(p));
        arr.push_back(json{{"id", id},
                           {"lambda", vec_to_json(rec.lambda)},
                           {"planes", planes},
                           {"weights", vec_to_json(rec.kp_weights)},
                           {"energy", breakdown_to_json(rec.energy)},
                           {"energy_initial", breakdown_to_json(rec.energy_initial)},
                           {"diverged", rec.diverged}});
    }
    j["reconstructions"] = arr;
    return j;
}

std::vector<ReconstructionRecord> reconstructions_from_json(const json& j)
{
    check_format_version(j, "reconstructions");
    std::vector<ReconstructionRecord> out;
    for (const auto& r : require(j, "reconstructions", "reconstructions"))
    {
        ReconstructionRecord rec;
        rec.id = r.at("id").get<std::string>();
        rec.reconstruction.lambda = vec_from_json(r.at("lambda"));
        for (const auto& p : r.at("planes"))
            rec.reconstruction.planes.push_back(plane_from_json(p));
        rec.reconstruction.kp_weights = vec_from_json(r.at("weights"));
        rec.reconstruction.energy = breakdown_from_json(r.at("energy"));
        rec.reconstruction.energy_initial = breakdown_from_json(r.at("energy_initial"));
        rec.reconstruction.diverged = r.at("diverged").get<bool>();
        out.push_back(std::move(rec));
    }
    return out;
}

json ground_truth_to_json(const GroundTruthFile& file)
{
    json j;
    j["format_version"] = format_version_string();
    j["kind"] = "ground_truth";
    j["projection"] = file.projection;
    json arr = json::array();
    for (const auto& g : file.instances)
    {
        json item;
        item["id"] = g.id;
        item["lambda"] = vec_to_json(g.lambda);
        item["outliers"] = g.outliers;
        item["occluded"] = g.occluded;
        if (file.projection == "perspective")
        {
            item["pose"] = pose_to_json(g.pose);
            item["init_pose"] = pose_to_json(g.init_pose);
        }
        else
        {
            json R = json::array();
            for (int r = 0; r < 2; ++r)
                R.push_back({g.ortho.R(r, 0), g.ortho.R(r, 1), g.ortho.R(r, 2)});
            item["ortho"] = json{{"R", R},
                                 {"t", {g.ortho.t[0], g.ortho.t[1], g.ortho.t[2]}},
                                 {"c", g.ortho.c}};
        }
        arr.push_back(std::move(item));
    }
    j["instances"] = arr;
    return j;
}

GroundTruthFile ground_truth_from_json(const json& j)
{
    check_format_version(j, "ground truth");
    GroundTruthFile file;
    file.projection = require(j, "projection", "ground truth").get<std::string>();
    for (const auto& g : require(j, "instances", "ground truth"))
    {
        GroundTruthInstance inst;
        inst.id = g.at("id").get<std::string>();
        inst.lambda = vec_from_json(g.at("lambda"));
        inst.outliers = g.at("outliers").get<std::vector<bool>>();
        inst.occluded = g.at("occluded").get<std::vector<bool>>();
        if (file.projection == "perspective")
        {
            inst.pose = pose_from_json(g.at("pose"));
            inst.init_pose = pose_from_json(g.at("init_pose"));
        }
        else
        {
            const json& o = g.at("ortho");
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 3; ++c)
                    inst.ortho.R(r, c) = o.at("R")[static_cast<size_t>(r)][static_cast<size_t>(c)]
                                             .get<double>();
            for (int k = 0; k < 3; ++k)
                inst.ortho.t[k] = o.at("t")[static_cast<size_t>(k)].get<double>();
            inst.ortho.c = o.at("c").get<double>();
        }
        file.instances.push_back(std::move(inst));
    }
    return file;
}

GroundTruthFile ground_truth_from_dataset(const SynthDataset& dataset)
{
    GroundTruthFile file;
    file.projection = dataset.config.projection == SynthConfig::Projection::perspective
                          ? "perspective"
                          : "orthographic";
    for (const auto& inst : dataset.instances)
    {
        GroundTruthInstance g;
        g.id = inst.id;
        g.pose = inst.gt_pose;
        g.init_pose = inst.init_pose;
        g.ortho = inst.gt_ortho;
        g.lambda = inst.gt_lambda;
        g.outliers = inst.outlier;
        g.occluded = inst.occluded;
        file.instances.push_back(std::move(g));
    }
    return file;
}

json irls_config_to_json(const IrlsConfig& c)
{
    return json{{"mu0", c.mu0},
                {"mu1", c.mu1},
                {"mu2", c.mu2},
                {"max_iters", c.max_iters},
                {"weight_floor", c.weight_floor},
                {"v_occ", c.v_occ},
                {"literal_error_term", c.literal_error_term}};
}

IrlsConfig irls_config_from_json(const json& j, IrlsConfig base)
{
    base.mu0 = j.value("mu0", base.mu0);
    base.mu1 = j.value("mu1", base.mu1);
    base.mu2 = j.value("mu2", base.mu2);
    base.max_iters = j.value("max_iters", base.max_iters);
    base.weight_floor = j.value("weight_floor", base.weight_floor);
    base.v_occ = j.value("v_occ", base.v_occ);
    base.literal_error_term = j.value("literal_error_term", base.literal_error_term);
    base.validate();
    return base;
}

json energy_config_to_json(const EnergyConfig& c)
{
    json j{{"eta1", c.eta1},
           {"eta2", c.eta2},
           {"eta3", c.eta3},
           {"eta4", c.eta4},
           {"eta5", c.eta5},
           {"mu_f", c.mu_f},
           {"rect_weight", c.rect_weight},
           {"mu_l", c.mu_l},
           {"mu_w", c.mu_w},
           {"mu_h", c.mu_h},
           {"irls_rounds", c.irls_rounds},
           {"nls_max_iters", c.nls_max_iters},
           {"nls_tol", c.nls_tol},
           {"normalized_laplacian", c.normalized_laplacian},
           {"irls", irls_config_to_json(c.irls)}};
    if (c.ground_normal)
        j["ground_normal"] = {(*c.ground_normal)[0], (*c.ground_normal)[1], (*c.ground_normal)[2]};
    else
        j["ground_normal"] = nullptr;
    return j;
}

EnergyConfig energy_config_from_json(const json& j, EnergyConfig base)
{
    base.eta1 = j.value("eta1", base.eta1);
    base.eta2 = j.value("eta2", base.eta2);
    base.eta3 = j.value("eta3", base.eta3);
    base.eta4 = j.value("eta4", base.eta4);
    base.eta5 = j.value("eta5", base.eta5);
    base.mu_f = j.value("mu_f", base.mu_f);
    base.rect_weight = j.value("rect_weight", base.rect_weight);
    base.mu_l = j.value("mu_l", base.mu_l);
    base.mu_w = j.value("mu_w", base.mu_w);
    base.mu_h = j.value("mu_h", base.mu_h);
    base.irls_rounds = j.value("irls_rounds", base.irls_rounds);
    base.nls_max_iters = j.value("nls_max_iters", base.nls_max_iters);
    base.nls_tol = j.value("nls_tol", base.nls_tol);
    base.normalized_laplacian = j.value("normalized_laplacian", base.normalized_laplacian);
    if (j.contains("ground_normal"))
    {
        if (j["ground_normal"].is_null())
            base.ground_normal.reset();
        else
            base.ground_normal = Vector3d(j["ground_normal"][0].get<double>(),
                                          j["ground_normal"][1].get<double>(),
                                          j["ground_normal"][2].get<double>());
    }
    if (j.contains("irls"))
        base.irls = irls_config_from_json(j["irls"], base.irls);
    base.validate();
    return base;
}

json synth_config_to_json(const SynthConfig& c)
{
    return json{{"instance_count", c.instance_count},
                {"pixel_noise_sigma", c.pixel_noise_sigma},
                {"outlier_fraction", c.outlier_fraction},
                {"outlier_magnitude", c.outlier_magnitude},
                {"occlusion_fraction", c.occlusion_fraction},
                {"seed", c.seed},
                {"azimuth_min_deg", c.azimuth_min_deg},
                {"azimuth_max_deg", c.azimuth_max_deg},
                {"elevation_min_deg", c.elevation_min_deg},
                {"elevation_max_deg", c.elevation_max_deg},
                {"depth_min", c.depth_min},
                {"depth_max", c.depth_max},
                {"lateral_frac", c.lateral_frac},
                {"vertical_frac", c.vertical_frac},
                {"projection", c.projection == SynthConfig::Projection::perspective
                                   ? "perspective"
                                   : "orthographic"},
                {"intrinsics", intrinsics_to_json(c.intrinsics)},
                {"ortho_scale_min", c.ortho_scale_min},
                {"ortho_scale_max", c.ortho_scale_max},
                {"w_cnn_min", c.w_cnn_min},
                {"w_cnn_max", c.w_cnn_max},
                {"occluded_w_cnn", c.occluded_w_cnn},
                {"occluded_extra_sigma", c.occluded_extra_sigma},
                {"init_azimuth_jitter_deg", c.init_azimuth_jitter_deg},
                {"init_translation_jitter", c.init_translation_jitter},
                {"max_retries", c.max_retries},
                {"min_visible", c.min_visible}};
}

SynthConfig synth_config_from_json(const json& j, SynthConfig base)
{
    base.instance_count = j.value("instance_count", base.instance_count);
    base.pixel_noise_sigma = j.value("pixel_noise_sigma", base.pixel_noise_sigma);
    base.outlier_fraction = j.value("outlier_fraction", base.outlier_fraction);
    base.outlier_magnitude = j.value("outlier_magnitude", base.outlier_magnitude);
    base.occlusion_fraction = j.value("occlusion_fraction", base.occlusion_fraction);
    base.seed = j.value("seed", base.seed);
    base.azimuth_min_deg = j.value("azimuth_min_deg", base.azimuth_min_deg);
    base.azimuth_max_deg = j.value("azimuth_max_deg", base.azimuth_max_deg);
    base.elevation_min_deg = j.value("elevation_min_deg", base.elevation_min_deg);
    base.elevation_max_deg = j.value("elevation_max_deg", base.elevation_max_deg);
    base.depth_min = j.value("depth_min", base.depth_min);
    base.depth_max = j.value("depth_max", base.depth_max);
    base.lateral_frac = j.value("lateral_frac", base.lateral_frac);
    base.vertical_frac = j.value("vertical_frac", base.vertical_frac);
    if (j.contains("projection"))
    {
        const std::string p = j["projection"].get<std::string>();
        if (p == "perspective")
            base.projection = SynthConfig::Projection::perspective;
        else if (p == "orthographic")
            base.projection = SynthConfig::Projection::orthographic;
        else
            throw SchemaError("synth config: unknown projection '" + p + "'");
    }
    if (j.contains("intrinsics"))
        base.intrinsics = intrinsics_from_json(j["intrinsics"]);
    base.ortho_scale_min = j.value("ortho_scale_min", base.ortho_scale_min);
    base.ortho_scale_max = j.value("ortho_scale_max", base.ortho_scale_max);
    base.w_cnn_min = j.value("w_cnn_min", base.w_cnn_min);
    base.w_cnn_max = j.value("w_cnn_max", base.w_cnn_max);
    base.occluded_w_cnn = j.value("occluded_w_cnn", base.occluded_w_cnn);
    base.occluded_extra_sigma = j.value("occluded_extra_sigma", base.occluded_extra_sigma);
    base.init_azimuth_jitter_deg = j.value("init_azimuth_jitter_deg", base.init_azimuth_jitter_deg);
    base.init_translation_jitter = j.value("init_translation_jitter", base.init_translation_jitter);
    base.max_retries = j.value("max_retries", base.max_retries);
    base.min_visible = j.value("min_visible", base.min_visible);
    base.validate();
    return base;
}

std::string wireframe_to_obj(const MatrixX3d& points, const QuadMesh& topology)
{
    std::ostringstream out;
    out.precision(17);
    for (int i = 0; i < points.rows(); ++i)
        out << "v " << points(i, 0) << " " << points(i, 1) << " " << points(i, 2) << "\n";
    for (const auto& [a, b] : topology.edges())
        out << "l " << a + 1 << " " << b + 1 << "\n";
    return out.str();
}

void write_file_atomic(const std::string& path, const std::string& content)
{
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path())
        fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw SchemaError("cannot open for writing: " + tmp.string());
        out << content;
        if (!out)
            throw SchemaError("write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw SchemaError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load_json(const std::string& path)
{
    try
    {
        return json::parse(read_file(path));
    }
    catch (const json::parse_error& e)
    {
        throw SchemaError("JSON parse error in " + path + ": " + e.what());
    }
}

void save_json(const std::string& path, const json& j)
{
    write_file_atomic(path, j.dump(2) + "\n");
}

} // namespace carshape
