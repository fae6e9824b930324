/*
 * carshape - vehicle pose and shape estimation from single-image keypoints.
 *
 * File: tools/main.cpp
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
#include "carshape/nrsfm.hpp"
#include "carshape/pose.hpp"
#include "carshape/serialize.hpp"
#include "carshape/shape_adjust.hpp"
#include "carshape/synth.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace carshape;

namespace {

enum class LogLevel
{
    debug = 0,
    info = 1,
    warn = 2,
    error = 3
};
LogLevel g_log_level = LogLevel::info;

void log_at(LogLevel level, const std::string& msg)
{
    static const char* names[] = {"debug", "info", "warn", "error"};
    if (level >= g_log_level)
        std::fprintf(stderr, "[%s] %s\n", names[static_cast<int>(level)], msg.c_str());
}

LogLevel parse_log_level(const std::string& s)
{
    if (s == "debug")
        return LogLevel::debug;
    if (s == "info")
        return LogLevel::info;
    if (s == "warn")
        return LogLevel::warn;
    if (s == "error")
        return LogLevel::error;
    throw SchemaError("unknown log level '" + s + "'");
}

struct CommonOptions
{
    std::string config_path;
    std::string log_level = "info";
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& common)
{
    cmd->add_option("--config", common.config_path,
                    "JSON configuration file (env: CARSHAPE_CONFIG)")
        ->envname("CARSHAPE_CONFIG");
    cmd->add_option("--log-level", common.log_level, "debug|info|warn|error");
    cmd->add_option("--seed", common.seed, "RNG seed override");
}

json load_config(const CommonOptions& common)
{
    if (common.config_path.empty())
        return json::object();
    if (!fs::exists(common.config_path))
        throw SchemaError("config file does not exist: " + common.config_path);
    return load_json(common.config_path);
}

std::string require_file(const std::string& path, const std::string& what)
{
    if (!fs::exists(path))
        throw SchemaError(what + " does not exist: " + path);
    return path;
}

// ---------------------------------------------------------------- synth ----

int run_synth(const CommonOptions& common, const std::string& out_dir,
              const std::string& prior_path, int modes, std::optional<int> instances,
              std::optional<double> noise, std::optional<double> outlier_fraction,
              std::optional<double> outlier_magnitude, std::optional<double> occlusion,
              const std::optional<std::string>& projection)
{
    const json cfg = load_config(common);
    SynthConfig sc = synth_config_from_json(cfg.value("synth", json::object()));
    if (common.seed)
        sc.seed = *common.seed;
    if (instances)
        sc.instance_count = *instances;
    if (noise)
        sc.pixel_noise_sigma = *noise;
    if (outlier_fraction)
        sc.outlier_fraction = *outlier_fraction;
    if (outlier_magnitude)
        sc.outlier_magnitude = *outlier_magnitude;
    if (occlusion)
        sc.occlusion_fraction = *occlusion;
    if (projection)
        sc = synth_config_from_json(json{{"projection", *projection}}, sc);
    sc.validate();

    const ShapePrior prior = prior_path.empty()
                                 ? default_car_prior(modes)
                                 : prior_from_json(load_json(require_file(prior_path, "prior")));

    const SynthDataset dataset = synth_generate(prior, sc);

    save_json((fs::path(out_dir) / "prior.json").string(), prior_to_json(prior));
    save_json((fs::path(out_dir) / "annotations.json").string(),
              annotations_to_json(to_annotations(dataset)));
    save_json((fs::path(out_dir) / "gt.json").string(),
              ground_truth_to_json(ground_truth_from_dataset(dataset)));
    if (sc.projection == SynthConfig::Projection::perspective)
    {
        KeypointFile kf;
        kf.names = prior.names;
        for (const auto& inst : dataset.instances)
            kf.instances.push_back({inst.id, inst.observations});
        save_json((fs::path(out_dir) / "keypoints.json").string(), keypoints_to_json(kf));
        save_json((fs::path(out_dir) / "intrinsics.json").string(),
                  intrinsics_to_json(sc.intrinsics));
    }
    save_json((fs::path(out_dir) / "synth_config.json").string(), synth_config_to_json(sc));
    log_at(LogLevel::info,
           "wrote " + std::to_string(dataset.instances.size()) + " instances to " + out_dir);
    return 0;
}

// ---------------------------------------------------------- learn-prior ----

int run_learn_prior(const CommonOptions& common, const std::string& annotations_path,
                    const std::string& out_path, int basis_size, const std::string& template_path,
                    std::optional<int> max_iters, std::optional<double> tol)
{
    const json cfg = load_config(common);
    EmConfig em;
    em.max_iters = max_iters.value_or(cfg.value("em_max_iters", em.max_iters));
    em.tol = tol.value_or(cfg.value("em_tol", em.tol));

    const AnnotationSet data =
        annotations_from_json(load_json(require_file(annotations_path, "annotation file")));
    if (data.instance_count() < 2)
        throw SchemaError("learn-prior: need at least 2 instances");

    std::optional<ShapePrior> tmpl;
    if (!template_path.empty())
        tmpl = prior_from_json(load_json(require_file(template_path, "template prior")));

    const NrsfmResult result = nrsfm_fit(data, basis_size, em, tmpl ? &*tmpl : nullptr);

    for (int rejected : result.report.rejected)
        log_at(LogLevel::warn, "rejected instance " +
                                   data.instances[static_cast<size_t>(rejected)].id +
                                   ": fewer than " + std::to_string(em.min_visible) +
                                   " visible keypoints");
    if (result.report.rank_deficient)
        log_at(LogLevel::warn,
               "rank-deficient annotations (near-identical viewpoints); result is best-effort");

    std::printf("EM iterations: %d\n", result.report.iterations);
    std::printf("variance explained by leading basis vectors:\n");
    for (int n = 1; n <= result.prior.basis_size(); ++n)
        std::printf("  n=%d  %.6f\n", n, variance_explained(result.prior, n));

    save_json(out_path, prior_to_json(result.prior));
    log_at(LogLevel::info, "wrote prior to " + out_path);
    return 0;
}

// --------------------------------------------------------- estimate-pose ----

int run_estimate_pose(const CommonOptions& common, const std::string& prior_path,
                      const std::string& keypoints_path, const std::string& intrinsics_path,
                      const std::string& out_path, const std::string& init_poses_path,
                      const std::string& gt_path, std::optional<int> max_iters)
{
    const json cfg = load_config(common);
    IrlsConfig irls = irls_config_from_json(cfg.value("irls", json::object()));
    if (max_iters)
        irls.max_iters = *max_iters;
    irls.validate();

    const ShapePrior prior = prior_from_json(load_json(require_file(prior_path, "prior")));
    const KeypointFile kf =
        keypoints_from_json(load_json(require_file(keypoints_path, "keypoint file")));
    const Intrinsics K =
        intrinsics_from_json(load_json(require_file(intrinsics_path, "intrinsics")));
    if (kf.names != prior.names)
        throw SchemaError("estimate-pose: keypoint names do not match the prior");

    std::map<std::string, QuatPose> init_poses;
    if (!init_poses_path.empty())
    {
        const GroundTruthFile gt =
            ground_truth_from_json(load_json(require_file(init_poses_path, "init pose file")));
        for (const auto& g : gt.instances)
            init_poses[g.id] = g.init_pose;
    }

    PoseFile out;
    for (const auto& inst : kf.instances)
    {
        std::optional<QuatPose> init;
        if (const auto it = init_poses.find(inst.id); it != init_poses.end())
            init = it->second;
        try
        {
            const PoseResult r = irls_pose(prior, inst.observations, K, irls, init);
            out.poses.push_back(
                {inst.id, r.pose, r.weights, r.residuals, r.iterations, r.final_cost});
        }
        catch (const std::exception& e)
        {
            log_at(LogLevel::warn, "instance " + inst.id + " failed: " + e.what());
            out.failures.push_back({inst.id, e.what()});
        }
    }
    save_json(out_path, poses_to_json(out));

    std::printf("estimated %zu poses, %zu failures\n", out.poses.size(), out.failures.size());
    if (!gt_path.empty())
    {
        const GroundTruthFile gt =
            ground_truth_from_json(load_json(require_file(gt_path, "ground truth")));
        std::map<std::string, const GroundTruthInstance*> by_id;
        for (const auto& g : gt.instances)
            by_id[g.id] = &g;
        std::vector<double> errors;
        for (const auto& rec : out.poses)
            if (const auto it = by_id.find(rec.id); it != by_id.end())
                errors.push_back(rotation_geodesic_deg(rec.pose, it->second->pose));
        if (!errors.empty())
        {
            std::vector<double> sorted = errors;
            std::sort(sorted.begin(), sorted.end());
            const double median = sorted[sorted.size() / 2];
            const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / sorted.size();
            int within5 = 0;
            for (double e : errors)
                within5 += e < 5.0 ? 1 : 0;
            std::printf("rotation error vs ground truth: mean %.3f deg, median %.3f deg, "
                        "within 5 deg: %.1f%%\n",
                        mean, median, 100.0 * within5 / static_cast<double>(errors.size()));
        }
    }
    const bool all_failed = out.poses.empty() && !out.failures.empty();
    return all_failed ? 1 : 0;
}

// ---------------------------------------------------------- adjust-shape ----

int run_adjust_shape(const CommonOptions& common, const std::string& prior_path,
                     const std::string& keypoints_path, const std::string& poses_path,
                     const std::string& intrinsics_path, const std::string& out_dir,
                     std::optional<int> rounds)
{
    const json cfg = load_config(common);
    EnergyConfig energy = energy_config_from_json(cfg.value("energy", json::object()));
    if (rounds)
        energy.irls_rounds = *rounds;
    energy.validate();

    const ShapePrior prior = prior_from_json(load_json(require_file(prior_path, "prior")));
    const KeypointFile kf =
        keypoints_from_json(load_json(require_file(keypoints_path, "keypoint file")));
    const Intrinsics K =
        intrinsics_from_json(load_json(require_file(intrinsics_path, "intrinsics")));
    const PoseFile poses = poses_from_json(load_json(require_file(poses_path, "pose record file")));
    if (kf.names != prior.names)
        throw SchemaError("adjust-shape: keypoint names do not match the prior");

    std::map<std::string, const KeypointInstance*> obs_by_id;
    for (const auto& inst : kf.instances)
        obs_by_id[inst.id] = &inst;

    std::vector<ReconstructionRecord> records;
    for (const auto& rec : poses.poses)
    {
        const auto it = obs_by_id.find(rec.id);
        if (it == obs_by_id.end())
        {
            log_at(LogLevel::warn, "no keypoints for pose record " + rec.id + "; skipped");
            continue;
        }
        InstanceReconstruction r =
            shape_adjust(prior, it->second->observations, rec.pose, K, energy, rec.weights);
        if (r.diverged)
            log_at(LogLevel::warn, "instance " + rec.id + ": solver flagged divergence");
        std::printf("%s  E_total %.6g -> %.6g  (reproj %.6g -> %.6g)\n", rec.id.c_str(),
                    r.energy_initial.total, r.energy.total, r.energy_initial.reproj,
                    r.energy.reproj);
        const std::string obj = wireframe_to_obj(r.keypoints3d, prior.topology);
        write_file_atomic((fs::path(out_dir) / "obj" / (rec.id + ".obj")).string(), obj);
        records.push_back({rec.id, std::move(r)});
    }
    save_json((fs::path(out_dir) / "reconstructions.json").string(),
              reconstructions_to_json(records));
    log_at(LogLevel::info,
           "wrote " + std::to_string(records.size()) + " reconstructions to " + out_dir);
    return 0;
}

// ------------------------------------------------------------------ eval ----

struct EvalInstance
{
    QuatPose pred_pose;
    MatrixX3d pred_shape_obj;
    QuatPose gt_pose;
    MatrixX3d gt_shape_obj;
    std::vector<bool> gt_visible;
};

int run_eval(const CommonOptions& common, const std::string& pred_dir, const std::string& gt_dir,
             const std::string& out_path, double alpha)
{
    (void)load_config(common);
    const ShapePrior prior = prior_from_json(
        load_json(require_file((fs::path(gt_dir) / "prior.json").string(), "ground-truth prior")));
    const GroundTruthFile gt = ground_truth_from_json(
        load_json(require_file((fs::path(gt_dir) / "gt.json").string(), "ground truth")));
    if (gt.projection != "perspective")
        throw SchemaError("eval: ground truth must come from a perspective dataset");
    const Intrinsics K = intrinsics_from_json(
        load_json(require_file((fs::path(gt_dir) / "intrinsics.json").string(), "intrinsics")));

    const PoseFile poses = poses_from_json(
        load_json(require_file((fs::path(pred_dir) / "poses.json").string(), "pose predictions")));
    std::map<std::string, InstanceReconstruction> recon_by_id;
    const fs::path recon_path = fs::path(pred_dir) / "reconstructions.json";
    if (fs::exists(recon_path))
        for (auto& r : reconstructions_from_json(load_json(recon_path.string())))
            recon_by_id.emplace(r.id, std::move(r.reconstruction));

    std::map<std::string, const GroundTruthInstance*> gt_by_id;
    for (const auto& g : gt.instances)
        gt_by_id[g.id] = &g;

    std::vector<EvalInstance> items;
    std::vector<std::string> excluded;
    for (const auto& rec : poses.poses)
    {
        const auto it = gt_by_id.find(rec.id);
        if (it == gt_by_id.end())
        {
            excluded.push_back(rec.id);
            continue;
        }
        EvalInstance item;
        item.pred_pose = rec.pose;
        if (const auto rit = recon_by_id.find(rec.id); rit != recon_by_id.end())
            item.pred_shape_obj = instantiate(prior, rit->second.lambda);
        else
            item.pred_shape_obj = prior.mean;
        item.gt_pose = it->second->pose;
        item.gt_shape_obj = instantiate(prior, it->second->lambda);
        item.gt_visible.assign(it->second->occluded.size(), true);
        for (size_t i = 0; i < it->second->occluded.size(); ++i)
            item.gt_visible[i] = !it->second->occluded[i];
        items.push_back(std::move(item));
    }
    for (const auto& id : excluded)
        log_at(LogLevel::warn, "prediction " + id + " has no ground truth; excluded");
    if (items.empty())
        throw UndefinedMetricError("eval: no matched prediction/ground-truth pairs");

    const int Kp = prior.keypoint_count();
    auto project_all = [&](const MatrixX3d& shape_obj, const QuatPose& pose) {
        MatrixX2d uv(Kp, 2);
        const Matrix3d R = pose.rotation();
        for (int i = 0; i < Kp; ++i)
            uv.row(i) =
                project_guarded(R * shape_obj.row(i).transpose() + pose.t, K, 1e-6, 1e4)
                    .transpose();
        return uv;
    };
    auto to_camera = [&](const MatrixX3d& shape_obj, const QuatPose& pose) {
        MatrixX3d out(Kp, 3);
        const Matrix3d R = pose.rotation();
        for (int i = 0; i < Kp; ++i)
            out.row(i) = (R * shape_obj.row(i).transpose() + pose.t).transpose();
        return out;
    };

    std::vector<AopItem> pred_aop, gt_aop;
    std::vector<MatrixX2d> pred_kps, gt_kps;
    std::vector<Box2d> gt_boxes;
    std::vector<std::vector<bool>> masks;
    std::vector<double> pred_az, gt_az, geodesic, hausdorff_per_instance;
    for (const auto& item : items)
    {
        const MatrixX2d uv_pred = project_all(item.pred_shape_obj, item.pred_pose);
        const MatrixX2d uv_gt = project_all(item.gt_shape_obj, item.gt_pose);
        pred_aop.push_back({Box2d::hull(uv_pred), azimuth_deg(item.pred_pose)});
        gt_aop.push_back({Box2d::hull(uv_gt), azimuth_deg(item.gt_pose)});
        pred_kps.push_back(uv_pred);
        gt_kps.push_back(uv_gt);
        gt_boxes.push_back(Box2d::hull(uv_gt));
        masks.push_back(item.gt_visible);
        pred_az.push_back(azimuth_deg(item.pred_pose));
        gt_az.push_back(azimuth_deg(item.gt_pose));
        geodesic.push_back(rotation_geodesic_deg(item.pred_pose, item.gt_pose));
        hausdorff_per_instance.push_back(hausdorff(to_camera(item.pred_shape_obj, item.pred_pose),
                                                   to_camera(item.gt_shape_obj, item.gt_pose)));
    }

    const double thresholds[] = {5.0, 15.0, 30.0};
    json aop_json;
    double aop_vals[3];
    for (int t = 0; t < 3; ++t)
    {
        aop_vals[t] = aop(pred_aop, gt_aop, thresholds[t]);
        aop_json[std::to_string(static_cast<int>(thresholds[t]))] = aop_vals[t];
    }
    const double maae = mean_abs_angle_error(pred_az, gt_az);
    const double geo_mean = std::accumulate(geodesic.begin(), geodesic.end(), 0.0) /
                            static_cast<double>(geodesic.size());
    const ApkResult apk_res = apk(pred_kps, gt_kps, gt_boxes, masks, alpha);
    const double hd_mean =
        std::accumulate(hausdorff_per_instance.begin(), hausdorff_per_instance.end(), 0.0) /
        static_cast<double>(hausdorff_per_instance.size());

    json report;
    report["format_version"] = format_version_string();
    report["kind"] = "metric_report";
    report["instances_evaluated"] = items.size();
    report["excluded"] = excluded;
    report["aop"] = aop_json;
    report["mean_abs_angle_error_deg"] = maae;
    report["mean_geodesic_error_deg"] = geo_mean;
    json apk_per;
    for (int i = 0; i < Kp; ++i)
        apk_per[prior.names[static_cast<size_t>(i)]] = apk_res.per_keypoint[i];
    report["apk"] = json{{"alpha", alpha}, {"mean", apk_res.mean}, {"per_keypoint", apk_per}};
    report["hausdorff_mean"] = hd_mean;
    if (!out_path.empty())
        save_json(out_path, report);

    std::printf("instances evaluated: %zu (excluded: %zu)\n", items.size(), excluded.size());
    std::printf("%-28s %8s %8s %8s\n", "", "<=5deg", "<=15deg", "<=30deg");
    std::printf("%-28s %8.4f %8.4f %8.4f\n", "AOP", aop_vals[0], aop_vals[1], aop_vals[2]);
    std::printf("%-28s %8.4f\n", "mean abs azimuth err (deg)", maae);
    std::printf("%-28s %8.4f\n", "mean geodesic err (deg)", geo_mean);
    std::printf("APK (alpha=%.2f)             %8.4f\n", alpha, apk_res.mean);
    std::printf("%-28s %8.4f\n", "mean Hausdorff (m)", hd_mean);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"carshape: vehicle pose and shape estimation from single-image keypoints"};
    app.require_subcommand(1);

    CommonOptions common;

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string synth_out, synth_prior;
    int synth_modes = 5;
    std::optional<int> synth_instances;
    std::optional<double> synth_noise, synth_ofrac, synth_omag, synth_occ;
    std::optional<std::string> synth_projection;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--prior", synth_prior, "generator prior (default: built-in car template)");
    synth->add_option("--modes", synth_modes, "deformation modes of the built-in template")
        ->check(CLI::Range(0, 5));
    synth->add_option("--instances", synth_instances, "instance count");
    synth->add_option("--noise", synth_noise, "pixel noise sigma");
    synth->add_option("--outlier-fraction", synth_ofrac, "fraction of gross outliers");
    synth->add_option("--outlier-magnitude", synth_omag, "outlier displacement in px");
    synth->add_option("--occlusion", synth_occ, "fraction of occluded keypoints");
    synth->add_option("--projection", synth_projection, "perspective|orthographic");
    add_common(synth, common);

    auto* learn = app.add_subcommand("learn-prior", "fit a shape prior to 2D annotations");
    std::string learn_annotations, learn_out, learn_template;
    int learn_basis = 5;
    std::optional<int> learn_max_iters;
    std::optional<double> learn_tol;
    learn->add_option("--annotations", learn_annotations, "annotation JSON")->required();
    learn->add_option("--out", learn_out, "output prior JSON")->required();
    learn->add_option("--basis-size", learn_basis, "number of deformation basis vectors")
        ->check(CLI::PositiveNumber);
    learn->add_option("--template", learn_template, "metadata template prior JSON");
    learn->add_option("--max-iters", learn_max_iters, "EM iteration cap");
    learn->add_option("--tol", learn_tol, "EM relative log-likelihood tolerance");
    add_common(learn, common);

    auto* pose_cmd = app.add_subcommand("estimate-pose", "robust pose from keypoints");
    std::string pose_prior, pose_keypoints, pose_intrinsics, pose_out, pose_init, pose_gt;
    std::optional<int> pose_max_iters;
    pose_cmd->add_option("--prior", pose_prior, "prior JSON")->required();
    pose_cmd->add_option("--keypoints", pose_keypoints, "keypoint detections JSON")->required();
    pose_cmd->add_option("--intrinsics", pose_intrinsics, "intrinsics JSON")->required();
    pose_cmd->add_option("--out", pose_out, "output pose record JSON")->required();
    pose_cmd->add_option("--init-poses", pose_init,
                         "ground-truth file whose init_pose entries seed the solver");
    pose_cmd->add_option("--gt", pose_gt, "ground-truth file for the summary error report");
    pose_cmd->add_option("--max-iters", pose_max_iters, "IRLS iterations (default 5)");
    add_common(pose_cmd, common);

    auto* shape_cmd = app.add_subcommand("adjust-shape", "shape-aware adjustment at fixed pose");
    std::string shape_prior, shape_keypoints, shape_poses, shape_intrinsics, shape_out;
    std::optional<int> shape_rounds;
    shape_cmd->add_option("--prior", shape_prior, "prior JSON")->required();
    shape_cmd->add_option("--keypoints", shape_keypoints, "keypoint detections JSON")->required();
    shape_cmd->add_option("--poses", shape_poses, "pose record JSON")->required();
    shape_cmd->add_option("--intrinsics", shape_intrinsics, "intrinsics JSON")->required();
    shape_cmd->add_option("--out", shape_out, "output directory")->required();
    shape_cmd->add_option("--rounds", shape_rounds, "IRLS weight-update rounds (default 5)");
    add_common(shape_cmd, common);

    auto* eval_cmd = app.add_subcommand("eval", "metrics against a synthetic ground truth");
    std::string eval_pred, eval_gt, eval_out;
    double eval_alpha = 0.1;
    eval_cmd->add_option("--pred", eval_pred, "prediction directory")->required();
    eval_cmd->add_option("--gt", eval_gt, "ground-truth directory")->required();
    eval_cmd->add_option("--out", eval_out, "metric report JSON");
    eval_cmd->add_option("--alpha", eval_alpha, "APK threshold factor");
    add_common(eval_cmd, common);

    CLI11_PARSE(app, argc, argv);

    try
    {
        g_log_level = parse_log_level(common.log_level);
        if (synth->parsed())
            return run_synth(common, synth_out, synth_prior, synth_modes, synth_instances,
                             synth_noise, synth_ofrac, synth_omag, synth_occ, synth_projection);
        if (learn->parsed())
            return run_learn_prior(common, learn_annotations, learn_out, learn_basis,
                                   learn_template, learn_max_iters, learn_tol);
        if (pose_cmd->parsed())
            return run_estimate_pose(common, pose_prior, pose_keypoints, pose_intrinsics, pose_out,
                                     pose_init, pose_gt, pose_max_iters);
        if (shape_cmd->parsed())
            return run_adjust_shape(common, shape_prior, shape_keypoints, shape_poses,
                                    shape_intrinsics, shape_out, shape_rounds);
        if (eval_cmd->parsed())
            return run_eval(common, eval_pred, eval_gt, eval_out, eval_alpha);
    }
    catch (const SchemaError& e)
    {
        log_at(LogLevel::error, e.what());
        return 2;
    }
    catch (const std::exception& e)
    {
        log_at(LogLevel::error, e.what());
        return 1;
    }
    return 0;
}
