#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "posekit/annotation.hpp"
#include "posekit/fit.hpp"
#include "posekit/manifest.hpp"
#include "posekit/metrics.hpp"
#include "posekit/pfm.hpp"
#include "posekit/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace posekit;

#ifndef POSEKIT_DATA_DIR
#define POSEKIT_DATA_DIR "data"
#endif

namespace {

// Exit codes: 0 success, 2 input/schema, 3 numeric failure, 4 data alignment.
constexpr int kExitSchema = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitAlignment = 4;

uint64_t default_seed() {
    if (const char* env = std::getenv("POSEKIT_SEED")) {
        return std::strtoull(env, nullptr, 10);
    }
    return 0;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << text;
}

std::string keypoints_json(const PoseEstimate& pose) {
    ordered_json j;
    const auto& names = standard_keypoint_names();
    for (size_t i = 0; i < names.size(); ++i) {
        j[names[i]] = {pose.keypoints[i].x, pose.keypoints[i].y};
    }
    return j.dump(2) + "\n";
}

void write_pose_pfms(const fs::path& out_dir, const std::string& stem, const Heatmap& rendered,
                     RunManifest& manifest) {
    for (int c = 0; c < rendered.channels; ++c) {
        const fs::path p = out_dir / (stem + "." + rendered.channel_names[c] + ".pfm");
        write_pfm(p.string(), rendered, c);
        manifest.artifacts.emplace_back(p.filename().string(), file_hash_hex(p.string()));
    }
}

struct FitFlags {
    std::string mode = "baseline18";
    std::string param = "constrained";
    bool use_mse = true;
    bool flip_augment = false;
    std::string extractor = "identity";
    double step_size = 0.05;
    int max_iters = 500;
    double tol = 1e-7;
    uint64_t seed = default_seed();
    std::string config_path;
};

FitConfig resolve_fit_config(const FitFlags& flags, const CLI::App* cmd) {
    FitConfig cfg;
    if (!flags.config_path.empty()) cfg = fit_config_from_json(read_text_file(flags.config_path));
    auto given = [&](const std::string& name) { return cmd->count(name) > 0; };
    if (flags.config_path.empty() || given("--mode")) cfg.mode = mode_from_name(flags.mode);
    if (flags.config_path.empty() || given("--param")) {
        cfg.parameterization = parameterization_from_name(flags.param);
    }
    if (flags.config_path.empty() || given("--use-mse") || given("--no-use-mse")) {
        cfg.use_mse = flags.use_mse;
    }
    if (flags.config_path.empty() || given("--flip-augment")) cfg.flip_augment = flags.flip_augment;
    if (flags.config_path.empty() || given("--extractor")) cfg.extractor = flags.extractor;
    if (flags.config_path.empty() || given("--step-size")) cfg.step_size = flags.step_size;
    if (flags.config_path.empty() || given("--max-iters")) cfg.max_iters = flags.max_iters;
    if (flags.config_path.empty() || given("--tol")) cfg.tol = flags.tol;
    if (flags.config_path.empty() || given("--seed")) cfg.seed = flags.seed;
    return cfg;
}

// Targets directory layout: <frame_id>.<part_name>.pfm, 18 files per frame.
std::vector<std::pair<std::string, Heatmap>> load_targets(const std::string& dir) {
    std::map<std::string, std::map<std::string, std::string>> frames;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".pfm") continue;
        const std::string stem = entry.path().stem().string();  // "<frame>.<part>"
        const auto dot = stem.rfind('.');
        if (dot == std::string::npos) continue;
        const std::string part = stem.substr(dot + 1);
        if (part == "composite") continue;
        frames[stem.substr(0, dot)][part] = entry.path().string();
    }
    if (frames.empty()) throw SchemaError("no <frame>.<part>.pfm targets found in " + dir);
    std::vector<std::pair<std::string, Heatmap>> out;
    const auto& parts = standard_part_names();
    for (const auto& [frame_id, files] : frames) {
        Heatmap target;
        for (size_t i = 0; i < parts.size(); ++i) {
            const auto it = files.find(parts[i]);
            if (it == files.end()) {
                throw SchemaError("frame " + frame_id + " misses channel " + parts[i]);
            }
            const Heatmap plane = read_pfm(it->second);
            if (i == 0) {
                target = Heatmap(plane.width, plane.height, static_cast<int>(parts.size()));
                target.channel_names = parts;
            } else if (plane.width != target.width || plane.height != target.height) {
                throw SchemaError("frame " + frame_id + " has mismatched channel sizes");
            }
            std::copy(plane.data.begin(), plane.data.end(),
                      target.data.begin() + static_cast<long>(i * target.plane_size()));
        }
        out.emplace_back(frame_id, std::move(target));
    }
    return out;
}

int cmd_render(const std::string& template_path, const std::string& out_dir,
               std::vector<int> canvas_wh) {
    TemplateSpec t = load_template_file(template_path);
    CanvasDims canvas = t.canvas;
    if (canvas_wh.size() == 2) canvas = {canvas_wh[0], canvas_wh[1]};
    fs::create_directories(out_dir);

    const PoseEstimate pose = identity_pose(t, canvas);
    Heatmap rendered = render(pose);
    Heatmap comp = composite(rendered);

    RunManifest manifest;
    manifest.command = "render";
    ordered_json cfg;
    cfg["template"] = fs::path(template_path).filename().string();
    cfg["canvas"] = {canvas.width, canvas.height};
    manifest.config_json = cfg.dump();

    write_pose_pfms(out_dir, t.name, rendered, manifest);
    const fs::path comp_path = fs::path(out_dir) / (t.name + ".composite.pfm");
    write_pfm(comp_path.string(), comp, 0);
    manifest.artifacts.emplace_back(comp_path.filename().string(),
                                    file_hash_hex(comp_path.string()));
    const fs::path kp_path = fs::path(out_dir) / (t.name + ".keypoints.json");
    write_text_file(kp_path.string(), keypoints_json(pose));
    manifest.artifacts.emplace_back(kp_path.filename().string(), file_hash_hex(kp_path.string()));
    write_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
    std::cout << "rendered " << rendered.channels << " part channels + composite to " << out_dir
              << "\n";
    return 0;
}

int cmd_synth(const std::string& template_path, const std::string& out_dir, int n_frames,
              double amplitude, double noise, std::vector<int> canvas_wh, uint64_t seed,
              const std::string& subject, const std::string& profile_path) {
    TemplateSpec t = load_template_file(template_path);
    SyntheticSequenceSpec spec;
    spec.n_frames = n_frames;
    spec.motion_amplitude = amplitude;
    spec.noise_sigma = noise;
    spec.seed = seed;
    spec.subject_id = subject;
    if (canvas_wh.size() == 2) spec.canvas = {canvas_wh[0], canvas_wh[1]};
    if (!profile_path.empty()) {
        const ordered_json j = ordered_json::parse(read_text_file(profile_path));
        for (const auto& [limb, factor] : j.items()) {
            spec.subject_bplp_profile[limb] = factor.get<double>();
        }
    }
    const SyntheticSequence seq = generate_synthetic_sequence(spec, t);
    fs::create_directories(out_dir);

    RunManifest manifest;
    manifest.command = "synth";
    ordered_json cfg;
    cfg["template"] = fs::path(template_path).filename().string();
    cfg["n_frames"] = spec.n_frames;
    cfg["motion_amplitude"] = spec.motion_amplitude;
    cfg["noise_sigma"] = spec.noise_sigma;
    cfg["canvas"] = {spec.canvas.width, spec.canvas.height};
    cfg["subject_id"] = spec.subject_id;
    manifest.config_json = cfg.dump();
    manifest.seed = seed;

    std::vector<FrameAnnotation> gt;
    std::ostringstream transforms_out;
    for (const auto& frame : seq.frames) {
        write_pose_pfms(out_dir, frame.frame_id, frame.target, manifest);
        gt.push_back(frame.gt_annotation);
        ordered_json jt = ordered_json::parse(transform_set_to_json(frame.gt_transforms));
        ordered_json line;
        line["frame_id"] = frame.frame_id;
        line.update(jt);
        transforms_out << line.dump() << "\n";
    }
    const fs::path gt_path = fs::path(out_dir) / "gt.jsonl";
    write_annotations(gt_path.string(), gt);
    manifest.artifacts.emplace_back("gt.jsonl", file_hash_hex(gt_path.string()));
    const fs::path tr_path = fs::path(out_dir) / "gt_transforms.jsonl";
    write_text_file(tr_path.string(), transforms_out.str());
    manifest.artifacts.emplace_back("gt_transforms.jsonl", file_hash_hex(tr_path.string()));
    write_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
    std::cout << "generated " << seq.frames.size() << " synthetic frames in " << out_dir << "\n";
    return 0;
}

int cmd_fit(const std::string& targets_dir, const std::string& template_path,
            const std::string& out_dir, const FitConfig& cfg) {
    TemplateSpec t = load_template_file(template_path);
    const auto targets = load_targets(targets_dir);
    fs::create_directories(out_dir);

    std::vector<Heatmap> heatmaps;
    std::vector<std::string> frame_ids;
    heatmaps.reserve(targets.size());
    for (const auto& [id, hm] : targets) {
        frame_ids.push_back(id);
        heatmaps.push_back(hm);
    }

    const std::vector<FitResult> results = fit_sequence(heatmaps, t, cfg, frame_ids);

    std::ostringstream predictions, fit_log, transforms, summaries;
    for (size_t i = 0; i < results.size(); ++i) {
        const std::string& frame_id = targets[i].first;
        const FitResult& r = results[i];
        predictions << annotation_to_json(prediction_annotation(r, frame_id, "fit")) << "\n";
        for (size_t k = 0; k < r.loss_trace.size(); ++k) {
            ordered_json line;
            line["frame_id"] = frame_id;
            line["iteration"] = k;
            line["recon"] = r.loss_trace[k].recon;
            line["anchor"] = r.loss_trace[k].anchor;
            line["boundary"] = r.loss_trace[k].boundary;
            line["total"] = r.loss_trace[k].total;
            fit_log << line.dump() << "\n";
        }
        ordered_json jt = ordered_json::parse(transform_set_to_json(r.transforms));
        ordered_json tline;
        tline["frame_id"] = frame_id;
        tline.update(jt);
        transforms << tline.dump() << "\n";
        ordered_json sline;
        sline["frame_id"] = frame_id;
        sline["iterations"] = r.iterations;
        sline["converged"] = r.converged;
        sline["fitted_on_flip"] = r.fitted_on_flip;
        sline["final_total"] = r.loss_trace.back().total;
        sline["final_recon"] = r.loss_trace.back().recon;
        summaries << sline.dump() << "\n";
    }

    RunManifest manifest;
    manifest.command = "fit";
    ordered_json jc = ordered_json::parse(fit_config_to_json(cfg));
    jc["parameter_count"] = parameter_count(cfg.mode, cfg.parameterization);
    jc["mapping"] = ordered_json::parse(mapping_to_json(cfg.mapping));
    jc["template"] = fs::path(template_path).filename().string();
    jc["n_frames"] = results.size();
    manifest.config_json = jc.dump();
    manifest.seed = cfg.seed;

    const std::vector<std::pair<std::string, std::string>> files = {
        {"predictions.jsonl", predictions.str()},
        {"fit_log.jsonl", fit_log.str()},
        {"transforms.jsonl", transforms.str()},
        {"results.jsonl", summaries.str()},
    };
    for (const auto& [name, text] : files) {
        const fs::path p = fs::path(out_dir) / name;
        write_text_file(p.string(), text);
        manifest.artifacts.emplace_back(name, file_hash_hex(p.string()));
    }
    write_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
    std::cout << "fit " << results.size() << " frames (" << mode_name(cfg.mode) << ", "
              << parameterization_name(cfg.parameterization) << ", "
              << parameter_count(cfg.mode, cfg.parameterization) << " parameters) -> " << out_dir
              << "\n";
    return 0;
}

int cmd_eval(const std::string& gt_path, const std::string& pred_path, const std::string& out_dir,
             double threshold) {
    const auto gt = read_annotations(gt_path);
    const auto pred = read_annotations(pred_path);
    std::map<std::string, const FrameAnnotation*> gt_by_id, pred_by_id;
    for (const auto& a : gt) gt_by_id[a.frame_id] = &a;
    for (const auto& a : pred) pred_by_id[a.frame_id] = &a;

    std::vector<std::string> missing_pred, missing_gt;
    for (const auto& [id, _] : gt_by_id) {
        if (!pred_by_id.count(id)) missing_pred.push_back(id);
    }
    for (const auto& [id, _] : pred_by_id) {
        if (!gt_by_id.count(id)) missing_gt.push_back(id);
    }
    if (!missing_pred.empty() || !missing_gt.empty()) {
        std::ostringstream msg;
        msg << "frame id mismatch between gt and predictions;";
        if (!missing_pred.empty()) {
            msg << " missing predictions for:";
            for (const auto& id : missing_pred) msg << " " << id;
            msg << ";";
        }
        if (!missing_gt.empty()) {
            msg << " predictions without gt:";
            for (const auto& id : missing_gt) msg << " " << id;
        }
        throw LengthMismatch(msg.str());
    }

    std::vector<FrameAnnotation> gt_sorted, pred_sorted;
    for (const auto& [id, a] : gt_by_id) {  // std::map iterates by frame_id
        gt_sorted.push_back(*a);
        pred_sorted.push_back(*pred_by_id.at(id));
    }

    const MetricsReport report = pdj(gt_sorted, pred_sorted, threshold);
    BplpReport bplp_report;
    bool have_bplp = false;
    if (pred_sorted.size() >= 2) {
        bplp_report = bplp_consistency(pred_sorted);
        have_bplp = true;
    }

    fs::create_directories(out_dir);
    const std::string json_text =
        metrics_report_to_json(report, have_bplp ? &bplp_report : nullptr);
    write_text_file((fs::path(out_dir) / "report.json").string(), json_text + "\n");
    write_text_file((fs::path(out_dir) / "report.csv").string(),
                    metrics_report_to_csv(report, have_bplp ? &bplp_report : nullptr));
    std::cout << json_text << "\n";
    return 0;
}

int cmd_compare(const std::string& report_path, const std::string& reference_path) {
    const ordered_json report = ordered_json::parse(read_text_file(report_path));
    std::string ref_path = reference_path;
    if (ref_path.empty()) {
        if (const char* env = std::getenv("POSEKIT_DATA")) {
            ref_path = std::string(env) + "/reference_results.json";
        } else {
            ref_path = std::string(POSEKIT_DATA_DIR) + "/reference_results.json";
        }
    }
    const ordered_json ref = ordered_json::parse(read_text_file(ref_path));

    auto fmt = [](const ordered_json& j, const char* key) -> std::string {
        if (!j.contains(key)) return "-";
        std::ostringstream s;
        s << j[key].get<double>();
        return s.str();
    };

    std::cout << "your report (" << report_path << "):\n";
    std::cout << "  PDJ@0.05: " << fmt(report, "pdj") << "\n";
    std::cout << "  L2 error %: " << fmt(report, "l2") << "\n";
    std::cout << "  BPLP-C: " << fmt(report, "bplp_c") << "\n\n";
    std::cout << "published reference (not reproduced by this tool):\n";
    std::cout << "  " << ref["note"].get<std::string>() << "\n";
    for (const auto& model : ref["models"]) {
        std::cout << "  " << model["label"].get<std::string>() << ": PDJ "
                  << fmt(model, "pdj") << ", L2 " << fmt(model, "l2") << ", BPLP-C "
                  << fmt(model, "bplp_c") << "\n";
    }
    return 0;
}

int cmd_augment(const std::string& annotations_path, const std::string& out_path, double fraction,
                uint64_t seed) {
    if (fraction < 0.0 || fraction > 1.0) throw ValidationError("fraction must lie in [0, 1]");
    auto annotations = read_annotations(annotations_path);
    const size_t n = annotations.size();
    const size_t k = static_cast<size_t>(std::llround(fraction * static_cast<double>(n)));

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    }
    std::set<size_t> chosen(order.begin(), order.begin() + static_cast<long>(k));
    for (size_t i = 0; i < n; ++i) {
        if (chosen.count(i)) annotations[i] = flip_annotation(annotations[i]);
    }
    write_annotations(out_path, annotations);
    std::cout << "flipped " << k << " of " << n << " annotation records -> " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"template-transformation pose toolkit"};
    app.require_subcommand(1);

    // render
    std::string render_template, render_out;
    std::vector<int> render_canvas;
    auto* render_cmd = app.add_subcommand("render", "render a template to PFM heatmaps");
    render_cmd->add_option("template", render_template)->required();
    render_cmd->add_option("out_dir", render_out)->required();
    render_cmd->add_option("--canvas", render_canvas, "width height")->expected(2);

    // synth
    std::string synth_template, synth_out, synth_subject = "synthetic", synth_profile;
    int synth_frames = 10;
    double synth_amplitude = 0.5, synth_noise = 0.0;
    std::vector<int> synth_canvas;
    uint64_t synth_seed = default_seed();
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic target sequence");
    synth_cmd->add_option("template", synth_template)->required();
    synth_cmd->add_option("out_dir", synth_out)->required();
    synth_cmd->add_option("--frames", synth_frames);
    synth_cmd->add_option("--amplitude", synth_amplitude);
    synth_cmd->add_option("--noise", synth_noise);
    synth_cmd->add_option("--canvas", synth_canvas)->expected(2);
    synth_cmd->add_option("--seed", synth_seed);
    synth_cmd->add_option("--subject", synth_subject);
    synth_cmd->add_option("--profile", synth_profile, "JSON file of limb length factors");

    // fit
    std::string fit_targets, fit_template, fit_out;
    FitFlags fit_flags;
    auto* fit_cmd = app.add_subcommand("fit", "fit transforms to rendered targets");
    fit_cmd->add_option("targets_dir", fit_targets)->required();
    fit_cmd->add_option("template", fit_template)->required();
    fit_cmd->add_option("out_dir", fit_out)->required();
    fit_cmd->add_option("--mode", fit_flags.mode)
        ->check(CLI::IsMember({"baseline18", "coarse2fine20"}));
    fit_cmd->add_option("--param", fit_flags.param)
        ->check(CLI::IsMember({"full_affine", "constrained"}));
    fit_cmd->add_flag("--use-mse,!--no-use-mse", fit_flags.use_mse);
    fit_cmd->add_flag("--flip-augment", fit_flags.flip_augment);
    fit_cmd->add_option("--extractor", fit_flags.extractor)
        ->check(CLI::IsMember({"identity", "pyramid"}));
    fit_cmd->add_option("--step-size", fit_flags.step_size);
    fit_cmd->add_option("--max-iters", fit_flags.max_iters);
    fit_cmd->add_option("--tol", fit_flags.tol);
    fit_cmd->add_option("--seed", fit_flags.seed);
    fit_cmd->add_option("--config", fit_flags.config_path, "FitConfig JSON override file");

    // eval
    std::string eval_gt, eval_pred, eval_out = ".";
    double eval_threshold = 0.05;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate predictions against ground truth");
    eval_cmd->add_option("gt", eval_gt)->required();
    eval_cmd->add_option("pred", eval_pred)->required();
    eval_cmd->add_option("--out", eval_out);
    eval_cmd->add_option("--threshold", eval_threshold);

    // compare
    std::string compare_report, compare_reference;
    auto* compare_cmd =
        app.add_subcommand("compare", "show a report next to published reference values");
    compare_cmd->add_option("report", compare_report)->required();
    compare_cmd->add_option("--reference", compare_reference);

    // augment
    std::string augment_in, augment_out;
    double augment_fraction = 0.5;
    uint64_t augment_seed = default_seed();
    auto* augment_cmd = app.add_subcommand("augment", "flip a fraction of annotation records");
    augment_cmd->add_option("annotations", augment_in)->required();
    augment_cmd->add_option("out", augment_out)->required();
    augment_cmd->add_option("--fraction", augment_fraction);
    augment_cmd->add_option("--seed", augment_seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (render_cmd->parsed()) return cmd_render(render_template, render_out, render_canvas);
        if (synth_cmd->parsed()) {
            return cmd_synth(synth_template, synth_out, synth_frames, synth_amplitude, synth_noise,
                             synth_canvas, synth_seed, synth_subject, synth_profile);
        }
        if (fit_cmd->parsed()) {
            return cmd_fit(fit_targets, fit_template, fit_out,
                           resolve_fit_config(fit_flags, fit_cmd));
        }
        if (eval_cmd->parsed()) return cmd_eval(eval_gt, eval_pred, eval_out, eval_threshold);
        if (compare_cmd->parsed()) return cmd_compare(compare_report, compare_reference);
        if (augment_cmd->parsed()) {
            return cmd_augment(augment_in, augment_out, augment_fraction, augment_seed);
        }
    } catch (const SchemaError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitSchema;
    } catch (const ValidationError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitSchema;
    } catch (const MissingTransform& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitSchema;
    } catch (const LengthMismatch& e) {
        std::cerr << "alignment error: " << e.what() << "\n";
        return kExitAlignment;
    } catch (const ModeMismatch& e) {
        std::cerr << "alignment error: " << e.what() << "\n";
        return kExitAlignment;
    } catch (const Error& e) {  // numeric failures and remaining library errors
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
