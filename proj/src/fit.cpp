#include "posekit/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "posekit/rng.hpp"

namespace posekit {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kArmijoC = 1e-4;
constexpr double kShrink = 0.5;
constexpr int kMaxBacktracks = 60;

struct TreeEdge {
    int child_id = 0;
    Endpoint child_end = Endpoint::head;
    int parent_id = 0;
    Endpoint parent_end = Endpoint::head;
};

// BFS over the adjacency pairs starting at the core. Parts never referenced
// by an adjacency pair (the head in the shipped templates) come back in
// `free_parts`.
std::pair<std::vector<TreeEdge>, std::vector<int>> kinematic_tree(const TemplateSpec& t) {
    const int root = t.part_by_name("core").id;
    std::set<int> placed = {root};
    std::vector<TreeEdge> edges;
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& pair : t.adjacency) {
            const bool a_in = placed.count(pair.a.part_id) > 0;
            const bool b_in = placed.count(pair.b.part_id) > 0;
            if (a_in == b_in) continue;
            TreeEdge e;
            if (a_in) {
                e = {pair.b.part_id, pair.b.end, pair.a.part_id, pair.a.end};
            } else {
                e = {pair.a.part_id, pair.a.end, pair.b.part_id, pair.b.end};
            }
            edges.push_back(e);
            placed.insert(e.child_id);
            grew = true;
        }
    }
    std::vector<int> free_parts;
    for (const auto& p : t.parts) {
        if (!placed.count(p.id)) free_parts.push_back(p.id);
    }
    return {edges, free_parts};
}

// Parameter indices whose gradient is masked while the fine matrices are
// frozen.
std::vector<char> fine_mask(const FitConfig& cfg, size_t n_params) {
    std::vector<char> mask(n_params, 0);
    if (cfg.mode != Mode::coarse2fine20) return mask;
    const int per_matrix = cfg.parameterization == Parameterization::constrained ? 3 : 6;
    for (int mi = 15; mi <= 20; ++mi) {
        for (int k = 0; k < per_matrix; ++k) mask[static_cast<size_t>((mi - 1) * per_matrix + k)] = 1;
    }
    return mask;
}

void project_parameters(const FitConfig& cfg, std::vector<double>& x) {
    if (cfg.parameterization != Parameterization::constrained) return;
    const int n = matrix_count(cfg.mode);
    for (int i = 0; i < n; ++i) x[static_cast<size_t>(i) * 3] = normalize_angle(x[static_cast<size_t>(i) * 3]);
    for (size_t k = x.size() - 2; k < x.size(); ++k) {
        x[k] = std::clamp(x[k], kMinFrameScale, kMaxFrameScale);
    }
}

}  // namespace

std::string fit_config_to_json(const FitConfig& cfg) {
    ordered_json j;
    j["mode"] = mode_name(cfg.mode);
    j["parameterization"] = parameterization_name(cfg.parameterization);
    j["use_mse"] = cfg.use_mse;
    j["lambda1"] = cfg.weights.lambda1;
    j["lambda2"] = cfg.weights.lambda2;
    j["step_size"] = cfg.step_size;
    j["max_iters"] = cfg.max_iters;
    j["tol"] = cfg.tol;
    j["seed"] = cfg.seed;
    j["extractor"] = cfg.extractor;
    j["warm_start"] = cfg.warm_start;
    j["flip_augment"] = cfg.flip_augment;
    return j.dump();
}

FitConfig fit_config_from_json(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw SchemaError(std::string("fit config parse error: ") + e.what());
    }
    FitConfig cfg;
    try {
        if (j.contains("mode")) cfg.mode = mode_from_name(j["mode"].get<std::string>());
        if (j.contains("parameterization")) {
            cfg.parameterization = parameterization_from_name(j["parameterization"].get<std::string>());
        }
        cfg.use_mse = j.value("use_mse", cfg.use_mse);
        cfg.weights.lambda1 = j.value("lambda1", cfg.weights.lambda1);
        cfg.weights.lambda2 = j.value("lambda2", cfg.weights.lambda2);
        cfg.step_size = j.value("step_size", cfg.step_size);
        cfg.max_iters = j.value("max_iters", cfg.max_iters);
        cfg.tol = j.value("tol", cfg.tol);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.extractor = j.value("extractor", cfg.extractor);
        cfg.warm_start = j.value("warm_start", cfg.warm_start);
        cfg.flip_augment = j.value("flip_augment", cfg.flip_augment);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw SchemaError(std::string("fit config schema error: ") + e.what());
    }
    if (!(cfg.step_size > 0.0)) throw ValidationError("step_size must be positive");
    if (cfg.max_iters < 1) throw ValidationError("max_iters must be positive");
    return cfg;
}

FrameAnnotation prediction_annotation(const FitResult& r, const std::string& frame_id,
                                      const std::string& subject_id) {
    FrameAnnotation ann = annotation_from_pose(r.pose, frame_id, subject_id);
    if (r.fitted_on_flip) {
        ann = flip_annotation(ann);
        ann.flipped = false;  // back in original frame coordinates
    }
    return ann;
}

FitResult fit_frame(const Heatmap& target, const TemplateSpec& t, const FitConfig& cfg,
                    const TransformSet& init) {
    if (init.mode != cfg.mode || init.parameterization != cfg.parameterization) {
        throw ModeMismatch("fit init does not match the configured mode/parameterization");
    }
    if (!(cfg.step_size > 0.0) || cfg.max_iters < 1) {
        throw ValidationError("fit config needs positive step_size and max_iters");
    }
    const FeatureExtractor& fx = extractor_by_name(cfg.extractor);
    LossOptions lopts;
    lopts.weights = cfg.weights;
    lopts.use_mse = cfg.use_mse;
    lopts.mapping = cfg.mapping;

    std::vector<double> x = to_parameter_vector(init);
    project_parameters(cfg, x);
    const std::vector<char> frozen = fine_mask(cfg, x.size());
    const int freeze_until = cfg.mode == Mode::coarse2fine20 ? cfg.max_iters / 4 : 0;

    auto value_at = [&](const std::vector<double>& v) {
        return total_loss(target, transform_set_from_vector(cfg.mode, cfg.parameterization, v), t,
                          fx, lopts);
    };
    auto value_grad_at = [&](const std::vector<double>& v) {
        return loss_and_gradient(target, transform_set_from_vector(cfg.mode, cfg.parameterization, v),
                                 t, fx, lopts);
    };

    auto [report, grad] = value_grad_at(x);
    if (!std::isfinite(report.total)) {
        throw NonFiniteLoss("non-finite loss at fit initialization");
    }

    FitResult result;
    result.loss_trace.push_back(report);
    bool converged = false;
    int accepted_steps = 0;

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        const bool fine_frozen = iter <= freeze_until;
        double gnorm2 = 0.0;
        for (size_t i = 0; i < grad.size(); ++i) {
            if (!std::isfinite(grad[i])) throw NonFiniteLoss("non-finite gradient during fit");
            if (fine_frozen && frozen[i]) continue;
            gnorm2 += grad[i] * grad[i];
        }
        if (gnorm2 == 0.0) {
            converged = true;
            break;
        }

        double step = cfg.step_size;
        std::vector<double> candidate;
        LossReport cand_report;
        bool accepted = false;
        for (int bt = 0; bt < kMaxBacktracks; ++bt) {
            candidate = x;
            for (size_t i = 0; i < x.size(); ++i) {
                if (fine_frozen && frozen[i]) continue;
                candidate[i] = x[i] - step * grad[i];
            }
            project_parameters(cfg, candidate);
            cand_report = value_at(candidate);
            if (std::isfinite(cand_report.total) &&
                cand_report.total <= report.total - kArmijoC * step * gnorm2) {
                accepted = true;
                break;
            }
            step *= kShrink;
        }
        if (!accepted) {  // stationary to machine precision
            converged = true;
            break;
        }

        const double decrease = report.total - cand_report.total;
        const double rel = decrease / std::max(std::abs(report.total), 1e-300);
        x = candidate;
        report = cand_report;
        result.loss_trace.push_back(report);
        ++accepted_steps;
        if (rel < cfg.tol) {
            converged = true;
            break;
        }
        grad = value_grad_at(x).second;
    }

    result.iterations = accepted_steps;
    result.converged = converged;
    result.transforms = transform_set_from_vector(cfg.mode, cfg.parameterization, x);
    result.pose = transform_template(t, effective_affines(result.transforms, cfg.mapping),
                                     CanvasDims{target.width, target.height});
    return result;
}

FitResult fit_frame(const Heatmap& target, const TemplateSpec& t, const FitConfig& cfg) {
    return fit_frame(target, t, cfg, identity_transform_set(cfg.mode, cfg.parameterization));
}

std::vector<FitResult> fit_sequence(const std::vector<Heatmap>& targets, const TemplateSpec& t,
                                    const FitConfig& cfg,
                                    const std::vector<std::string>& frame_ids) {
    if (targets.empty()) throw LengthMismatch("fit_sequence: empty target list");
    if (!frame_ids.empty() && frame_ids.size() != targets.size()) {
        throw LengthMismatch("fit_sequence: frame id list does not match targets");
    }

    std::vector<char> flip_mask(targets.size(), 0);
    if (cfg.flip_augment) {
        std::vector<size_t> order(targets.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(cfg.seed);
        for (size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
        }
        for (size_t i = 0; i < order.size() / 2; ++i) flip_mask[order[i]] = 1;
    }
    const TemplateSpec flipped_t = cfg.flip_augment ? flip_template(t) : t;

    std::vector<FitResult> results;
    results.reserve(targets.size());
    for (size_t i = 0; i < targets.size(); ++i) {
        const bool flip = flip_mask[i] != 0;
        TransformSet init = identity_transform_set(cfg.mode, cfg.parameterization);
        if (cfg.warm_start && !results.empty() &&
            results.back().fitted_on_flip == flip) {
            init = results.back().transforms;
        }
        FitResult r;
        try {
            r = flip ? fit_frame(flip_heatmap(targets[i]), flipped_t, cfg, init)
                     : fit_frame(targets[i], t, cfg, init);
        } catch (const NonFiniteLoss& e) {
            const std::string id =
                frame_ids.empty() ? "index " + std::to_string(i) : frame_ids[i];
            throw NonFiniteLoss(std::string(e.what()) + " (frame " + id + ")");
        }
        r.fitted_on_flip = flip;
        results.push_back(std::move(r));
    }
    return results;
}

TemplateSpec scale_limbs(const TemplateSpec& t, const std::map<std::string, double>& factors) {
    auto factor_of = [&](const std::string& name) {
        const auto it = factors.find(name);
        return it == factors.end() ? 1.0 : it->second;
    };
    for (const auto& [name, f] : factors) {
        if (!(f > 0.0)) throw ValidationError("limb scale factor must be positive for " + name);
        t.part_by_name(name);  // unknown name check
    }
    TemplateSpec out = t;
    auto part_ref = [&](int id) -> PartSpec& {
        for (auto& p : out.parts) {
            if (p.id == id) return p;
        }
        throw ValidationError("no part with id " + std::to_string(id));
    };

    const auto [edges, free_parts] = kinematic_tree(t);
    // Root and free parts scale about their own head anchor.
    for (const auto& p : t.parts) {
        const bool is_child =
            std::any_of(edges.begin(), edges.end(), [&](const TreeEdge& e) { return e.child_id == p.id; });
        if (is_child) continue;
        PartSpec& dst = part_ref(p.id);
        dst.tail = p.head + factor_of(p.name) * (p.tail - p.head);
    }
    for (const auto& e : edges) {
        const PartSpec& parent = part_ref(e.parent_id);
        const Point2 junction = e.parent_end == Endpoint::head ? parent.head : parent.tail;
        const PartSpec& orig = t.part_by_id(e.child_id);
        PartSpec& child = part_ref(e.child_id);
        const double f = factor_of(orig.name);
        if (e.child_end == Endpoint::head) {
            child.head = junction;
            child.tail = junction + f * (orig.tail - orig.head);
        } else {
            child.tail = junction;
            child.head = junction + f * (orig.head - orig.tail);
        }
    }
    validate_template(out);
    return out;
}

namespace {

// The unique rotation+isotropic-scale+translation map sending one anchor
// pair onto another.
AffineTransform similarity_from_anchor_pairs(Point2 a1, Point2 a2, Point2 b1, Point2 b2) {
    const Point2 da = a2 - a1;
    const Point2 db = b2 - b1;
    const double denom = dot(da, da);
    if (denom < 1e-30) return AffineTransform::translation(b1.x - a1.x, b1.y - a1.y);
    const double re = (db.x * da.x + db.y * da.y) / denom;
    const double im = (db.y * da.x - db.x * da.y) / denom;
    return AffineTransform::from_coefficients(re, -im, b1.x - (re * a1.x - im * a1.y), im, re,
                                              b1.y - (im * a1.x + re * a1.y));
}

// The eight segment limbs whose lengths jitter per frame under noise_sigma.
const std::vector<std::string>& jittered_limbs() {
    static const std::vector<std::string> limbs = {
        "left_thigh",     "right_thigh",     "left_shin",    "right_shin",
        "left_upper_arm", "right_upper_arm", "left_forearm", "right_forearm"};
    return limbs;
}

}  // namespace

SyntheticSequence generate_synthetic_sequence(const SyntheticSequenceSpec& spec,
                                              const TemplateSpec& t) {
    if (spec.n_frames < 1) throw ValidationError("synthetic sequence needs at least one frame");
    SyntheticSequence seq;
    seq.subject_template = scale_limbs(t, spec.subject_bplp_profile);
    const TemplateSpec& st = seq.subject_template;

    Rng rng(spec.seed);
    const FrameScale scale{1.0 + 0.08 * rng.uniform(-1.0, 1.0),
                           1.0 + 0.08 * rng.uniform(-1.0, 1.0)};

    struct Motion {
        double amp = 0.0, freq = 1.0, phase = 0.0;
        double at(double s) const { return amp * std::sin(2.0 * M_PI * freq * s + phase); }
    };
    auto draw_motion = [&](double amplitude) {
        Motion m;
        m.amp = amplitude * rng.uniform(-1.0, 1.0);
        m.freq = static_cast<double>(rng.uniform_int(1, 3));
        m.phase = rng.uniform(0.0, 2.0 * M_PI);
        return m;
    };

    const auto [edges, free_parts] = kinematic_tree(st);
    std::set<int> attached;
    for (const auto& e : edges) attached.insert(e.child_id);

    const auto& names = standard_part_names();
    std::map<std::string, Motion> theta_motion;
    std::map<std::string, std::pair<Motion, Motion>> shift_motion;  // root and free parts
    for (const auto& name : names) {
        theta_motion[name] = draw_motion(0.35 * spec.motion_amplitude);
        const PartSpec& p = st.part_by_name(name);
        if (!attached.count(p.id)) {
            shift_motion[name] = {draw_motion(0.06 * spec.motion_amplitude),
                                  draw_motion(0.06 * spec.motion_amplitude)};
        }
    }

    for (int k = 0; k < spec.n_frames; ++k) {
        const double s = spec.n_frames > 1 ? static_cast<double>(k) / spec.n_frames : 0.0;

        // Per-frame limb jitter the shared-scale parameterization cannot express.
        TemplateSpec frame_template = st;
        if (spec.noise_sigma > 0.0) {
            std::map<std::string, double> factors;
            for (const auto& limb : jittered_limbs()) {
                factors[limb] =
                    std::clamp(1.0 + spec.noise_sigma * rng.normal(), 0.5, 2.0);
            }
            frame_template = scale_limbs(st, factors);
        }

        TransformSet fk;
        fk.mode = Mode::baseline18;
        fk.parameterization = Parameterization::constrained;
        fk.params.assign(names.size(), ConstrainedTransformParams{});
        fk.scale = scale;

        std::map<int, size_t> slot_by_id;
        for (size_t i = 0; i < names.size(); ++i) {
            slot_by_id[frame_template.part_by_name(names[i]).id] = i;
        }
        for (size_t i = 0; i < names.size(); ++i) {
            fk.params[i].theta = theta_motion.at(names[i]).at(s);
        }
        for (const auto& [name, motion] : shift_motion) {
            const size_t i = slot_by_id.at(frame_template.part_by_name(name).id);
            fk.params[i].mu = motion.first.at(s);
            fk.params[i].delta = motion.second.at(s);
        }
        // Attach every child so its junction anchor lands exactly on the
        // parent's transformed anchor: mu,delta = R^T j - S a.
        for (const auto& e : edges) {
            const size_t pi = slot_by_id.at(e.parent_id);
            const PartSpec& parent = frame_template.part_by_id(e.parent_id);
            const Point2 pa = e.parent_end == Endpoint::head ? parent.head : parent.tail;
            const Point2 j = apply(build_constrained(fk.params[pi], fk.scale), pa);
            const size_t ci = slot_by_id.at(e.child_id);
            const PartSpec& child = frame_template.part_by_id(e.child_id);
            const Point2 a = e.child_end == Endpoint::head ? child.head : child.tail;
            const double c = std::cos(fk.params[ci].theta);
            const double sn = std::sin(fk.params[ci].theta);
            fk.params[ci].mu = c * j.x - sn * j.y - fk.scale.phi * a.x;
            fk.params[ci].delta = sn * j.x + c * j.y - fk.scale.beta * a.y;
        }

        SyntheticFrame frame;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "frame_%04d", k);
        frame.frame_id = buf;
        const PoseEstimate pose = transform_template(
            frame_template, effective_affines(fk, default_mapping()), spec.canvas);
        frame.target = render(pose);
        frame.gt_annotation = annotation_from_pose(pose, frame.frame_id, spec.subject_id);

        // Ground truth relative to the base template: per part, the similarity
        // carrying its base anchors onto the posed anchors.
        frame.gt_transforms.mode = Mode::baseline18;
        frame.gt_transforms.parameterization = Parameterization::full_affine;
        for (size_t i = 0; i < names.size(); ++i) {
            const PartSpec& base = t.part_by_name(names[i]);
            const PartSpec& posed = frame_template.part_by_name(names[i]);
            const AffineTransform m = build_constrained(fk.params[i], fk.scale);
            frame.gt_transforms.affines.push_back(similarity_from_anchor_pairs(
                base.head, base.tail, apply(m, posed.head), apply(m, posed.tail)));
        }
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

std::vector<double> finite_difference_gradient(const Heatmap& target, const TransformSet& ts,
                                               const TemplateSpec& t, const FeatureExtractor& f,
                                               const LossOptions& opts, double h) {
    if (!(h >= 1e-8 && h <= 1e-2)) {
        throw ValidationError("finite difference step must lie in [1e-8, 1e-2]");
    }
    std::vector<double> x = to_parameter_vector(ts);
    std::vector<double> grad(x.size(), 0.0);
    for (size_t i = 0; i < x.size(); ++i) {
        std::vector<double> plus = x, minus = x;
        plus[i] += h;
        minus[i] -= h;
        const double fp =
            total_loss(target, transform_set_from_vector(ts.mode, ts.parameterization, plus), t, f,
                       opts)
                .total;
        const double fm =
            total_loss(target, transform_set_from_vector(ts.mode, ts.parameterization, minus), t, f,
                       opts)
                .total;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

}  // namespace posekit
