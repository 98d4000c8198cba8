#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "posekit/annotation.hpp"
#include "posekit/coarse2fine.hpp"
#include "posekit/losses.hpp"

namespace posekit {

struct FitConfig {
    Mode mode = Mode::baseline18;
    Parameterization parameterization = Parameterization::constrained;
    bool use_mse = true;
    LossWeights weights{};
    double step_size = 0.05;
    int max_iters = 500;
    double tol = 1e-7;  // relative total-loss decrease
    uint64_t seed = 0;
    std::string extractor = "identity";
    bool warm_start = false;    // fit_sequence: start frame k from frame k-1
    bool flip_augment = false;  // fit_sequence: fit a seeded half mirrored
    PartMapping mapping = default_mapping();
};

std::string fit_config_to_json(const FitConfig& cfg);
FitConfig fit_config_from_json(const std::string& json_text);

struct FitResult {
    TransformSet transforms;
    PoseEstimate pose;
    std::vector<LossReport> loss_trace;  // entry 0 is the initial loss
    int iterations = 0;
    bool converged = false;
    bool fitted_on_flip = false;  // pose lives in mirrored frame coordinates
};

/// Predicted keypoints in unmirrored frame coordinates.
FrameAnnotation prediction_annotation(const FitResult& r, const std::string& frame_id,
                                      const std::string& subject_id);

/// Gradient descent with Armijo backtracking (c = 1e-4, shrink 0.5) on the
/// total loss. Angles are wrapped and frame scales clamped after every step.
/// In coarse2fine20 mode the fine matrices stay frozen for the first quarter
/// of the iteration budget.
FitResult fit_frame(const Heatmap& target, const TemplateSpec& t, const FitConfig& cfg,
                    const TransformSet& init);
FitResult fit_frame(const Heatmap& target, const TemplateSpec& t, const FitConfig& cfg);

/// frame_ids, when given, only label error diagnostics.
std::vector<FitResult> fit_sequence(const std::vector<Heatmap>& targets, const TemplateSpec& t,
                                    const FitConfig& cfg,
                                    const std::vector<std::string>& frame_ids = {});

struct SyntheticSequenceSpec {
    int n_frames = 10;
    std::map<std::string, double> subject_bplp_profile;  // limb part name -> length factor
    double motion_amplitude = 0.5;
    // Relative per-frame jitter of the segment limb lengths. Zero keeps the
    // subject's proportions exact in every frame; nonzero mimics the 2D
    // foreshortening a constrained transform set cannot chase.
    double noise_sigma = 0.0;
    uint64_t seed = 0;
    CanvasDims canvas{64, 64};
    std::string subject_id = "synthetic";
};

struct SyntheticFrame {
    std::string frame_id;
    Heatmap target;
    TransformSet gt_transforms;  // baseline18, full_affine, relative to the base template
    FrameAnnotation gt_annotation;
};

struct SyntheticSequence {
    TemplateSpec subject_template;
    std::vector<SyntheticFrame> frames;
};

/// Rescales limb bones by per-part factors, walking the adjacency tree from
/// the core so junctions stay coincident.
TemplateSpec scale_limbs(const TemplateSpec& t, const std::map<std::string, double>& factors);

/// Deterministic synthetic sequence: smooth per-part rotations with junction
/// anchors kept attached, one frame scale per sequence, rendered targets plus
/// ground-truth transforms and annotations.
SyntheticSequence generate_synthetic_sequence(const SyntheticSequenceSpec& spec,
                                              const TemplateSpec& t);

/// Central-difference gradient of total_loss; test oracle for loss_gradient.
std::vector<double> finite_difference_gradient(const Heatmap& target, const TransformSet& ts,
                                               const TemplateSpec& t, const FeatureExtractor& f,
                                               const LossOptions& opts, double h);

}  // namespace posekit
