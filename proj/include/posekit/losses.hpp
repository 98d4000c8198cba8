#pragma once

#include <string>
#include <vector>

#include "posekit/coarse2fine.hpp"
#include "posekit/heatmap.hpp"
#include "posekit/template_model.hpp"

namespace posekit {

struct LossWeights {
    double lambda1 = 0.5;  // anchor
    double lambda2 = 1.0;  // boundary
};

struct LossReport {
    double recon = 0.0;
    double anchor = 0.0;
    double boundary = 0.0;
    double total = 0.0;
};

/// Deterministic stand-in for a perceptual backbone: maps a heatmap to a
/// fixed-length feature vector. Implementations must be linear so the L1
/// term backpropagates through transpose application.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::string name() const = 0;
    virtual std::vector<double> features(const Heatmap& h) const = 0;
    /// Accumulates J^T w into pixel_grad (sized like h.data) where J is the
    /// feature Jacobian and w a per-feature weight vector.
    virtual void backprop(const Heatmap& shape, const std::vector<double>& w,
                          std::vector<double>& pixel_grad) const = 0;
};

/// Raw pixels.
const FeatureExtractor& identity_extractor();
/// Three levels of 2x average pooling (2x, 4x, 8x), concatenated.
const FeatureExtractor& pyramid_extractor();
const FeatureExtractor& extractor_by_name(const std::string& name);

double mse_loss(const Heatmap& a, const Heatmap& b);
double perceptual_l1(const Heatmap& a, const Heatmap& b, const FeatureExtractor& f);

/// Mean squared pixel distance between the anchors of every adjacency pair,
/// normalized by the squared canvas diagonal.
double anchor_loss(const PoseEstimate& pose, const TemplateSpec& t);

/// Mean squared hinge violation of every part anchor against the frame
/// borders, normalized by the squared canvas diagonal.
double boundary_loss(const PoseEstimate& pose);

struct LossOptions {
    LossWeights weights{};
    bool use_mse = true;
    PartMapping mapping = default_mapping();
};

LossReport total_loss(const Heatmap& target, const TransformSet& ts, const TemplateSpec& t,
                      const FeatureExtractor& f, const LossOptions& opts = {});

/// Analytic gradient of total_loss with respect to the flat parameter vector
/// (see to_parameter_vector for the layout).
std::vector<double> loss_gradient(const Heatmap& target, const TransformSet& ts,
                                  const TemplateSpec& t, const FeatureExtractor& f,
                                  const LossOptions& opts = {});

/// One evaluation computing both; cheaper than two calls inside the fitter.
std::pair<LossReport, std::vector<double>> loss_and_gradient(const Heatmap& target,
                                                             const TransformSet& ts,
                                                             const TemplateSpec& t,
                                                             const FeatureExtractor& f,
                                                             const LossOptions& opts = {});

}  // namespace posekit
