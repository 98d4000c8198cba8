#pragma once

#include <map>
#include <string>
#include <vector>

#include "posekit/annotation.hpp"

namespace posekit {

struct MetricsReport {
    double pdj = 0.0;                         // PDJ@threshold in [0,1]
    std::map<std::string, double> per_joint;  // keypoint -> detection rate
    double l2 = 0.0;                          // percent of frame side
    int n_frames = 0;
};

struct BplpReport {
    std::map<std::string, double> per_limb_std;  // raw population sigma per limb
    double bplp_c = 0.0;
};

/// A limb measured between two of the 15 evaluation keypoints.
struct LimbSpec {
    std::string name;
    std::string from;
    std::string to;
};

/// The 8 segment limbs: left/right thigh, shin, upper arm, forearm.
const std::vector<LimbSpec>& default_limb_set();

inline constexpr double kSigmaFloor = 1e-6;  // per-limb sigma floor in BPLP-C

/// Diagonal of the axis-aligned bounding box of the ground-truth keypoints.
double person_diagonal(const FrameAnnotation& gt);

MetricsReport pdj(const std::vector<FrameAnnotation>& gt, const std::vector<FrameAnnotation>& pred,
                  double threshold = 0.05);

/// Mean keypoint distance over joints and frames, divided by the frame side
/// and reported as a percentage.
double l2_error(const std::vector<FrameAnnotation>& gt, const std::vector<FrameAnnotation>& pred);

/// Limb length over torso (neck-to-abdomen) length, per limb.
std::map<std::string, double> bplp(const FrameAnnotation& pred,
                                   const std::vector<LimbSpec>& limb_set = default_limb_set());

/// Reciprocal of the mean per-limb BPLP standard deviation across frames.
BplpReport bplp_consistency(const std::vector<FrameAnnotation>& preds,
                            const std::vector<LimbSpec>& limb_set = default_limb_set());

// Report serialization for the CLI (JSON object / CSV rows metric,key,value).
std::string metrics_report_to_json(const MetricsReport& m, const BplpReport* b);
std::string metrics_report_to_csv(const MetricsReport& m, const BplpReport* b);

}  // namespace posekit
