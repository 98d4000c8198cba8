#include "posekit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace posekit {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kTorsoEps = 1e-9;

void check_aligned(const std::vector<FrameAnnotation>& gt,
                   const std::vector<FrameAnnotation>& pred) {
    if (gt.empty() || gt.size() != pred.size()) {
        throw LengthMismatch("gt has " + std::to_string(gt.size()) + " frames, pred has " +
                             std::to_string(pred.size()));
    }
}

}  // namespace

const std::vector<LimbSpec>& default_limb_set() {
    static const std::vector<LimbSpec> limbs = {
        {"left_thigh", "left_hip", "left_knee"},
        {"right_thigh", "right_hip", "right_knee"},
        {"left_shin", "left_knee", "left_ankle"},
        {"right_shin", "right_knee", "right_ankle"},
        {"left_upper_arm", "left_shoulder", "left_elbow"},
        {"right_upper_arm", "right_shoulder", "right_elbow"},
        {"left_forearm", "left_elbow", "left_wrist"},
        {"right_forearm", "right_elbow", "right_wrist"},
    };
    return limbs;
}

double person_diagonal(const FrameAnnotation& gt) {
    double min_x = gt.keypoints[0].x, max_x = min_x;
    double min_y = gt.keypoints[0].y, max_y = min_y;
    for (const auto& p : gt.keypoints) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    const double dx = max_x - min_x;
    const double dy = max_y - min_y;
    if (dx == 0.0 && dy == 0.0) {
        throw DegenerateBox("all keypoints coincide in frame " + gt.frame_id);
    }
    return std::hypot(dx, dy);
}

MetricsReport pdj(const std::vector<FrameAnnotation>& gt, const std::vector<FrameAnnotation>& pred,
                  double threshold) {
    check_aligned(gt, pred);
    const auto& names = standard_keypoint_names();
    MetricsReport report;
    report.n_frames = static_cast<int>(gt.size());
    std::vector<double> joint_hits(names.size(), 0.0);
    double frame_mean_acc = 0.0;
    for (size_t f = 0; f < gt.size(); ++f) {
        const double limit = threshold * person_diagonal(gt[f]);
        int hits = 0;
        for (size_t j = 0; j < names.size(); ++j) {
            if (distance(gt[f].keypoints[j], pred[f].keypoints[j]) <= limit) {
                ++hits;
                joint_hits[j] += 1.0;
            }
        }
        frame_mean_acc += static_cast<double>(hits) / static_cast<double>(names.size());
    }
    report.pdj = frame_mean_acc / static_cast<double>(gt.size());
    for (size_t j = 0; j < names.size(); ++j) {
        report.per_joint[names[j]] = joint_hits[j] / static_cast<double>(gt.size());
    }
    report.l2 = l2_error(gt, pred);
    return report;
}

double l2_error(const std::vector<FrameAnnotation>& gt, const std::vector<FrameAnnotation>& pred) {
    check_aligned(gt, pred);
    const auto& names = standard_keypoint_names();
    double acc = 0.0;
    for (size_t f = 0; f < gt.size(); ++f) {
        for (size_t j = 0; j < names.size(); ++j) {
            acc += distance(gt[f].keypoints[j], pred[f].keypoints[j]) /
                   static_cast<double>(gt[f].width);
        }
    }
    return acc / static_cast<double>(gt.size() * names.size()) * 100.0;
}

std::map<std::string, double> bplp(const FrameAnnotation& pred,
                                   const std::vector<LimbSpec>& limb_set) {
    const double torso = distance(pred.keypoint("neck"), pred.keypoint("abdomen"));
    if (torso <= kTorsoEps) {
        throw DegenerateTorso("torso length is degenerate in frame " + pred.frame_id);
    }
    std::map<std::string, double> out;
    for (const auto& limb : limb_set) {
        out[limb.name] = distance(pred.keypoint(limb.from), pred.keypoint(limb.to)) / torso;
    }
    return out;
}

BplpReport bplp_consistency(const std::vector<FrameAnnotation>& preds,
                            const std::vector<LimbSpec>& limb_set) {
    if (preds.size() < 2) throw LengthMismatch("bplp_consistency needs at least 2 frames");
    std::map<std::string, std::vector<double>> series;
    for (const auto& p : preds) {
        for (const auto& [limb, value] : bplp(p, limb_set)) series[limb].push_back(value);
    }
    BplpReport report;
    double sigma_acc = 0.0;
    for (const auto& [limb, values] : series) {
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        var /= static_cast<double>(values.size());  // population convention
        const double sigma = std::sqrt(var);
        report.per_limb_std[limb] = sigma;
        sigma_acc += std::max(sigma, kSigmaFloor);
    }
    report.bplp_c = static_cast<double>(series.size()) / sigma_acc;
    return report;
}

std::string metrics_report_to_json(const MetricsReport& m, const BplpReport* b) {
    ordered_json j;
    j["pdj"] = m.pdj;
    j["l2"] = m.l2;
    j["n_frames"] = m.n_frames;
    j["per_joint"] = ordered_json::object();
    for (const auto& name : standard_keypoint_names()) {
        if (m.per_joint.count(name)) j["per_joint"][name] = m.per_joint.at(name);
    }
    if (b != nullptr) {
        j["bplp_c"] = b->bplp_c;
        j["per_limb_std"] = ordered_json::object();
        for (const auto& [limb, sigma] : b->per_limb_std) j["per_limb_std"][limb] = sigma;
    }
    return j.dump(2);
}

std::string metrics_report_to_csv(const MetricsReport& m, const BplpReport* b) {
    std::ostringstream out;
    out.precision(17);
    out << "metric,key,value\n";
    out << "pdj,," << m.pdj << "\n";
    out << "l2,," << m.l2 << "\n";
    out << "n_frames,," << m.n_frames << "\n";
    for (const auto& name : standard_keypoint_names()) {
        if (m.per_joint.count(name)) out << "per_joint," << name << "," << m.per_joint.at(name) << "\n";
    }
    if (b != nullptr) {
        out << "bplp_c,," << b->bplp_c << "\n";
        for (const auto& [limb, sigma] : b->per_limb_std) {
            out << "bplp_std," << limb << "," << sigma << "\n";
        }
    }
    return out.str();
}

}  // namespace posekit
