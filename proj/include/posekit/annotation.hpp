#pragma once

#include <array>
#include <string>
#include <vector>

#include "posekit/geometry.hpp"
#include "posekit/template_model.hpp"

namespace posekit {

/// Ground-truth (or predicted) keypoints for one frame.
struct FrameAnnotation {
    std::string frame_id;
    std::string subject_id;
    int width = 0;
    int height = 0;
    std::array<Point2, kKeypointCount> keypoints{};  // canonical keypoint order
    bool flipped = false;  // provenance flag set by the augmenter

    Point2 keypoint(const std::string& name) const;
    void set_keypoint(const std::string& name, Point2 p);
};

/// Mirrors keypoints across the vertical axis (x -> W-1-x) and swaps
/// left/right keypoint names.
FrameAnnotation flip_annotation(const FrameAnnotation& a);

// JSON Lines: one object per frame
// {"frame_id":..,"subject_id":..,"image_size":[W,H],"keypoints":{name:[x,y]}}.
FrameAnnotation annotation_from_json(const std::string& line);
std::string annotation_to_json(const FrameAnnotation& a);
std::vector<FrameAnnotation> read_annotations(const std::string& path);
void write_annotations(const std::string& path, const std::vector<FrameAnnotation>& anns);

/// Pose keypoints as an annotation record (for prediction files).
FrameAnnotation annotation_from_pose(const PoseEstimate& pose, const std::string& frame_id,
                                     const std::string& subject_id);

}  // namespace posekit
