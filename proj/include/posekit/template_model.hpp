#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "posekit/geometry.hpp"
#include "posekit/heatmap.hpp"

namespace posekit {

enum class Endpoint { head, tail };

/// Anchor reference: one end of one body part.
struct AnchorRef {
    int part_id = 0;
    Endpoint end = Endpoint::head;
    bool operator==(const AnchorRef& o) const { return part_id == o.part_id && end == o.end; }
};

/// One Gaussian body part in template coordinates ([-1,1]^2, x right, y down).
struct PartSpec {
    int id = 0;  // 1..20
    std::string name;
    Point2 head;
    Point2 tail;
    double sigma_along = 0.0;
    double sigma_across = 0.0;
};

struct CanvasDims {
    int width = 256;
    int height = 256;
};

struct AdjacencyPair {
    AnchorRef a;
    AnchorRef b;
};

/// Body template: 18 Gaussian parts, the junction pairs the anchor loss
/// penalizes, and the mapping from the 15 evaluation keypoints to anchors.
struct TemplateSpec {
    std::string name;
    CanvasDims canvas;
    std::vector<PartSpec> parts;                // exactly 18
    std::vector<AdjacencyPair> adjacency;
    std::map<std::string, AnchorRef> keypoint_map;  // all 15 evaluation keypoints

    const PartSpec& part_by_id(int id) const;
    const PartSpec& part_by_name(const std::string& name) const;
    Point2 anchor(const AnchorRef& ref) const;
};

inline constexpr int kPartCount = 18;
inline constexpr int kKeypointCount = 15;

/// The 18 part names in canonical order (matrix order of the baseline setting).
const std::vector<std::string>& standard_part_names();
/// The 15 evaluation keypoint names in canonical order.
const std::vector<std::string>& standard_keypoint_names();
int keypoint_index(const std::string& name);  // -1 if unknown

/// "left_x" <-> "right_x"; other names unchanged.
std::string swap_left_right(const std::string& name);

// Template coordinates [-1,1] to pixel coordinates [0, W-1] and back.
Point2 template_to_pixel(Point2 p, const CanvasDims& canvas);
Point2 pixel_to_template(Point2 p, const CanvasDims& canvas);
/// Scale factor applied to sigmas when moving to pixel units.
double sigma_pixel_scale(const CanvasDims& canvas);

void validate_template(const TemplateSpec& t);
TemplateSpec load_template(const std::string& json_text);
TemplateSpec load_template_file(const std::string& path);
std::string template_to_json(const TemplateSpec& t);

/// One transformed part: pixel anchors plus pixel-scaled sigmas.
struct PosePart {
    int id = 0;
    std::string name;
    Point2 head_px;
    Point2 tail_px;
    double sigma_along_px = 0.0;
    double sigma_across_px = 0.0;
};

/// Transformed template: per-part pixel anchors and the 15 derived keypoints.
struct PoseEstimate {
    CanvasDims canvas;
    std::vector<PosePart> parts;                  // template part order
    std::array<Point2, kKeypointCount> keypoints{};  // canonical keypoint order

    Point2 keypoint(const std::string& name) const;
};

/// Applies per-part transforms (keyed by part name) in template space, then
/// maps anchors to pixels and derives keypoints through the keypoint map.
PoseEstimate transform_template(const TemplateSpec& t,
                                const std::map<std::string, AffineTransform>& transforms,
                                const CanvasDims& canvas);
PoseEstimate transform_template(const TemplateSpec& t,
                                const std::map<std::string, AffineTransform>& transforms);

/// Identity pose of the template itself.
PoseEstimate identity_pose(const TemplateSpec& t, const CanvasDims& canvas);

struct RenderOptions {
    // Skip pixels outside a 6.5-sigma bounding window around each part.
    // Values inside the window are bit-identical to the exact render and the
    // truncated tail is below 1e-9.
    bool windowed = false;
};

/// Renders each part as an anisotropic Gaussian: peak at the anchor midpoint,
/// long axis along head->tail with sigma max(sigma_along_px, half length),
/// short axis sigma_across_px.
Heatmap render(const PoseEstimate& pose, const RenderOptions& opts = {});
Heatmap render(const TemplateSpec& t, const CanvasDims& canvas, const RenderOptions& opts = {});

/// Mirrors the template across the vertical axis: x negated, left/right part
/// names and keypoint entries swapped.
TemplateSpec flip_template(const TemplateSpec& t);

}  // namespace posekit
