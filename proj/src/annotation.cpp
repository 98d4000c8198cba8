#include "posekit/annotation.hpp"

#include <fstream>

#include <json.hpp>

namespace posekit {

namespace {
using ordered_json = nlohmann::ordered_json;
}

Point2 FrameAnnotation::keypoint(const std::string& name) const {
    const int idx = keypoint_index(name);
    if (idx < 0) throw ValidationError("unknown keypoint name " + name);
    return keypoints[static_cast<size_t>(idx)];
}

void FrameAnnotation::set_keypoint(const std::string& name, Point2 p) {
    const int idx = keypoint_index(name);
    if (idx < 0) throw ValidationError("unknown keypoint name " + name);
    keypoints[static_cast<size_t>(idx)] = p;
}

FrameAnnotation flip_annotation(const FrameAnnotation& a) {
    FrameAnnotation out = a;
    const auto& names = standard_keypoint_names();
    for (size_t i = 0; i < names.size(); ++i) {
        const Point2 src = a.keypoint(swap_left_right(names[i]));
        out.keypoints[i] = {(a.width - 1) - src.x, src.y};
    }
    out.flipped = !a.flipped;
    return out;
}

FrameAnnotation annotation_from_json(const std::string& line) {
    ordered_json j;
    try {
        j = ordered_json::parse(line);
    } catch (const std::exception& e) {
        throw SchemaError(std::string("annotation parse error: ") + e.what());
    }
    FrameAnnotation a;
    try {
        a.frame_id = j.at("frame_id").get<std::string>();
        a.subject_id = j.at("subject_id").get<std::string>();
        a.width = j.at("image_size").at(0).get<int>();
        a.height = j.at("image_size").at(1).get<int>();
        const auto& kps = j.at("keypoints");
        for (const auto& name : standard_keypoint_names()) {
            const auto& jp = kps.at(name);
            a.set_keypoint(name, {jp.at(0).get<double>(), jp.at(1).get<double>()});
        }
        a.flipped = j.value("flipped", false);
    } catch (const std::exception& e) {
        throw SchemaError(std::string("annotation schema error: ") + e.what());
    }
    for (const auto& p : a.keypoints) {
        if (!p.finite()) throw ValidationError("non-finite keypoint in frame " + a.frame_id);
    }
    return a;
}

std::string annotation_to_json(const FrameAnnotation& a) {
    ordered_json j;
    j["frame_id"] = a.frame_id;
    j["subject_id"] = a.subject_id;
    j["image_size"] = {a.width, a.height};
    j["keypoints"] = ordered_json::object();
    const auto& names = standard_keypoint_names();
    for (size_t i = 0; i < names.size(); ++i) {
        j["keypoints"][names[i]] = {a.keypoints[i].x, a.keypoints[i].y};
    }
    if (a.flipped) j["flipped"] = true;
    return j.dump();
}

std::vector<FrameAnnotation> read_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open annotation file: " + path);
    std::vector<FrameAnnotation> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(annotation_from_json(line));
    }
    return out;
}

void write_annotations(const std::string& path, const std::vector<FrameAnnotation>& anns) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open annotation file for writing: " + path);
    for (const auto& a : anns) out << annotation_to_json(a) << "\n";
}

FrameAnnotation annotation_from_pose(const PoseEstimate& pose, const std::string& frame_id,
                                     const std::string& subject_id) {
    FrameAnnotation a;
    a.frame_id = frame_id;
    a.subject_id = subject_id;
    a.width = pose.canvas.width;
    a.height = pose.canvas.height;
    a.keypoints = pose.keypoints;
    return a;
}

}  // namespace posekit
