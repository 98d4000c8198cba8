#include "posekit/template_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace posekit {

namespace {

using ordered_json = nlohmann::ordered_json;

Endpoint parse_endpoint(const std::string& s) {
    if (s == "head") return Endpoint::head;
    if (s == "tail") return Endpoint::tail;
    throw SchemaError("endpoint must be \"head\" or \"tail\", got \"" + s + "\"");
}

const char* endpoint_name(Endpoint e) { return e == Endpoint::head ? "head" : "tail"; }

constexpr double kMaxConditionNumber = 1e8;

}  // namespace

const std::vector<std::string>& standard_part_names() {
    static const std::vector<std::string> names = {
        "core",           "left_hip",       "right_hip",     "left_thigh",  "right_thigh",
        "left_shin",      "right_shin",     "left_shoulder", "right_shoulder",
        "left_upper_arm", "right_upper_arm", "left_forearm",  "right_forearm",
        "left_hand",      "right_hand",     "left_foot",     "right_foot",  "head"};
    return names;
}

const std::vector<std::string>& standard_keypoint_names() {
    static const std::vector<std::string> names = {
        "abdomen",    "chest",       "neck",           "left_hip",   "right_hip",
        "left_shoulder", "right_shoulder", "left_knee", "right_knee", "left_ankle",
        "right_ankle", "left_elbow", "right_elbow",    "left_wrist", "right_wrist"};
    return names;
}

int keypoint_index(const std::string& name) {
    const auto& names = standard_keypoint_names();
    const auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

std::string swap_left_right(const std::string& name) {
    if (name.rfind("left_", 0) == 0) return "right_" + name.substr(5);
    if (name.rfind("right_", 0) == 0) return "left_" + name.substr(6);
    return name;
}

const PartSpec& TemplateSpec::part_by_id(int id) const {
    for (const auto& p : parts) {
        if (p.id == id) return p;
    }
    throw ValidationError("no part with id " + std::to_string(id));
}

const PartSpec& TemplateSpec::part_by_name(const std::string& n) const {
    for (const auto& p : parts) {
        if (p.name == n) return p;
    }
    throw ValidationError("no part named " + n);
}

Point2 TemplateSpec::anchor(const AnchorRef& ref) const {
    const PartSpec& p = part_by_id(ref.part_id);
    return ref.end == Endpoint::head ? p.head : p.tail;
}

Point2 template_to_pixel(Point2 p, const CanvasDims& canvas) {
    return {(p.x + 1.0) / 2.0 * (canvas.width - 1), (p.y + 1.0) / 2.0 * (canvas.height - 1)};
}

Point2 pixel_to_template(Point2 p, const CanvasDims& canvas) {
    return {p.x / (canvas.width - 1) * 2.0 - 1.0, p.y / (canvas.height - 1) * 2.0 - 1.0};
}

double sigma_pixel_scale(const CanvasDims& canvas) {
    // Mean of the two half-extents; equals (W-1)/2 on square canvases.
    return ((canvas.width - 1) + (canvas.height - 1)) / 4.0;
}

void validate_template(const TemplateSpec& t) {
    if (static_cast<int>(t.parts.size()) != kPartCount) {
        throw ValidationError("template must have exactly 18 parts, got " +
                              std::to_string(t.parts.size()));
    }
    if (t.canvas.width <= 1 || t.canvas.height <= 1) {
        throw ValidationError("canvas dimensions must exceed 1 pixel");
    }
    std::set<int> ids;
    std::set<std::string> names;
    for (const auto& p : t.parts) {
        if (p.id < 1 || p.id > 20) {
            throw ValidationError("part id out of range 1..20: " + std::to_string(p.id));
        }
        if (!ids.insert(p.id).second) {
            throw ValidationError("duplicate part id " + std::to_string(p.id));
        }
        if (!names.insert(p.name).second) throw ValidationError("duplicate part name " + p.name);
        if (!p.head.finite() || !p.tail.finite()) {
            throw ValidationError("non-finite anchor in part " + p.name);
        }
        if (!(p.sigma_along > 0.0) || !(p.sigma_across > 0.0)) {
            throw ValidationError("sigmas must be positive in part " + p.name);
        }
        if (p.head.x == p.tail.x && p.head.y == p.tail.y && p.sigma_along != p.sigma_across) {
            throw ValidationError("part " + p.name +
                                  " has coincident anchors but anisotropic sigmas");
        }
    }
    const auto& expected = standard_part_names();
    if (names != std::set<std::string>(expected.begin(), expected.end())) {
        throw ValidationError("part names must be exactly the 18 standard body part names");
    }
    for (const auto& pair : t.adjacency) {
        if (!ids.count(pair.a.part_id) || !ids.count(pair.b.part_id)) {
            throw ValidationError("adjacency references unknown part id");
        }
    }
    const auto& kp_names = standard_keypoint_names();
    if (t.keypoint_map.size() != kp_names.size()) {
        throw ValidationError("keypoint_map must cover exactly the 15 evaluation keypoints");
    }
    for (const auto& name : kp_names) {
        const auto it = t.keypoint_map.find(name);
        if (it == t.keypoint_map.end()) throw ValidationError("keypoint_map misses " + name);
        if (!ids.count(it->second.part_id)) {
            throw ValidationError("keypoint " + name + " references unknown part id");
        }
    }
}

TemplateSpec load_template(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw SchemaError(std::string("template JSON parse error: ") + e.what());
    }
    TemplateSpec t;
    try {
        t.name = j.at("name").get<std::string>();
        t.canvas.width = j.at("canvas").at("width").get<int>();
        t.canvas.height = j.at("canvas").at("height").get<int>();
        for (const auto& jp : j.at("parts")) {
            PartSpec p;
            p.id = jp.at("id").get<int>();
            p.name = jp.at("name").get<std::string>();
            p.head = {jp.at("head").at(0).get<double>(), jp.at("head").at(1).get<double>()};
            p.tail = {jp.at("tail").at(0).get<double>(), jp.at("tail").at(1).get<double>()};
            p.sigma_along = jp.at("sigma_along").get<double>();
            p.sigma_across = jp.at("sigma_across").get<double>();
            t.parts.push_back(p);
        }
        for (const auto& ja : j.at("adjacency")) {
            AdjacencyPair pair;
            pair.a = {ja.at(0).get<int>(), parse_endpoint(ja.at(1).get<std::string>())};
            pair.b = {ja.at(2).get<int>(), parse_endpoint(ja.at(3).get<std::string>())};
            t.adjacency.push_back(pair);
        }
        for (const auto& [name, jref] : j.at("keypoint_map").items()) {
            t.keypoint_map[name] = {jref.at(0).get<int>(),
                                    parse_endpoint(jref.at(1).get<std::string>())};
        }
    } catch (const SchemaError&) {
        throw;
    } catch (const std::exception& e) {
        throw SchemaError(std::string("template schema error: ") + e.what());
    }
    validate_template(t);
    return t;
}

TemplateSpec load_template_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open template file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return load_template(buf.str());
}

std::string template_to_json(const TemplateSpec& t) {
    ordered_json j;
    j["name"] = t.name;
    j["canvas"] = {{"width", t.canvas.width}, {"height", t.canvas.height}};
    j["parts"] = ordered_json::array();
    for (const auto& p : t.parts) {
        j["parts"].push_back({{"id", p.id},
                              {"name", p.name},
                              {"head", {p.head.x, p.head.y}},
                              {"tail", {p.tail.x, p.tail.y}},
                              {"sigma_along", p.sigma_along},
                              {"sigma_across", p.sigma_across}});
    }
    j["adjacency"] = ordered_json::array();
    for (const auto& pair : t.adjacency) {
        j["adjacency"].push_back({pair.a.part_id, endpoint_name(pair.a.end), pair.b.part_id,
                                  endpoint_name(pair.b.end)});
    }
    j["keypoint_map"] = ordered_json::object();
    for (const auto& name : standard_keypoint_names()) {
        const auto& ref = t.keypoint_map.at(name);
        j["keypoint_map"][name] = {ref.part_id, endpoint_name(ref.end)};
    }
    return j.dump(2);
}

Point2 PoseEstimate::keypoint(const std::string& name) const {
    const int idx = keypoint_index(name);
    if (idx < 0) throw ValidationError("unknown keypoint name " + name);
    return keypoints[static_cast<size_t>(idx)];
}

PoseEstimate transform_template(const TemplateSpec& t,
                                const std::map<std::string, AffineTransform>& transforms,
                                const CanvasDims& canvas) {
    PoseEstimate pose;
    pose.canvas = canvas;
    const double s_px = sigma_pixel_scale(canvas);
    for (const auto& p : t.parts) {
        const auto it = transforms.find(p.name);
        if (it == transforms.end()) throw MissingTransform("no transform for part " + p.name);
        PosePart out;
        out.id = p.id;
        out.name = p.name;
        out.head_px = template_to_pixel(apply(it->second, p.head), canvas);
        out.tail_px = template_to_pixel(apply(it->second, p.tail), canvas);
        out.sigma_along_px = p.sigma_along * s_px;
        out.sigma_across_px = p.sigma_across * s_px;
        pose.parts.push_back(out);
    }
    for (const auto& [kp_name, ref] : t.keypoint_map) {
        const int idx = keypoint_index(kp_name);
        const PartSpec& src = t.part_by_id(ref.part_id);
        for (const auto& pp : pose.parts) {
            if (pp.id != src.id) continue;
            pose.keypoints[static_cast<size_t>(idx)] =
                ref.end == Endpoint::head ? pp.head_px : pp.tail_px;
            break;
        }
    }
    return pose;
}

PoseEstimate transform_template(const TemplateSpec& t,
                                const std::map<std::string, AffineTransform>& transforms) {
    return transform_template(t, transforms, t.canvas);
}

PoseEstimate identity_pose(const TemplateSpec& t, const CanvasDims& canvas) {
    std::map<std::string, AffineTransform> id;
    for (const auto& p : t.parts) id[p.name] = AffineTransform::identity();
    return transform_template(t, id, canvas);
}

Heatmap render(const PoseEstimate& pose, const RenderOptions& opts) {
    const int w = pose.canvas.width;
    const int h = pose.canvas.height;
    if (w <= 0 || h <= 0) throw ValidationError("render canvas must be positive");
    Heatmap out(w, h, static_cast<int>(pose.parts.size()));
    for (size_t c = 0; c < pose.parts.size(); ++c) {
        const PosePart& p = pose.parts[c];
        out.channel_names.push_back(p.name);
        const Point2 d = p.tail_px - p.head_px;
        const double len = norm(d);
        const double cx = len > 0.0 ? d.x / len : 1.0;
        const double cy = len > 0.0 ? d.y / len : 0.0;
        const double sa = std::max(p.sigma_along_px, len / 2.0);
        const double sc = p.sigma_across_px;
        if (!(sa > 0.0) || !(sc > 0.0)) throw DegeneratePart("zero sigma in part " + p.name);
        const double ratio = std::max(sa / sc, sc / sa);
        if (ratio * ratio > kMaxConditionNumber) {
            throw DegeneratePart("covariance of part " + p.name + " is near singular");
        }
        const Point2 mu = 0.5 * (p.head_px + p.tail_px);
        const double inv_sa2 = 1.0 / (sa * sa);
        const double inv_sc2 = 1.0 / (sc * sc);

        int x0 = 0, x1 = w - 1, y0 = 0, y1 = h - 1;
        if (opts.windowed) {
            const double r = 6.5;  // exp(-r^2/2) < 1e-9 outside
            const double ex = r * std::sqrt(cx * cx * sa * sa + cy * cy * sc * sc);
            const double ey = r * std::sqrt(cy * cy * sa * sa + cx * cx * sc * sc);
            x0 = std::max(0, static_cast<int>(std::floor(mu.x - ex)));
            x1 = std::min(w - 1, static_cast<int>(std::ceil(mu.x + ex)));
            y0 = std::max(0, static_cast<int>(std::floor(mu.y - ey)));
            y1 = std::min(h - 1, static_cast<int>(std::ceil(mu.y + ey)));
        }
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double rx = x - mu.x;
                const double ry = y - mu.y;
                const double qa = cx * rx + cy * ry;
                const double qc = -cy * rx + cx * ry;
                out.at(static_cast<int>(c), y, x) =
                    std::exp(-0.5 * (qa * qa * inv_sa2 + qc * qc * inv_sc2));
            }
        }
    }
    return out;
}

Heatmap render(const TemplateSpec& t, const CanvasDims& canvas, const RenderOptions& opts) {
    return render(identity_pose(t, canvas), opts);
}

TemplateSpec flip_template(const TemplateSpec& t) {
    TemplateSpec out = t;
    for (auto& p : out.parts) {
        p.name = swap_left_right(p.name);
        p.head.x = -p.head.x;
        p.tail.x = -p.tail.x;
    }
    out.keypoint_map.clear();
    for (const auto& [name, ref] : t.keypoint_map) out.keypoint_map[swap_left_right(name)] = ref;
    return out;
}

}  // namespace posekit
