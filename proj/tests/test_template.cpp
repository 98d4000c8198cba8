#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <string>

#include "posekit/pfm.hpp"
#include "posekit/rng.hpp"
#include "posekit/template_model.hpp"

using namespace posekit;

namespace {

const std::string kDataDir = POSEKIT_DATA_DIR;

TemplateSpec t_new() { return load_template_file(kDataDir + "/t_new.json"); }
TemplateSpec t_orig() { return load_template_file(kDataDir + "/t_orig.json"); }

std::map<std::string, AffineTransform> identity_transforms(const TemplateSpec& t) {
    std::map<std::string, AffineTransform> m;
    for (const auto& p : t.parts) m[p.name] = AffineTransform::identity();
    return m;
}

PoseEstimate single_part_pose(Point2 head, Point2 tail, double sa, double sc, int wh = 64) {
    PoseEstimate pose;
    pose.canvas = {wh, wh};
    pose.parts.push_back({1, "part", head, tail, sa, sc});
    return pose;
}

}  // namespace

TEST_CASE("shipped presets load and have the expected arm geometry") {
    const TemplateSpec orig = t_orig();
    const TemplateSpec tn = t_new();
    CHECK(orig.parts.size() == 18);
    CHECK(tn.parts.size() == 18);

    // t_orig: arm tails point laterally outward
    for (const std::string side : {"left", "right"}) {
        for (const std::string seg : {"upper_arm", "forearm", "hand"}) {
            const PartSpec& p = orig.part_by_name(side + "_" + seg);
            CHECK(std::abs(p.tail.x) > std::abs(p.head.x));
        }
    }
    // t_new: arm chains point downward
    for (const std::string side : {"left", "right"}) {
        for (const std::string seg : {"upper_arm", "forearm", "hand"}) {
            const PartSpec& p = tn.part_by_name(side + "_" + seg);
            CHECK(p.tail.y > p.head.y);
        }
    }
    // shipped adjacency junctions coincide exactly, so the template pose is
    // an exact zero of the anchor loss
    for (const auto& t : {orig, tn}) {
        for (const auto& pair : t.adjacency) {
            const Point2 a = t.anchor(pair.a);
            const Point2 b = t.anchor(pair.b);
            CHECK(a.x == b.x);
            CHECK(a.y == b.y);
        }
    }
}

TEST_CASE("template validation errors") {
    CHECK_THROWS_AS(load_template("{"), SchemaError);
    CHECK_THROWS_AS(load_template("{}"), SchemaError);
    CHECK_THROWS_AS(load_template(R"({"name":"x","canvas":{"width":64,"height":64},)"
                                  R"("parts":[],"adjacency":[],"keypoint_map":{}})"),
                    ValidationError);

    TemplateSpec t = t_new();
    t.parts.pop_back();  // 17 parts
    CHECK_THROWS_AS(validate_template(t), ValidationError);

    TemplateSpec dangling = t_new();
    dangling.adjacency.push_back({{99, Endpoint::head}, {1, Endpoint::tail}});
    CHECK_THROWS_AS(validate_template(dangling), ValidationError);

    TemplateSpec bad_sigma = t_new();
    bad_sigma.parts[0].sigma_along = 0.0;
    CHECK_THROWS_AS(validate_template(bad_sigma), ValidationError);
}

TEST_CASE("transform_template identity and keypoint consistency") {
    const TemplateSpec t = t_new();
    const PoseEstimate pose = transform_template(t, identity_transforms(t), {64, 64});
    for (size_t i = 0; i < t.parts.size(); ++i) {
        const Point2 h = template_to_pixel(t.parts[i].head, {64, 64});
        CHECK(std::abs(pose.parts[i].head_px.x - h.x) < 1e-12);
        CHECK(std::abs(pose.parts[i].head_px.y - h.y) < 1e-12);
    }
    // keypoints are bitwise the referenced anchors
    for (const auto& [name, ref] : t.keypoint_map) {
        const Point2 kp = pose.keypoint(name);
        for (const auto& pp : pose.parts) {
            if (pp.id != ref.part_id) continue;
            const Point2 anchor = ref.end == Endpoint::head ? pp.head_px : pp.tail_px;
            CHECK(kp.x == anchor.x);
            CHECK(kp.y == anchor.y);
        }
    }
}

TEST_CASE("transform_template uniform translation and missing transform") {
    const TemplateSpec t = t_new();
    const CanvasDims canvas{64, 64};
    const PoseEstimate base = transform_template(t, identity_transforms(t), canvas);

    auto shifted = identity_transforms(t);
    for (auto& [name, tr] : shifted) tr = AffineTransform::translation(0.1, 0);
    const PoseEstimate moved = transform_template(t, shifted, canvas);
    const double expected_dx = 0.1 * (canvas.width - 1) / 2.0;
    for (size_t i = 0; i < base.keypoints.size(); ++i) {
        CHECK(std::abs(moved.keypoints[i].x - base.keypoints[i].x - expected_dx) < 1e-9);
        CHECK(std::abs(moved.keypoints[i].y - base.keypoints[i].y) < 1e-9);
    }

    auto missing = identity_transforms(t);
    missing.erase("head");
    CHECK_THROWS_AS(transform_template(t, missing, canvas), MissingTransform);
}

TEST_CASE("transform_template matches a per-point apply oracle") {
    const TemplateSpec t = t_new();
    Rng rng(31);
    std::map<std::string, AffineTransform> transforms;
    for (const auto& p : t.parts) {
        transforms[p.name] = compose(
            AffineTransform::rotation(rng.uniform(-0.8, 0.8)),
            compose(AffineTransform::translation(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)),
                    AffineTransform::scaling(rng.uniform(0.7, 1.3), rng.uniform(0.7, 1.3))));
    }
    const CanvasDims canvas{64, 64};
    const PoseEstimate pose = transform_template(t, transforms, canvas);
    for (size_t i = 0; i < t.parts.size(); ++i) {
        const auto& m = transforms.at(t.parts[i].name).m;
        for (int e = 0; e < 2; ++e) {
            const Point2 a = e == 0 ? t.parts[i].head : t.parts[i].tail;
            // hand-applied matrix product and pixel map
            const double tx = m[0][0] * a.x + m[0][1] * a.y + m[0][2];
            const double ty = m[1][0] * a.x + m[1][1] * a.y + m[1][2];
            const double px = (tx + 1.0) / 2.0 * (canvas.width - 1);
            const double py = (ty + 1.0) / 2.0 * (canvas.height - 1);
            const Point2 got = e == 0 ? pose.parts[i].head_px : pose.parts[i].tail_px;
            CHECK(std::abs(got.x - px) < 1e-12);
            CHECK(std::abs(got.y - py) < 1e-12);
        }
    }
}

TEST_CASE("render peak and range") {
    // isotropic blob with coincident anchors peaks at exactly 1 on the mean pixel
    const PoseEstimate iso = single_part_pose({32, 32}, {32, 32}, 4.0, 4.0);
    const Heatmap h = render(iso);
    CHECK(h.at(0, 32, 32) == 1.0);
    double max_v = 0.0;
    for (double v : h.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        max_v = std::max(max_v, v);
    }
    CHECK(max_v == 1.0);

    // along the axis within one sigma the value stays >= exp(-1/2)
    const PoseEstimate bar = single_part_pose({20, 32}, {44, 32}, 3.0, 3.0);
    const Heatmap hb = render(bar);
    bool found = false;
    for (int x = 0; x < 64; ++x) {
        if (hb.at(0, 32, x) >= std::exp(-0.5)) found = true;
    }
    CHECK(found);
}

TEST_CASE("render rotation equals grid rotation") {
    // quarter-turn about the canvas center is an exact pixel permutation
    const Point2 c{31.5, 31.5};
    const Point2 head{20.0, 28.0}, tail{42.0, 35.0};
    const PoseEstimate pose = single_part_pose(head, tail, 3.0, 1.8);

    auto rot90 = [&](Point2 p) -> Point2 {  // paper-layout R(pi/2): (x,y) -> (y,-x)
        return {c.x + (p.y - c.y), c.y - (p.x - c.x)};
    };
    const PoseEstimate rotated = single_part_pose(rot90(head), rot90(tail), 3.0, 1.8);

    const Heatmap a = render(pose);
    const Heatmap b = render(rotated);
    double mean_abs = 0.0;
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            // value of the rotated render at (x,y) equals the original at (63-y, x)... inverse map
            const double expect = a.at(0, x, 63 - y);
            mean_abs += std::abs(b.at(0, y, x) - expect);
        }
    }
    mean_abs /= 64.0 * 64.0;
    CHECK(mean_abs < 1e-3);
    CHECK(mean_abs < 1e-9);  // in practice the permutation is near exact
}

TEST_CASE("render translation equivariance is exact for whole-pixel shifts") {
    const PoseEstimate pose = single_part_pose({20.25, 30.5}, {30.25, 33.5}, 3.0, 2.0);
    const int dx = 5, dy = -3;
    const PoseEstimate shifted =
        single_part_pose({20.25 + dx, 30.5 + dy}, {30.25 + dx, 33.5 + dy}, 3.0, 2.0);
    const Heatmap a = render(pose);
    const Heatmap b = render(shifted);
    for (int y = 8; y < 56; ++y) {
        for (int x = 8; x < 56; ++x) {
            CHECK(b.at(0, y + dy, x + dx) == a.at(0, y, x));
        }
    }
}

TEST_CASE("composite is the per-pixel max") {
    const TemplateSpec t = t_new();
    const Heatmap h = render(t, {64, 64});
    CHECK(h.channels == 18);
    const Heatmap comp = composite(h);
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            double m = 0.0;
            for (int c = 0; c < h.channels; ++c) m = std::max(m, h.at(c, y, x));
            CHECK(comp.at(0, y, x) == m);
        }
    }
}

TEST_CASE("windowed render is bit compatible within 1e-9") {
    const TemplateSpec t = t_new();
    const Heatmap exact = render(t, {64, 64});
    RenderOptions opts;
    opts.windowed = true;
    const Heatmap windowed = render(t, {64, 64}, opts);
    double max_diff = 0.0;
    for (size_t i = 0; i < exact.data.size(); ++i) {
        max_diff = std::max(max_diff, std::abs(exact.data[i] - windowed.data[i]));
    }
    CHECK(max_diff < 1e-9);
}

TEST_CASE("degenerate covariance is rejected") {
    const PoseEstimate thin = single_part_pose({10, 32}, {54, 32}, 22.0, 1e-4);
    CHECK_THROWS_AS(render(thin), DegeneratePart);
}

TEST_CASE("flip_template involution and swaps") {
    const TemplateSpec t = t_new();
    const TemplateSpec f = flip_template(t);
    const TemplateSpec ff = flip_template(f);
    for (size_t i = 0; i < t.parts.size(); ++i) {
        CHECK(ff.parts[i].name == t.parts[i].name);
        CHECK(ff.parts[i].head.x == t.parts[i].head.x);
        CHECK(ff.parts[i].tail.x == t.parts[i].tail.x);
    }
    CHECK(ff.keypoint_map == t.keypoint_map);

    // left_wrist of the flipped template is the mirrored old right_wrist anchor
    const Point2 old_right = t.anchor(t.keypoint_map.at("right_wrist"));
    const Point2 new_left = f.anchor(f.keypoint_map.at("left_wrist"));
    CHECK(new_left.x == -old_right.x);
    CHECK(new_left.y == old_right.y);

    // every left part swaps to right and mirrors
    const PartSpec& old_lh = t.part_by_name("left_hand");
    const PartSpec& new_rh = f.part_by_id(old_lh.id);
    CHECK(new_rh.name == "right_hand");
    CHECK(new_rh.tail.x == -old_lh.tail.x);
}

TEST_CASE("flipped t_orig renders as the column-reversed render") {
    const TemplateSpec t = t_orig();
    const Heatmap base = render(t, {64, 64});
    const Heatmap flipped = render(flip_template(t), {64, 64});
    double mean_abs = 0.0;
    for (int c = 0; c < base.channels; ++c) {
        for (int y = 0; y < 64; ++y) {
            for (int x = 0; x < 64; ++x) {
                mean_abs += std::abs(flipped.at(c, y, x) - base.at(c, y, 63 - x));
            }
        }
    }
    mean_abs /= static_cast<double>(base.data.size());
    CHECK(mean_abs < 1e-12);
}

TEST_CASE("flip_heatmap is an exact involution") {
    const TemplateSpec t = t_new();
    const Heatmap h = render(t, {48, 48});
    const Heatmap ff = flip_heatmap(flip_heatmap(h));
    CHECK(ff.data == h.data);
}

TEST_CASE("pfm write/read round trips at float precision") {
    const TemplateSpec t = t_new();
    const Heatmap h = render(t, {32, 32});
    const auto path =
        (std::filesystem::temp_directory_path() / "posekit_roundtrip.pfm").string();
    for (const int channel : {0, 7, 17}) {
        write_pfm(path, h, channel);
        const Heatmap back = read_pfm(path);
        REQUIRE(back.width == h.width);
        REQUIRE(back.height == h.height);
        for (int y = 0; y < h.height; ++y) {
            for (int x = 0; x < h.width; ++x) {
                CHECK(back.at(0, y, x) == static_cast<double>(static_cast<float>(h.at(channel, y, x))));
            }
        }
    }
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_pfm("/nonexistent/file.pfm"), Error);
}

TEST_CASE("left/right swap is a perfect matching on the standard names") {
    for (const auto& names : {standard_part_names(), standard_keypoint_names()}) {
        std::set<std::string> original(names.begin(), names.end());
        std::set<std::string> swapped;
        for (const auto& n : names) {
            const std::string s = swap_left_right(n);
            CHECK(swap_left_right(s) == n);  // involution
            swapped.insert(s);
            if (n.rfind("left_", 0) == 0 || n.rfind("right_", 0) == 0) {
                CHECK(s != n);  // sided names always move
            } else {
                CHECK(s == n);  // centerline names stay put
            }
        }
        CHECK(swapped == original);  // permutation of the same set
    }
}

TEST_CASE("template json round trip") {
    const TemplateSpec t = t_new();
    const TemplateSpec back = load_template(template_to_json(t));
    CHECK(back.parts.size() == t.parts.size());
    for (size_t i = 0; i < t.parts.size(); ++i) {
        CHECK(back.parts[i].name == t.parts[i].name);
        CHECK(back.parts[i].head.x == t.parts[i].head.x);
        CHECK(back.parts[i].sigma_along == t.parts[i].sigma_along);
    }
    CHECK(back.keypoint_map == t.keypoint_map);
}
