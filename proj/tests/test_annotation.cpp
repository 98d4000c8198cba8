#include <doctest.h>

#include <cmath>

#include "posekit/annotation.hpp"
#include "posekit/rng.hpp"

using namespace posekit;

namespace {

FrameAnnotation make_annotation(Rng& rng, int wh = 256, bool dyadic = false) {
    FrameAnnotation a;
    a.frame_id = "frame_0001";
    a.subject_id = "s1";
    a.width = wh;
    a.height = wh;
    for (auto& kp : a.keypoints) {
        double x = rng.uniform(10.0, wh - 10.0);
        double y = rng.uniform(10.0, wh - 10.0);
        if (dyadic) {  // multiples of 2^-8 make the reflection exactly invertible
            x = std::round(x * 256.0) / 256.0;
            y = std::round(y * 256.0) / 256.0;
        }
        kp = {x, y};
    }
    return a;
}

}  // namespace

TEST_CASE("flip_annotation fixed point and swap") {
    Rng rng(41);
    FrameAnnotation a = make_annotation(rng, 257);
    a.set_keypoint("neck", {(257.0 - 1.0) / 2.0, 40.0});  // centered x
    const FrameAnnotation f = flip_annotation(a);
    CHECK(f.keypoint("neck").x == a.keypoint("neck").x);
    CHECK(f.keypoint("left_wrist").x == (a.width - 1) - a.keypoint("right_wrist").x);
    CHECK(f.keypoint("left_wrist").y == a.keypoint("right_wrist").y);
    CHECK(f.flipped);
}

TEST_CASE("double flip restores dyadic annotations exactly") {
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        const FrameAnnotation a = make_annotation(rng, 256, /*dyadic=*/true);
        const FrameAnnotation ff = flip_annotation(flip_annotation(a));
        for (size_t i = 0; i < a.keypoints.size(); ++i) {
            CHECK(ff.keypoints[i].x == a.keypoints[i].x);
            CHECK(ff.keypoints[i].y == a.keypoints[i].y);
        }
        CHECK(ff.flipped == a.flipped);
    }
}

TEST_CASE("annotation json round trip") {
    Rng rng(43);
    const FrameAnnotation a = make_annotation(rng);
    const FrameAnnotation back = annotation_from_json(annotation_to_json(a));
    CHECK(back.frame_id == a.frame_id);
    CHECK(back.subject_id == a.subject_id);
    CHECK(back.width == a.width);
    for (size_t i = 0; i < a.keypoints.size(); ++i) {
        CHECK(back.keypoints[i].x == a.keypoints[i].x);  // lossless double round trip
        CHECK(back.keypoints[i].y == a.keypoints[i].y);
    }
}

TEST_CASE("annotation parse errors") {
    CHECK_THROWS_AS(annotation_from_json("not json"), SchemaError);
    CHECK_THROWS_AS(annotation_from_json("{}"), SchemaError);
    CHECK_THROWS_AS(annotation_from_json(R"({"frame_id":"f","subject_id":"s",)"
                                         R"("image_size":[64,64],"keypoints":{}})"),
                    SchemaError);
}
