#include <doctest.h>

#include <cmath>

#include "posekit/geometry.hpp"
#include "posekit/rng.hpp"

using namespace posekit;

namespace {

// Independent 3x3 product, kept separate from compose() on purpose.
using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 matmul3(const Mat3& a, const Mat3& b) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            r[i][j] = 0.0;
            for (int k = 0; k < 3; ++k) r[i][j] += a[i][k] * b[k][j];
        }
    }
    return r;
}

void check_close(const AffineTransform& t, const Mat3& expected, double tol) {
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            CHECK(std::abs(t.m[i][j] - expected[i][j]) <= tol);
        }
    }
}

AffineTransform random_transform(Rng& rng) {
    while (true) {
        const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
        const double d = rng.uniform(-2, 2), e = rng.uniform(-2, 2);
        if (std::abs(a * e - b * d) < 1e-3) continue;
        return AffineTransform::from_coefficients(a, b, rng.uniform(-1, 1), d, e,
                                                  rng.uniform(-1, 1));
    }
}

Jacobian2x5 fd_jacobian(const ConstrainedTransformParams& c, const FrameScale& s, Point2 p,
                        double h) {
    Jacobian2x5 j{};
    const std::array<double, 5> base{c.theta, c.mu, c.delta, s.phi, s.beta};
    for (size_t k = 0; k < 5; ++k) {
        auto v = base;
        v[k] += h;
        const Point2 plus = apply(build_constrained({v[0], v[1], v[2]}, {v[3], v[4]}), p);
        v[k] -= 2 * h;
        const Point2 minus = apply(build_constrained({v[0], v[1], v[2]}, {v[3], v[4]}), p);
        j[0][k] = (plus.x - minus.x) / (2 * h);
        j[1][k] = (plus.y - minus.y) / (2 * h);
    }
    return j;
}

}  // namespace

TEST_CASE("compose basics") {
    const auto I = AffineTransform::identity();
    CHECK(compose(I, I) == I);

    const auto t = compose(AffineTransform::translation(1, 2), AffineTransform::translation(3, 4));
    CHECK(t == AffineTransform::translation(4, 6));

    // rot(pi/2) twice equals rot(pi), checked against an independent product
    const auto r = AffineTransform::rotation(M_PI / 2);
    check_close(compose(r, r), matmul3(r.m, r.m), 0.0);
    check_close(compose(r, r), AffineTransform::rotation(M_PI).m, 1e-12);
}

TEST_CASE("compose associativity") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const auto a = random_transform(rng);
        const auto b = random_transform(rng);
        const auto c = random_transform(rng);
        const auto left = compose(a, compose(b, c));
        const auto right = compose(compose(a, b), c);
        check_close(left, right.m, 1e-12);
    }
}

TEST_CASE("apply") {
    const auto I = AffineTransform::identity();
    CHECK(apply(I, {0.3, -0.7}).x == 0.3);
    CHECK(apply(I, {0.3, -0.7}).y == -0.7);

    const Point2 s = apply(AffineTransform::scaling(2, 3), {1, 1});
    CHECK(s.x == 2.0);
    CHECK(s.y == 3.0);

    // R(pi/2) maps (1,0) to (0,-1) under the printed layout [[c,s],[-s,c]]
    const Point2 r = apply(AffineTransform::rotation(M_PI / 2), {1, 0});
    CHECK(std::abs(r.x) < 1e-15);
    CHECK(std::abs(r.y + 1.0) < 1e-15);
}

TEST_CASE("apply preserves affine combinations") {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
        const auto t = random_transform(rng);
        const Point2 p{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const Point2 q{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const double lambda = rng.uniform(-0.5, 1.5);
        const Point2 mixed = apply(t, lambda * p + (1 - lambda) * q);
        const Point2 split = lambda * apply(t, p) + (1 - lambda) * apply(t, q);
        CHECK(std::abs(mixed.x - split.x) < 1e-12);
        CHECK(std::abs(mixed.y - split.y) < 1e-12);
    }
}

TEST_CASE("build_constrained") {
    CHECK(build_constrained({0, 0, 0}, {1, 1}) == AffineTransform::identity());
    CHECK(build_constrained({0, 2, -1}, {1, 1}) == AffineTransform::translation(2, -1));

    CHECK_THROWS_AS(build_constrained({0, 0, 0}, {0.0, 1.0}), NonPositiveScale);
    CHECK_THROWS_AS(build_constrained({0, 0, 0}, {1.0, -2.0}), NonPositiveScale);
}

TEST_CASE("build_constrained matches the R*L*S product oracle") {
    // the worked example first
    {
        const ConstrainedTransformParams c{M_PI / 2, 1, 0};
        const FrameScale s{2, 1};
        const double ct = std::cos(c.theta), st = std::sin(c.theta);
        const Mat3 R{{{ct, st, 0}, {-st, ct, 0}, {0, 0, 1}}};
        const Mat3 L{{{1, 0, c.mu}, {0, 1, c.delta}, {0, 0, 1}}};
        const Mat3 S{{{s.phi, 0, 0}, {0, s.beta, 0}, {0, 0, 1}}};
        check_close(build_constrained(c, s), matmul3(R, matmul3(L, S)), 1e-15);
    }
    Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const ConstrainedTransformParams c{rng.uniform(-3, 3), rng.uniform(-1, 1),
                                           rng.uniform(-1, 1)};
        const FrameScale s{rng.uniform(0.3, 3.0), rng.uniform(0.3, 3.0)};
        const double ct = std::cos(c.theta), st = std::sin(c.theta);
        const Mat3 R{{{ct, st, 0}, {-st, ct, 0}, {0, 0, 1}}};
        const Mat3 L{{{1, 0, c.mu}, {0, 1, c.delta}, {0, 0, 1}}};
        const Mat3 S{{{s.phi, 0, 0}, {0, s.beta, 0}, {0, 0, 1}}};
        check_close(build_constrained(c, s), matmul3(R, matmul3(L, S)), 1e-14);
    }
}

TEST_CASE("constrained_jacobian basics") {
    // d/dmu of x' at identity params is phi * cos(theta) = 1
    const auto j_id = constrained_jacobian({0, 0, 0}, {1, 1}, {1, 0});
    CHECK(j_id[0][1] == 1.0);

    // d/dtheta at theta=0 on p=(1,0) vs central differences, rel err 1e-6
    const auto fd = fd_jacobian({0, 0, 0}, {1, 1}, {1, 0}, 1e-5);
    CHECK(std::abs(j_id[0][0] - fd[0][0]) <= 1e-6 * std::max(1.0, std::abs(fd[0][0])));
    CHECK(std::abs(j_id[1][0] - fd[1][0]) <= 1e-6 * std::max(1.0, std::abs(fd[1][0])));

    // scale columns vanish at the origin
    const auto j0 = constrained_jacobian({0.4, 0.2, -0.1}, {1.3, 0.8}, {0, 0});
    CHECK(j0[0][3] == 0.0);
    CHECK(j0[1][3] == 0.0);
    CHECK(j0[0][4] == 0.0);
    CHECK(j0[1][4] == 0.0);
}

TEST_CASE("constrained_jacobian matches finite differences on random draws") {
    Rng rng(14);
    for (int trial = 0; trial < 100; ++trial) {
        const ConstrainedTransformParams c{rng.uniform(-3, 3), rng.uniform(-1, 1),
                                           rng.uniform(-1, 1)};
        const FrameScale s{rng.uniform(0.3, 3.0), rng.uniform(0.3, 3.0)};
        const Point2 p{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const auto analytic = constrained_jacobian(c, s, p);
        const auto fd = fd_jacobian(c, s, p, 1e-5);
        for (size_t r = 0; r < 2; ++r) {
            for (size_t k = 0; k < 5; ++k) {
                CHECK(std::abs(analytic[r][k] - fd[r][k]) <=
                      1e-4 * std::max(1.0, std::abs(fd[r][k])));
            }
        }
    }
}

TEST_CASE("flip_transform") {
    CHECK(flip_transform(AffineTransform::identity()) == AffineTransform::identity());
    CHECK(flip_transform(AffineTransform::translation(3, 5)) ==
          AffineTransform::translation(-3, 5));

    // flip(rot(theta)) == rot(-theta); cross-check against F t F by compose
    const double theta = 0.73;
    const auto flipped = flip_transform(AffineTransform::rotation(theta));
    const auto expected = AffineTransform::rotation(-theta);
    const auto F = AffineTransform::scaling(-1, 1);
    const auto conj = compose(F, compose(AffineTransform::rotation(theta), F));
    check_close(flipped, expected.m, 1e-15);
    check_close(flipped, conj.m, 1e-15);

    Rng rng(15);
    for (int trial = 0; trial < 100; ++trial) {
        const auto t = random_transform(rng);
        CHECK(flip_transform(flip_transform(t)) == t);  // exact involution
    }
}

TEST_CASE("normalize_angle wraps into (-pi, pi]") {
    CHECK(normalize_angle(0.0) == 0.0);
    CHECK(normalize_angle(M_PI) == doctest::Approx(M_PI));
    CHECK(normalize_angle(-M_PI) == doctest::Approx(M_PI));
    CHECK(normalize_angle(3 * M_PI) == doctest::Approx(M_PI));
    Rng rng(16);
    for (int trial = 0; trial < 200; ++trial) {
        const double t = rng.uniform(-50, 50);
        const double n = normalize_angle(t);
        CHECK(n > -M_PI - 1e-12);
        CHECK(n <= M_PI + 1e-12);
        CHECK(std::abs(std::sin(n) - std::sin(t)) < 1e-9);
        CHECK(std::abs(std::cos(n) - std::cos(t)) < 1e-9);
    }
}

TEST_CASE("transform validation") {
    CHECK_THROWS_AS(AffineTransform::from_coefficients(1, 0, NAN, 0, 1, 0), ValidationError);
    CHECK_THROWS_AS(AffineTransform::from_coefficients(1, 2, 0, 2, 4, 0), ValidationError);
    CHECK_THROWS_AS(validate_frame_scale({0.01, 1.0}), ValidationError);
    CHECK_THROWS_AS(validate_frame_scale({1.0, 25.0}), ValidationError);
}
