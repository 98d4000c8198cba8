#include "posekit/geometry.hpp"

#include <cmath>

namespace posekit {

namespace {

void validate_entries(const AffineTransform& t) {
    for (const auto& row : t.m) {
        for (double v : row) {
            if (!std::isfinite(v)) throw ValidationError("affine transform entry is not finite");
        }
    }
    if (t.m[2][0] != 0.0 || t.m[2][1] != 0.0 || t.m[2][2] != 1.0) {
        throw ValidationError("affine transform bottom row must be (0, 0, 1)");
    }
    if (t.det_linear() == 0.0) {
        throw ValidationError("affine transform linear block is singular");
    }
}

}  // namespace

AffineTransform AffineTransform::translation(double dx, double dy) {
    return from_coefficients(1, 0, dx, 0, 1, dy);
}

AffineTransform AffineTransform::rotation(double theta) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return from_coefficients(c, s, 0, -s, c, 0);
}

AffineTransform AffineTransform::scaling(double sx, double sy) {
    return from_coefficients(sx, 0, 0, 0, sy, 0);
}

AffineTransform AffineTransform::from_coefficients(double a, double b, double c, double d,
                                                   double e, double f) {
    AffineTransform t;
    t.m = {{{a, b, c}, {d, e, f}, {0, 0, 1}}};
    validate_entries(t);
    return t;
}

AffineTransform compose(const AffineTransform& a, const AffineTransform& b) {
    AffineTransform r;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) acc += a.m[i][k] * b.m[k][j];
            r.m[i][j] = acc;
        }
    }
    // Closed under composition; renormalize the bottom row against -0.0 noise.
    r.m[2] = {0.0, 0.0, 1.0};
    return r;
}

Point2 apply(const AffineTransform& t, Point2 p) {
    return {t.m[0][0] * p.x + t.m[0][1] * p.y + t.m[0][2],
            t.m[1][0] * p.x + t.m[1][1] * p.y + t.m[1][2]};
}

void validate_frame_scale(const FrameScale& s) {
    if (!(s.phi > 0.0) || !(s.beta > 0.0)) {
        throw NonPositiveScale("frame scale phi/beta must be positive");
    }
    if (s.phi < kMinFrameScale || s.phi > kMaxFrameScale || s.beta < kMinFrameScale ||
        s.beta > kMaxFrameScale) {
        throw ValidationError("frame scale outside sanity bounds [0.05, 20]");
    }
}

AffineTransform build_constrained(const ConstrainedTransformParams& c, const FrameScale& s) {
    validate_frame_scale(s);
    const double ct = std::cos(c.theta);
    const double st = std::sin(c.theta);
    // R L S expanded:
    //   [ ct  st  0 ] [ 1 0 mu    ] [ phi 0    0 ]
    //   [-st  ct  0 ] [ 0 1 delta ] [ 0   beta 0 ]
    //   [ 0   0   1 ] [ 0 0 1     ] [ 0   0    1 ]
    return AffineTransform::from_coefficients(ct * s.phi, st * s.beta, ct * c.mu + st * c.delta,
                                              -st * s.phi, ct * s.beta,
                                              -st * c.mu + ct * c.delta);
}

Jacobian2x5 constrained_jacobian(const ConstrainedTransformParams& c, const FrameScale& s,
                                 Point2 p) {
    validate_frame_scale(s);
    const double ct = std::cos(c.theta);
    const double st = std::sin(c.theta);
    Jacobian2x5 j{};
    // x' =  phi ct x + beta st y + mu ct + delta st
    // y' = -phi st x + beta ct y - mu st + delta ct
    j[0][0] = -s.phi * st * p.x + s.beta * ct * p.y - c.mu * st + c.delta * ct;  // d/dtheta
    j[0][1] = ct;                                                                // d/dmu
    j[0][2] = st;                                                                // d/ddelta
    j[0][3] = ct * p.x;                                                          // d/dphi
    j[0][4] = st * p.y;                                                          // d/dbeta
    j[1][0] = -s.phi * ct * p.x - s.beta * st * p.y - c.mu * ct - c.delta * st;
    j[1][1] = -st;
    j[1][2] = ct;
    j[1][3] = -st * p.x;
    j[1][4] = ct * p.y;
    return j;
}

AffineTransform flip_transform(const AffineTransform& t) {
    // F t F with F = diag(-1, 1, 1) flips the sign of the off-diagonal linear
    // entries and the x translation. Entrywise negation keeps it an exact
    // involution.
    AffineTransform r = t;
    r.m[0][1] = -t.m[0][1];
    r.m[0][2] = -t.m[0][2];
    r.m[1][0] = -t.m[1][0];
    return r;
}

double normalize_angle(double theta) {
    const double two_pi = 2.0 * M_PI;
    double t = std::fmod(theta, two_pi);
    if (t <= -M_PI) t += two_pi;
    if (t > M_PI) t -= two_pi;
    return t;
}

}  // namespace posekit
