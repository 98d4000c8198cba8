#pragma once

#include <array>
#include <cmath>

#include "posekit/errors.hpp"

namespace posekit {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

/// Homogeneous 2D affine transform. The last row is always (0, 0, 1).
struct AffineTransform {
    std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

    static AffineTransform identity() { return {}; }
    static AffineTransform translation(double dx, double dy);
    static AffineTransform rotation(double theta);
    static AffineTransform scaling(double sx, double sy);
    // Row-major upper 2x3 block (a b c / d e f); validates finiteness,
    // the (0,0,1) bottom row, and a non-singular linear block.
    static AffineTransform from_coefficients(double a, double b, double c,
                                             double d, double e, double f);

    double det_linear() const { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }
    bool operator==(const AffineTransform& o) const { return m == o.m; }
};

AffineTransform compose(const AffineTransform& a, const AffineTransform& b);
Point2 apply(const AffineTransform& t, Point2 p);

/// Per-limb parameters of the constrained M = R(theta) L(mu, delta) S(phi, beta)
/// factorization. theta rotates, (mu, delta) relocate, scaling lives in FrameScale.
struct ConstrainedTransformParams {
    double theta = 0.0;
    double mu = 0.0;
    double delta = 0.0;
};

/// Frame-wide scale shared by every limb of one frame.
struct FrameScale {
    double phi = 1.0;
    double beta = 1.0;
};

inline constexpr double kMinFrameScale = 0.05;
inline constexpr double kMaxFrameScale = 20.0;

// Throws NonPositiveScale for phi/beta <= 0, ValidationError outside the
// [0.05, 20] sanity bounds.
void validate_frame_scale(const FrameScale& s);

AffineTransform build_constrained(const ConstrainedTransformParams& c, const FrameScale& s);

/// d apply(build_constrained(c, s), p) / d (theta, mu, delta, phi, beta);
/// row 0 is dx', row 1 is dy'.
using Jacobian2x5 = std::array<std::array<double, 5>, 2>;
Jacobian2x5 constrained_jacobian(const ConstrainedTransformParams& c, const FrameScale& s,
                                 Point2 p);

/// Conjugation F t F with F = diag(-1, 1, 1): the transform the mirrored
/// template needs so mirrored inputs produce mirrored outputs.
AffineTransform flip_transform(const AffineTransform& t);

/// Wraps an angle into (-pi, pi].
double normalize_angle(double theta);

}  // namespace posekit
