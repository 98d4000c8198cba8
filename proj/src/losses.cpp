#include "posekit/losses.hpp"

#include <algorithm>
#include <cmath>

namespace posekit {

namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

class IdentityExtractor final : public FeatureExtractor {
public:
    std::string name() const override { return "identity"; }
    std::vector<double> features(const Heatmap& h) const override { return h.data; }
    void backprop(const Heatmap&, const std::vector<double>& w,
                  std::vector<double>& pixel_grad) const override {
        for (size_t i = 0; i < w.size(); ++i) pixel_grad[i] += w[i];
    }
};

class PyramidExtractor final : public FeatureExtractor {
public:
    std::string name() const override { return "pyramid"; }

    std::vector<double> features(const Heatmap& h) const override {
        std::vector<double> out;
        for (int level = 1; level <= kLevels; ++level) {
            const int k = 1 << level;
            const int ph = h.height / k;
            const int pw = h.width / k;
            for (int c = 0; c < h.channels; ++c) {
                for (int py = 0; py < ph; ++py) {
                    for (int px = 0; px < pw; ++px) {
                        double acc = 0.0;
                        for (int dy = 0; dy < k; ++dy) {
                            for (int dx = 0; dx < k; ++dx) {
                                acc += h.at(c, py * k + dy, px * k + dx);
                            }
                        }
                        out.push_back(acc / (k * k));
                    }
                }
            }
        }
        return out;
    }

    void backprop(const Heatmap& shape, const std::vector<double>& w,
                  std::vector<double>& pixel_grad) const override {
        size_t i = 0;
        for (int level = 1; level <= kLevels; ++level) {
            const int k = 1 << level;
            const int ph = shape.height / k;
            const int pw = shape.width / k;
            const double inv_area = 1.0 / (k * k);
            for (int c = 0; c < shape.channels; ++c) {
                for (int py = 0; py < ph; ++py) {
                    for (int px = 0; px < pw; ++px) {
                        const double g = w[i++] * inv_area;
                        if (g == 0.0) continue;
                        for (int dy = 0; dy < k; ++dy) {
                            for (int dx = 0; dx < k; ++dx) {
                                const size_t idx =
                                    (static_cast<size_t>(c) * shape.height + py * k + dy) *
                                        shape.width +
                                    px * k + dx;
                                pixel_grad[idx] += g;
                            }
                        }
                    }
                }
            }
        }
    }

private:
    static constexpr int kLevels = 3;
};

double squared_diag(const CanvasDims& canvas) {
    return static_cast<double>(canvas.width) * canvas.width +
           static_cast<double>(canvas.height) * canvas.height;
}

// Hinge violation of one coordinate against [0, limit].
double hinge(double v, double limit) { return std::max(0.0, -v) + std::max(0.0, v - limit); }
double hinge_slope(double v, double limit) { return v < 0.0 ? -1.0 : (v > limit ? 1.0 : 0.0); }

CanvasDims canvas_of(const Heatmap& h) { return {h.width, h.height}; }

// --- parameter-side sparse jacobians -------------------------------------

struct SparseEntry {
    int param = 0;
    Point2 d;  // (dx'/dparam, dy'/dparam) in template coordinates
};

// Jacobian of one transformed template anchor w.r.t. the flat parameter
// vector. Each anchor depends on at most two matrices.
void anchor_jacobian(const TransformSet& ts, int coarse_index, int fine_index, Point2 a,
                     std::vector<SparseEntry>& out) {
    out.clear();
    const int n = matrix_count(ts.mode);
    if (ts.parameterization == Parameterization::full_affine) {
        const AffineTransform& mc = ts.affines[static_cast<size_t>(coarse_index - 1)];
        if (fine_index == 0) {
            const int o = (coarse_index - 1) * 6;
            out.push_back({o + 0, {a.x, 0}});
            out.push_back({o + 1, {a.y, 0}});
            out.push_back({o + 2, {1, 0}});
            out.push_back({o + 3, {0, a.x}});
            out.push_back({o + 4, {0, a.y}});
            out.push_back({o + 5, {0, 1}});
            return;
        }
        const AffineTransform& mf = ts.affines[static_cast<size_t>(fine_index - 1)];
        const Point2 b = apply(mc, a);
        const int of = (fine_index - 1) * 6;
        out.push_back({of + 0, {b.x, 0}});
        out.push_back({of + 1, {b.y, 0}});
        out.push_back({of + 2, {1, 0}});
        out.push_back({of + 3, {0, b.x}});
        out.push_back({of + 4, {0, b.y}});
        out.push_back({of + 5, {0, 1}});
        const int oc = (coarse_index - 1) * 6;
        // d(F C a)/dC_j = F_lin d(C a)/dC_j
        out.push_back({oc + 0, {mf.m[0][0] * a.x, mf.m[1][0] * a.x}});
        out.push_back({oc + 1, {mf.m[0][0] * a.y, mf.m[1][0] * a.y}});
        out.push_back({oc + 2, {mf.m[0][0], mf.m[1][0]}});
        out.push_back({oc + 3, {mf.m[0][1] * a.x, mf.m[1][1] * a.x}});
        out.push_back({oc + 4, {mf.m[0][1] * a.y, mf.m[1][1] * a.y}});
        out.push_back({oc + 5, {mf.m[0][1], mf.m[1][1]}});
        return;
    }
    const int phi_index = n * 3;
    const int beta_index = n * 3 + 1;
    const auto& pc = ts.params[static_cast<size_t>(coarse_index - 1)];
    const Jacobian2x5 jc = constrained_jacobian(pc, ts.scale, a);
    if (fine_index == 0) {
        const int o = (coarse_index - 1) * 3;
        for (int k = 0; k < 3; ++k) out.push_back({o + k, {jc[0][k], jc[1][k]}});
        out.push_back({phi_index, {jc[0][3], jc[1][3]}});
        out.push_back({beta_index, {jc[0][4], jc[1][4]}});
        return;
    }
    const auto& pf = ts.params[static_cast<size_t>(fine_index - 1)];
    const AffineTransform mc = build_constrained(pc, ts.scale);
    const AffineTransform mf = build_constrained(pf, ts.scale);
    const Point2 b = apply(mc, a);
    const Jacobian2x5 jf = constrained_jacobian(pf, ts.scale, b);
    const int of = (fine_index - 1) * 3;
    for (int k = 0; k < 3; ++k) out.push_back({of + k, {jf[0][k], jf[1][k]}});
    const int oc = (coarse_index - 1) * 3;
    for (int k = 0; k < 3; ++k) {
        out.push_back({oc + k,
                       {mf.m[0][0] * jc[0][k] + mf.m[0][1] * jc[1][k],
                        mf.m[1][0] * jc[0][k] + mf.m[1][1] * jc[1][k]}});
    }
    // Shared scale appears in both factors.
    for (int k = 3; k < 5; ++k) {
        const double dx = jf[0][k] + mf.m[0][0] * jc[0][k] + mf.m[0][1] * jc[1][k];
        const double dy = jf[1][k] + mf.m[1][0] * jc[0][k] + mf.m[1][1] * jc[1][k];
        out.push_back({k == 3 ? phi_index : beta_index, {dx, dy}});
    }
}

// Matrix indices driving each part under the active mode.
struct PartIndices {
    int coarse = 0;
    int fine = 0;  // 0 when the part has no fine matrix
};

std::map<std::string, PartIndices> part_indices(Mode mode, const PartMapping& mapping) {
    std::map<std::string, PartIndices> out;
    if (mode == Mode::baseline18) {
        const auto& names = standard_part_names();
        for (size_t i = 0; i < names.size(); ++i) {
            out[names[i]] = {static_cast<int>(i) + 1, 0};
        }
        return out;
    }
    for (const auto& [idx, parts] : mapping.coarse) {
        for (const auto& p : parts) out[p] = {idx, 0};
    }
    for (const auto& [idx, part] : mapping.fine) out.at(part).fine = idx;
    return out;
}

}  // namespace

const FeatureExtractor& identity_extractor() {
    static const IdentityExtractor e;
    return e;
}

const FeatureExtractor& pyramid_extractor() {
    static const PyramidExtractor e;
    return e;
}

const FeatureExtractor& extractor_by_name(const std::string& name) {
    if (name == "identity") return identity_extractor();
    if (name == "pyramid") return pyramid_extractor();
    throw SchemaError("unknown feature extractor \"" + name + "\"");
}

double mse_loss(const Heatmap& a, const Heatmap& b) {
    if (!a.same_shape(b)) throw DimMismatch("mse_loss: heatmap shapes differ");
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

double perceptual_l1(const Heatmap& a, const Heatmap& b, const FeatureExtractor& f) {
    if (!a.same_shape(b)) throw DimMismatch("perceptual_l1: heatmap shapes differ");
    const std::vector<double> fa = f.features(a);
    const std::vector<double> fb = f.features(b);
    double acc = 0.0;
    for (size_t i = 0; i < fa.size(); ++i) acc += std::abs(fa[i] - fb[i]);
    return acc;
}

double anchor_loss(const PoseEstimate& pose, const TemplateSpec& t) {
    if (t.adjacency.empty()) return 0.0;
    const double inv_diag2 = 1.0 / squared_diag(pose.canvas);
    std::map<int, const PosePart*> by_id;
    for (const auto& p : pose.parts) by_id[p.id] = &p;
    double acc = 0.0;
    for (const auto& pair : t.adjacency) {
        const PosePart& pa = *by_id.at(pair.a.part_id);
        const PosePart& pb = *by_id.at(pair.b.part_id);
        const Point2 a = pair.a.end == Endpoint::head ? pa.head_px : pa.tail_px;
        const Point2 b = pair.b.end == Endpoint::head ? pb.head_px : pb.tail_px;
        const Point2 d = a - b;
        acc += dot(d, d) * inv_diag2;
    }
    return acc / static_cast<double>(t.adjacency.size());
}

double boundary_loss(const PoseEstimate& pose) {
    const double inv_diag2 = 1.0 / squared_diag(pose.canvas);
    const double wlim = pose.canvas.width - 1;
    const double hlim = pose.canvas.height - 1;
    double acc = 0.0;
    int anchors = 0;
    for (const auto& p : pose.parts) {
        for (const Point2& a : {p.head_px, p.tail_px}) {
            const double hx = hinge(a.x, wlim);
            const double hy = hinge(a.y, hlim);
            acc += (hx * hx + hy * hy) * inv_diag2;
            ++anchors;
        }
    }
    return acc / static_cast<double>(anchors);
}

LossReport total_loss(const Heatmap& target, const TransformSet& ts, const TemplateSpec& t,
                      const FeatureExtractor& f, const LossOptions& opts) {
    const auto effective = effective_affines(ts, opts.mapping);
    const PoseEstimate pose = transform_template(t, effective, canvas_of(target));
    const Heatmap rendered = render(pose);
    if (!rendered.same_shape(target)) {
        throw DimMismatch("total_loss: target has " + std::to_string(target.channels) +
                          " channels, render produced " + std::to_string(rendered.channels));
    }
    LossReport r;
    r.recon = perceptual_l1(rendered, target, f);
    if (opts.use_mse) r.recon += mse_loss(rendered, target);
    r.anchor = anchor_loss(pose, t);
    r.boundary = boundary_loss(pose);
    r.total = r.recon + opts.weights.lambda1 * r.anchor + opts.weights.lambda2 * r.boundary;
    return r;
}

std::vector<double> loss_gradient(const Heatmap& target, const TransformSet& ts,
                                  const TemplateSpec& t, const FeatureExtractor& f,
                                  const LossOptions& opts) {
    return loss_and_gradient(target, ts, t, f, opts).second;
}

std::pair<LossReport, std::vector<double>> loss_and_gradient(const Heatmap& target,
                                                             const TransformSet& ts,
                                                             const TemplateSpec& t,
                                                             const FeatureExtractor& f,
                                                             const LossOptions& opts) {
    const auto effective = effective_affines(ts, opts.mapping);
    const CanvasDims canvas = canvas_of(target);
    const PoseEstimate pose = transform_template(t, effective, canvas);
    const Heatmap rendered = render(pose);
    if (!rendered.same_shape(target)) {
        throw DimMismatch("loss_gradient: target/render channel mismatch");
    }

    LossReport report;
    report.anchor = anchor_loss(pose, t);
    report.boundary = boundary_loss(pose);

    // Reconstruction value and its gradient w.r.t. rendered pixels.
    std::vector<double> pixel_grad(rendered.data.size(), 0.0);
    {
        const std::vector<double> fa = f.features(rendered);
        const std::vector<double> fb = f.features(target);
        std::vector<double> w(fa.size());
        double l1 = 0.0;
        for (size_t i = 0; i < fa.size(); ++i) {
            const double d = fa[i] - fb[i];
            l1 += std::abs(d);
            w[i] = sign_of(d);
        }
        f.backprop(rendered, w, pixel_grad);
        report.recon = l1;
        if (opts.use_mse) {
            report.recon += mse_loss(rendered, target);
            const double inv_n = 1.0 / static_cast<double>(rendered.data.size());
            for (size_t i = 0; i < rendered.data.size(); ++i) {
                pixel_grad[i] += 2.0 * (rendered.data[i] - target.data[i]) * inv_n;
            }
        }
    }
    report.total =
        report.recon + opts.weights.lambda1 * report.anchor + opts.weights.lambda2 * report.boundary;

    // Gradient of the loss w.r.t. each part's pixel anchors (head, tail).
    struct AnchorGrad {
        Point2 head;
        Point2 tail;
    };
    std::vector<AnchorGrad> agrad(pose.parts.size());

    for (size_t c = 0; c < pose.parts.size(); ++c) {
        const PosePart& p = pose.parts[c];
        const Point2 d = p.tail_px - p.head_px;
        const double len = norm(d);
        const Point2 mu = 0.5 * (p.head_px + p.tail_px);
        Point2 gh{0, 0}, gt{0, 0};
        if (len == 0.0) {
            // Isotropic blob: only the mean moves.
            const double sa = p.sigma_along_px;
            const double inv_sa2 = 1.0 / (sa * sa);
            for (int y = 0; y < rendered.height; ++y) {
                for (int x = 0; x < rendered.width; ++x) {
                    const double w = pixel_grad[(c * rendered.height + y) * rendered.width + x];
                    if (w == 0.0) continue;
                    const double v = rendered.at(static_cast<int>(c), y, x);
                    const Point2 r{x - mu.x, y - mu.y};
                    // du/dh = du/dt = -r/sa^2 ; dv = -v/2 du
                    const Point2 g = (w * v * 0.5 * inv_sa2) * r;
                    gh = gh + g;
                    gt = gt + g;
                }
            }
        } else {
            const double cx = d.x / len, cy = d.y / len;
            const double sa = std::max(p.sigma_along_px, len / 2.0);
            const double sc = p.sigma_across_px;
            const bool sa_from_len = len / 2.0 > p.sigma_along_px;
            const double inv_sa2 = 1.0 / (sa * sa);
            const double inv_sc2 = 1.0 / (sc * sc);
            const double inv_sa3 = inv_sa2 / sa;
            const double inv_len = 1.0 / len;
            for (int y = 0; y < rendered.height; ++y) {
                for (int x = 0; x < rendered.width; ++x) {
                    const double w = pixel_grad[(c * rendered.height + y) * rendered.width + x];
                    if (w == 0.0) continue;
                    const double v = rendered.at(static_cast<int>(c), y, x);
                    const double rx = x - mu.x, ry = y - mu.y;
                    const double qa = cx * rx + cy * ry;
                    const double qc = -cy * rx + cx * ry;
                    const Point2 pr{rx - qa * cx, ry - qa * cy};          // P r
                    const Point2 pr90{-ry + qc * cx, rx + qc * cy};       // P R90 r
                    const double ka = 2.0 * qa * inv_sa2;
                    const double kc = 2.0 * qc * inv_sc2;
                    // du/dt and du/dh
                    Point2 dut{ka * (pr.x * inv_len - cx * 0.5) + kc * (-pr90.x * inv_len + cy * 0.5),
                               ka * (pr.y * inv_len - cy * 0.5) + kc * (-pr90.y * inv_len - cx * 0.5)};
                    Point2 duh{ka * (-pr.x * inv_len - cx * 0.5) + kc * (pr90.x * inv_len + cy * 0.5),
                               ka * (-pr.y * inv_len - cy * 0.5) + kc * (pr90.y * inv_len - cx * 0.5)};
                    if (sa_from_len) {
                        const double ds = qa * qa * inv_sa3;  // -du/dlen
                        dut = dut - ds * Point2{cx, cy};
                        duh = duh + ds * Point2{cx, cy};
                    }
                    const double scale = -0.5 * v * w;
                    gt = gt + scale * dut;
                    gh = gh + scale * duh;
                }
            }
        }
        agrad[c].head = gh;
        agrad[c].tail = gt;
    }

    // Anchor term.
    if (!t.adjacency.empty()) {
        std::map<int, size_t> index_by_id;
        for (size_t i = 0; i < pose.parts.size(); ++i) index_by_id[pose.parts[i].id] = i;
        const double k =
            opts.weights.lambda1 * 2.0 /
            (squared_diag(canvas) * static_cast<double>(t.adjacency.size()));
        for (const auto& pair : t.adjacency) {
            const size_t ia = index_by_id.at(pair.a.part_id);
            const size_t ib = index_by_id.at(pair.b.part_id);
            const Point2 a = pair.a.end == Endpoint::head ? pose.parts[ia].head_px
                                                          : pose.parts[ia].tail_px;
            const Point2 b = pair.b.end == Endpoint::head ? pose.parts[ib].head_px
                                                          : pose.parts[ib].tail_px;
            const Point2 g = k * (a - b);
            (pair.a.end == Endpoint::head ? agrad[ia].head : agrad[ia].tail) =
                (pair.a.end == Endpoint::head ? agrad[ia].head : agrad[ia].tail) + g;
            (pair.b.end == Endpoint::head ? agrad[ib].head : agrad[ib].tail) =
                (pair.b.end == Endpoint::head ? agrad[ib].head : agrad[ib].tail) - g;
        }
    }

    // Boundary term.
    {
        const double wlim = canvas.width - 1;
        const double hlim = canvas.height - 1;
        const double k = opts.weights.lambda2 * 2.0 /
                         (squared_diag(canvas) * static_cast<double>(pose.parts.size() * 2));
        for (size_t i = 0; i < pose.parts.size(); ++i) {
            for (int e = 0; e < 2; ++e) {
                const Point2 a = e == 0 ? pose.parts[i].head_px : pose.parts[i].tail_px;
                const Point2 g{k * hinge(a.x, wlim) * hinge_slope(a.x, wlim),
                               k * hinge(a.y, hlim) * hinge_slope(a.y, hlim)};
                Point2& dst = e == 0 ? agrad[i].head : agrad[i].tail;
                dst = dst + g;
            }
        }
    }

    // Chain into the flat parameter vector through the template-to-pixel map.
    const double sx = (canvas.width - 1) / 2.0;
    const double sy = (canvas.height - 1) / 2.0;
    std::vector<double> grad(
        static_cast<size_t>(parameter_count(ts.mode, ts.parameterization)), 0.0);
    const auto indices = part_indices(ts.mode, opts.mapping);
    std::vector<SparseEntry> entries;
    for (size_t i = 0; i < pose.parts.size(); ++i) {
        const PartSpec& spec = t.part_by_id(pose.parts[i].id);
        const PartIndices& pi = indices.at(spec.name);
        for (int e = 0; e < 2; ++e) {
            const Point2 a = e == 0 ? spec.head : spec.tail;
            const Point2 g = e == 0 ? agrad[i].head : agrad[i].tail;
            if (g.x == 0.0 && g.y == 0.0) continue;
            anchor_jacobian(ts, pi.coarse, pi.fine, a, entries);
            for (const auto& s : entries) {
                grad[static_cast<size_t>(s.param)] += g.x * sx * s.d.x + g.y * sy * s.d.y;
            }
        }
    }
    return {report, grad};
}

}  // namespace posekit
