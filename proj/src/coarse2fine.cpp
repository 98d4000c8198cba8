#include "posekit/coarse2fine.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "posekit/template_model.hpp"

namespace posekit {

namespace {
using ordered_json = nlohmann::ordered_json;
}

int matrix_count(Mode mode) { return mode == Mode::baseline18 ? 18 : 20; }

std::string mode_name(Mode mode) {
    return mode == Mode::baseline18 ? "baseline18" : "coarse2fine20";
}

std::string parameterization_name(Parameterization p) {
    return p == Parameterization::full_affine ? "full_affine" : "constrained";
}

Mode mode_from_name(const std::string& s) {
    if (s == "baseline18") return Mode::baseline18;
    if (s == "coarse2fine20") return Mode::coarse2fine20;
    throw SchemaError("unknown mode \"" + s + "\"");
}

Parameterization parameterization_from_name(const std::string& s) {
    if (s == "full_affine") return Parameterization::full_affine;
    if (s == "constrained") return Parameterization::constrained;
    throw SchemaError("unknown parameterization \"" + s + "\"");
}

PartMapping default_mapping() {
    PartMapping m;
    m.coarse[1] = {"core"};
    m.coarse[2] = {"left_hip"};
    m.coarse[3] = {"right_hip"};
    m.coarse[4] = {"left_thigh"};
    m.coarse[5] = {"right_thigh"};
    m.coarse[6] = {"left_shin"};
    m.coarse[7] = {"right_shin"};
    m.coarse[8] = {"left_shoulder"};
    m.coarse[9] = {"right_shoulder"};
    m.coarse[10] = {"left_upper_arm", "left_forearm", "left_hand"};
    m.coarse[11] = {"right_upper_arm", "right_forearm", "right_hand"};
    m.coarse[12] = {"left_foot"};
    m.coarse[13] = {"right_foot"};
    m.coarse[14] = {"head"};
    m.fine[15] = "left_upper_arm";
    m.fine[16] = "left_forearm";
    m.fine[17] = "left_hand";
    m.fine[18] = "right_upper_arm";
    m.fine[19] = "right_forearm";
    m.fine[20] = "right_hand";
    return m;
}

void validate_mapping(const PartMapping& m) {
    std::set<std::string> covered;
    for (const auto& [idx, parts] : m.coarse) {
        if (idx < 1 || idx > 14) throw ValidationError("coarse matrix index out of range 1..14");
        for (const auto& p : parts) {
            if (!covered.insert(p).second) {
                throw ValidationError("part " + p + " coarse-mapped twice");
            }
        }
    }
    const auto& names = standard_part_names();
    if (covered != std::set<std::string>(names.begin(), names.end())) {
        throw ValidationError("coarse mapping must cover all 18 parts exactly once");
    }
    std::set<std::string> fine_parts;
    for (const auto& [idx, part] : m.fine) {
        if (idx < 15 || idx > 20) throw ValidationError("fine matrix index out of range 15..20");
        if (!covered.count(part)) {
            throw ValidationError("fine-mapped part " + part + " is not coarse-mapped");
        }
        if (!fine_parts.insert(part).second) {
            throw ValidationError("part " + part + " fine-mapped twice");
        }
    }
}

std::string mapping_to_json(const PartMapping& m) {
    ordered_json j;
    j["coarse"] = ordered_json::object();
    for (const auto& [idx, parts] : m.coarse) j["coarse"][std::to_string(idx)] = parts;
    j["fine"] = ordered_json::object();
    for (const auto& [idx, part] : m.fine) j["fine"][std::to_string(idx)] = part;
    return j.dump();
}

PartMapping mapping_from_json(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw SchemaError(std::string("mapping parse error: ") + e.what());
    }
    PartMapping m;
    try {
        for (const auto& [key, parts] : j.at("coarse").items()) {
            m.coarse[std::stoi(key)] = parts.get<std::vector<std::string>>();
        }
        for (const auto& [key, part] : j.at("fine").items()) {
            m.fine[std::stoi(key)] = part.get<std::string>();
        }
    } catch (const std::exception& e) {
        throw SchemaError(std::string("mapping schema error: ") + e.what());
    }
    validate_mapping(m);
    return m;
}

TransformSet identity_transform_set(Mode mode, Parameterization parameterization) {
    TransformSet ts;
    ts.mode = mode;
    ts.parameterization = parameterization;
    const int n = matrix_count(mode);
    if (parameterization == Parameterization::full_affine) {
        ts.affines.assign(static_cast<size_t>(n), AffineTransform::identity());
    } else {
        ts.params.assign(static_cast<size_t>(n), ConstrainedTransformParams{});
        ts.scale = FrameScale{};
    }
    return ts;
}

void validate_transform_set(const TransformSet& ts) {
    const size_t n = static_cast<size_t>(matrix_count(ts.mode));
    if (ts.parameterization == Parameterization::full_affine) {
        if (ts.affines.size() != n) {
            throw ModeMismatch("transform set holds " + std::to_string(ts.affines.size()) +
                               " matrices, mode " + mode_name(ts.mode) + " needs " +
                               std::to_string(n));
        }
    } else {
        if (ts.params.size() != n) {
            throw ModeMismatch("transform set holds " + std::to_string(ts.params.size()) +
                               " parameter triples, mode " + mode_name(ts.mode) + " needs " +
                               std::to_string(n));
        }
        validate_frame_scale(ts.scale);
    }
}

AffineTransform matrix_of(const TransformSet& ts, int matrix_index) {
    const size_t i = static_cast<size_t>(matrix_index - 1);
    if (ts.parameterization == Parameterization::full_affine) return ts.affines.at(i);
    return build_constrained(ts.params.at(i), ts.scale);
}

std::map<std::string, AffineTransform> effective_affines(const TransformSet& ts,
                                                         const PartMapping& m) {
    validate_transform_set(ts);
    std::map<std::string, AffineTransform> out;
    if (ts.mode == Mode::baseline18) {
        const auto& names = standard_part_names();
        for (size_t i = 0; i < names.size(); ++i) {
            out[names[i]] = matrix_of(ts, static_cast<int>(i) + 1);
        }
        return out;
    }
    for (const auto& [idx, parts] : m.coarse) {
        const AffineTransform coarse = matrix_of(ts, idx);
        for (const auto& part : parts) out[part] = coarse;
    }
    for (const auto& [idx, part] : m.fine) {
        // Step 2 refines the step-1 placement: fine acts after coarse.
        out[part] = compose(matrix_of(ts, idx), out.at(part));
    }
    return out;
}

int parameter_count(Mode mode, Parameterization parameterization) {
    const int n = matrix_count(mode);
    return parameterization == Parameterization::constrained ? n * 3 + 2 : n * 6;
}

std::vector<double> to_parameter_vector(const TransformSet& ts) {
    validate_transform_set(ts);
    std::vector<double> v;
    v.reserve(static_cast<size_t>(parameter_count(ts.mode, ts.parameterization)));
    if (ts.parameterization == Parameterization::full_affine) {
        for (const auto& a : ts.affines) {
            v.insert(v.end(), {a.m[0][0], a.m[0][1], a.m[0][2], a.m[1][0], a.m[1][1], a.m[1][2]});
        }
    } else {
        for (const auto& p : ts.params) v.insert(v.end(), {p.theta, p.mu, p.delta});
        v.push_back(ts.scale.phi);
        v.push_back(ts.scale.beta);
    }
    return v;
}

TransformSet transform_set_from_vector(Mode mode, Parameterization parameterization,
                                       const std::vector<double>& v) {
    const size_t expected = static_cast<size_t>(parameter_count(mode, parameterization));
    if (v.size() != expected) {
        throw ModeMismatch("parameter vector length " + std::to_string(v.size()) +
                           ", expected " + std::to_string(expected));
    }
    TransformSet ts;
    ts.mode = mode;
    ts.parameterization = parameterization;
    const int n = matrix_count(mode);
    if (parameterization == Parameterization::full_affine) {
        for (int i = 0; i < n; ++i) {
            const size_t o = static_cast<size_t>(i) * 6;
            ts.affines.push_back(AffineTransform::from_coefficients(v[o], v[o + 1], v[o + 2],
                                                                    v[o + 3], v[o + 4], v[o + 5]));
        }
    } else {
        for (int i = 0; i < n; ++i) {
            const size_t o = static_cast<size_t>(i) * 3;
            ts.params.push_back({v[o], v[o + 1], v[o + 2]});
        }
        ts.scale = {v[v.size() - 2], v[v.size() - 1]};
        validate_frame_scale(ts.scale);
    }
    return ts;
}

std::string transform_set_to_json(const TransformSet& ts) {
    ordered_json j;
    j["mode"] = mode_name(ts.mode);
    j["parameterization"] = parameterization_name(ts.parameterization);
    j["parameter_count"] = parameter_count(ts.mode, ts.parameterization);
    j["parameters"] = to_parameter_vector(ts);
    return j.dump();
}

TransformSet transform_set_from_json(const std::string& json_text) {
    ordered_json j;
    try {
        j = ordered_json::parse(json_text);
    } catch (const std::exception& e) {
        throw SchemaError(std::string("transform set parse error: ") + e.what());
    }
    try {
        return transform_set_from_vector(mode_from_name(j.at("mode").get<std::string>()),
                                         parameterization_from_name(
                                             j.at("parameterization").get<std::string>()),
                                         j.at("parameters").get<std::vector<double>>());
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw SchemaError(std::string("transform set schema error: ") + e.what());
    }
}

}  // namespace posekit
