#pragma once

#include <map>
#include <string>
#include <vector>

#include "posekit/geometry.hpp"

namespace posekit {

enum class Mode { baseline18, coarse2fine20 };
enum class Parameterization { full_affine, constrained };

int matrix_count(Mode mode);  // 18 or 20
std::string mode_name(Mode mode);
std::string parameterization_name(Parameterization p);
Mode mode_from_name(const std::string& s);
Parameterization parameterization_from_name(const std::string& s);

/// Which parts each matrix drives. Coarse matrices (1..14) may drive several
/// parts (the whole-arm entries); fine matrices (15..20) refine one arm part
/// each on top of its coarse matrix.
struct PartMapping {
    std::map<int, std::vector<std::string>> coarse;  // matrix index 1..14 -> parts
    std::map<int, std::string> fine;                 // matrix index 15..20 -> part

    bool operator==(const PartMapping& o) const { return coarse == o.coarse && fine == o.fine; }
};

/// The published two-step assignment: arms move as whole units in step 1 and
/// per segment in step 2.
PartMapping default_mapping();
void validate_mapping(const PartMapping& m);
std::string mapping_to_json(const PartMapping& m);
PartMapping mapping_from_json(const std::string& json_text);

/// A full set of transform parameters for one frame.
struct TransformSet {
    Mode mode = Mode::baseline18;
    Parameterization parameterization = Parameterization::full_affine;
    std::vector<AffineTransform> affines;            // full_affine: one per matrix
    std::vector<ConstrainedTransformParams> params;  // constrained: one per matrix
    FrameScale scale;                                // constrained: shared per frame
};

TransformSet identity_transform_set(Mode mode, Parameterization parameterization);
void validate_transform_set(const TransformSet& ts);

/// The matrix each transform-set slot currently encodes.
AffineTransform matrix_of(const TransformSet& ts, int matrix_index);  // 1-based

/// Collapses a transform set to one affine per part: fine-after-coarse for
/// parts with a fine matrix, the coarse matrix alone otherwise. baseline18
/// passes matrices through in canonical part order.
std::map<std::string, AffineTransform> effective_affines(const TransformSet& ts,
                                                         const PartMapping& m);

int parameter_count(Mode mode, Parameterization parameterization);

// Flat parameter vector layout:
//   full_affine: per matrix (m00, m01, m02, m10, m11, m12)
//   constrained: per matrix (theta, mu, delta), then (phi, beta) last
std::vector<double> to_parameter_vector(const TransformSet& ts);
TransformSet transform_set_from_vector(Mode mode, Parameterization parameterization,
                                       const std::vector<double>& v);

std::string transform_set_to_json(const TransformSet& ts);
TransformSet transform_set_from_json(const std::string& json_text);

}  // namespace posekit
