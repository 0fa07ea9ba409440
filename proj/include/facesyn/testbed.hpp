#pragma once

#include "facesyn/gallery.hpp"
#include "facesyn/geometry.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace facesyn {
namespace testbed {

// Deterministic synthetic face data with published ground truth. Heads are
// ellipsoids on a latitude/longitude grid, identity variation is a seeded
// low-frequency radial field, and expressions are six localized Gaussian
// bumps (two mouth corners, mouth opening, two brows, eye opening) whose
// displacement is exactly linear in the parameters. All randomness flows
// through the fixed xoshiro256++ generator, so outputs reproduce across
// platforms.
//
// Orientation: the head's vertical axis is y (top of head at -y, matching
// screen-up under the y-down image convention); the face looks toward -z,
// into the default camera.

struct ExprParams {
    double mouth_corner = 0.0; // + = corners up (smile), - = down
    double mouth_open = 0.0;
    double eye_open = 0.0;
    double brow_raise = 0.0;
    double brow_furrow = 0.0;

    bool is_zero() const {
        return mouth_corner == 0 && mouth_open == 0 && eye_open == 0 && brow_raise == 0 &&
               brow_furrow == 0;
    }
};

struct Topology {
    int rings = 39;    // latitude divisions; rings-1 vertex rows between poles
    int segments = 40; // longitude divisions

    int vertex_count() const { return (rings - 1) * segments + 2; }
    int vertex_index(int ring, int seg) const; // ring in [1, rings-1], seg wraps
};

// Published VA law of the testbed (the oracle for all gallery tests):
//   valence = clamp(mouth_corner - brow_furrow, -1, 1)
//   arousal = clamp(0.5 mouth_open + 0.5 eye_open + 0.3 brow_raise, -1, 1)
Vec2 ground_truth_va(const ExprParams& expr);

// Parameters that realize a (v, a) target exactly and linearly:
// mouth_corner = v, mouth_open = eye_open = a, brows at rest. Used by the
// dataset generator so cluster mean faces have closed-form expectations.
ExprParams canonical_params(double valence, double arousal);

// Canonical parameters for the six basic expressions (fixed table).
ExprParams basic_expression_params(const std::string& label);

TriMesh make_face(std::uint64_t identity_seed, const ExprParams& expr,
                  const Topology& topo = {}, double identity_scale = 0.05);

// Expression displacement field alone (identity-independent, linear in expr),
// flattened 3N.
Eigen::VectorXd expression_deformation(const ExprParams& expr, const Topology& topo = {});

// Smooth per-vertex skin colors, seeded per identity.
Eigen::MatrixX3d make_texture(std::uint64_t identity_seed, const Topology& topo = {});

// The 68 landmark vertex indices for a topology (fixed fractional grid
// positions; collisions resolved by stepping to the next segment).
std::array<int, 68> landmark_vertices(const Topology& topo = {});

Landmarks2D ground_truth_landmarks(const TriMesh& mesh, const CameraParams& cam,
                                   const Topology& topo = {});

// A camera framing the head in a width x height image.
CameraParams default_camera(int width, int height);

struct Dataset {
    std::map<std::string, Eigen::VectorXd> meshes_by_id; // flattened 3N
    std::vector<VAAnnotation> annotations;
    std::map<std::string, std::vector<Eigen::VectorXd>> labeled_expressions;
    Eigen::VectorXd template_shape; // base ellipsoid, no identity, no expression
    std::vector<std::uint64_t> identity_seeds;
    Topology topology;
};

Dataset make_dataset(int n_identities, int frames_per_identity, std::uint64_t seed,
                     int expressions_per_label = 8, const Topology& topo = {},
                     double identity_scale = 0.02);

} // namespace testbed
} // namespace facesyn
