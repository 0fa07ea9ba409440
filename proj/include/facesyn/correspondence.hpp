#pragma once

#include "facesyn/geometry.hpp"

#include <optional>
#include <vector>

namespace facesyn {

// Cylindrical UV embedding about the mesh's dominant axis. The axis comes
// from PCA of the vertex positions (largest variance, deterministic sign);
// u is the azimuth mapped to [0,1] with u = (atan2(x', z') + pi) / (2 pi),
// v is height along the axis normalized to [0,1]. Invariant to uniform
// scaling of the mesh.
Eigen::MatrixX2d cylindrical_uv(const TriMesh& mesh);

// Thin plate spline in 2D: affine part + r^2 log r kernel, kernel weights
// orthogonal to the affine space. Exact interpolation at the controls.
struct TpsWarp {
    Eigen::MatrixX2d controls;   // K x 2 source control points
    Eigen::MatrixX2d kernel_w;   // K x 2 kernel weights (columns: x, y outputs)
    Eigen::Matrix<double, 3, 2> affine; // rows: 1, x, y
};

TpsWarp tps_fit(const Eigen::MatrixX2d& src, const Eigen::MatrixX2d& dst);
Eigen::MatrixX2d tps_apply(const TpsWarp& warp, const Eigen::MatrixX2d& points);

struct NicpConfig {
    std::vector<double> stiffness_schedule = {50.0, 20.0, 5.0, 2.0};
    int iters_per_level = 10;
    double landmark_weight = 10.0; // relative to unit data weight
};

struct NicpLandmark {
    int source_vertex;
    Vec3 target_position;
};

struct NicpResult {
    TriMesh deformed;                      // source topology, deformed positions
    std::vector<double> final_objective;   // per stiffness level, after last inner iteration
    // (before-solve, after-solve) objective at the correspondences of each
    // inner iteration; after <= before by least-squares optimality.
    std::vector<std::pair<double, double>> inner_objectives;
};

// Non-rigid ICP with per-vertex affine transforms: alternates closest-point
// (point-to-point, lowest-index ties) correspondences with a sparse linear
// solve balancing edgewise transform stiffness, correspondence residuals and
// optional soft landmarks. Throws if the source edge graph is disconnected.
NicpResult nicp_register(const TriMesh& source, const TriMesh& target, const NicpConfig& cfg = {},
                         const std::vector<NicpLandmark>& landmarks = {});

} // namespace facesyn
