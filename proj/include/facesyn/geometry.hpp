#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

namespace facesyn {

// Coordinate conventions, used everywhere in this project:
//   - model space is right-handed; the camera sits at the origin looking down +z,
//     so visible geometry has view-space depth vz > 0;
//   - image x grows right, image y grows down; pixel (px, py) is sampled at its
//     center (px + 0.5, py + 0.5);
//   - a projected point is  principal_point + f * (vx, vy) / vz  with
//     (vx, vy, vz) = R * vertex + t.

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;

// Shared-topology triangle mesh. All meshes participating in one model have the
// same vertex count and triangulation ("dense correspondence").
struct TriMesh {
    Eigen::MatrixX3d vertices;              // N x 3, model units
    Eigen::MatrixX3i triangles;             // M x 3, indices into vertices
    Eigen::MatrixX3d per_vertex_color;      // N x 3 in [0,1], or 0x3 when absent

    Eigen::Index vertex_count() const { return vertices.rows(); }
    Eigen::Index triangle_count() const { return triangles.rows(); }
    bool has_colors() const { return per_vertex_color.rows() == vertices.rows(); }

    // Throws DataError on out-of-range indices or non-finite coordinates.
    void validate() const;

    // Vertices flattened to a 3N vector (x0,y0,z0, x1,y1,z1, ...).
    Eigen::VectorXd flatten() const;
    static Eigen::MatrixX3d unflatten(const Eigen::VectorXd& v);

    // FNV-1a over vertex count + triangle indices; identifies the topology a
    // model was built for.
    std::uint64_t topology_hash() const;
};

// Seven free parameters: focal length, reduced quaternion, translation.
// The principal point is pinned to the image center and never optimized.
struct CameraParams {
    double f = 1.0;                 // focal length, pixels
    Vec3 q = Vec3::Zero();          // reduced quaternion (q1,q2,q3); q0 implied
    Vec3 t = Vec3::Zero();          // translation, model units
    Vec2 principal_point = Vec2::Zero();    // pixels

    void validate() const;          // f > 0 and |q| <= 1
};

struct Landmarks2D {
    Eigen::Matrix<double, 68, 2> points;    // pixel coordinates
    std::array<int, 68> vertex_map;         // mesh vertex index per landmark

    void validate(Eigen::Index vertex_count) const;
};

// Rotation matrix for a reduced quaternion (q0 = sqrt(1 - |q|^2) implied).
// Throws on |q| > 1.
Mat3 quaternion_rotation(const Vec3& q);

// d(R * v)/dq for the reduced parametrization, one 3x3 block per component:
// out[i] = d(R(q) v)/dq_i. Requires |q| < 1 (q0 > 0).
std::array<Vec3, 3> rotated_point_jacobian(const Vec3& q, const Vec3& v);

// Perspective projection of all vertices. Throws NumericalError naming the
// first vertex with view-space depth <= 0.
Eigen::MatrixX2d project(const Eigen::MatrixX3d& vertices, const CameraParams& cam);

// Projection of a single vertex plus its Jacobian w.r.t. the 7 camera
// parameters (f, q1,q2,q3, tx,ty,tz), and w.r.t. the vertex position itself
// (for chaining through shape bases).
struct ProjectionJacobian {
    Vec2 pixel;
    Eigen::Matrix<double, 2, 7> d_cam;
    Eigen::Matrix<double, 2, 3> d_vertex;
};
ProjectionJacobian project_with_jacobian(const Vec3& vertex, const CameraParams& cam);

struct ProcrustesResult {
    std::vector<Eigen::MatrixX3d> aligned;
    Eigen::MatrixX3d mean;
    int iterations = 0;
};

// Generalized Procrustes alignment (translation, rotation, isotropic scale).
// The mean is centered at the origin with unit Frobenius norm after each
// iteration, and the converged solution is put in a canonical orientation
// (principal axes of the mean aligned to x/y/z, signs fixed, det +1) so the
// result does not depend on a similarity transform common to all inputs.
ProcrustesResult generalized_procrustes(const std::vector<Eigen::MatrixX3d>& meshes,
                                        double tol = 1e-9, int max_iters = 100);

} // namespace facesyn
