#include "facesyn/geometry.hpp"

#include "facesyn/errors.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace facesyn {

void TriMesh::validate() const {
    if (!vertices.allFinite()) throw DataError("mesh has non-finite vertex coordinates");
    const int n = static_cast<int>(vertices.rows());
    for (Eigen::Index i = 0; i < triangles.rows(); ++i) {
        for (int k = 0; k < 3; ++k) {
            const int idx = triangles(i, k);
            if (idx < 0 || idx >= n)
                throw DataError("triangle " + std::to_string(i) + " references vertex " +
                                std::to_string(idx) + " outside [0," + std::to_string(n) + ")");
        }
    }
    if (per_vertex_color.rows() != 0 && per_vertex_color.rows() != vertices.rows())
        throw DataError("per-vertex color count does not match vertex count");
}

Eigen::VectorXd TriMesh::flatten() const {
    Eigen::VectorXd out(vertices.size());
    for (Eigen::Index i = 0; i < vertices.rows(); ++i)
        out.segment<3>(3 * i) = vertices.row(i).transpose();
    return out;
}

Eigen::MatrixX3d TriMesh::unflatten(const Eigen::VectorXd& v) {
    if (v.size() % 3 != 0) throw DataError("flattened vertex vector length not divisible by 3");
    const Eigen::Index n = v.size() / 3;
    Eigen::MatrixX3d out(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) out.row(i) = v.segment<3>(3 * i).transpose();
    return out;
}

std::uint64_t TriMesh::topology_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t x) {
        for (int b = 0; b < 8; ++b) {
            h ^= (x >> (8 * b)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    mix(static_cast<std::uint64_t>(vertices.rows()));
    for (Eigen::Index i = 0; i < triangles.rows(); ++i)
        for (int k = 0; k < 3; ++k) mix(static_cast<std::uint64_t>(triangles(i, k)));
    return h;
}

void CameraParams::validate() const {
    if (!(f > 0.0)) throw DataError("camera focal length must be positive");
    if (q.squaredNorm() > 1.0 + 1e-12) throw DataError("reduced quaternion norm exceeds 1");
}

void Landmarks2D::validate(Eigen::Index vertex_count) const {
    for (int i = 0; i < 68; ++i)
        if (vertex_map[i] < 0 || vertex_map[i] >= vertex_count)
            throw DataError("landmark " + std::to_string(i) + " maps to invalid vertex " +
                            std::to_string(vertex_map[i]));
}

Mat3 quaternion_rotation(const Vec3& q) {
    const double nsq = q.squaredNorm();
    if (nsq > 1.0 + 1e-12) throw DataError("reduced quaternion norm exceeds 1");
    const double q0 = std::sqrt(std::max(0.0, 1.0 - nsq));
    const double q1 = q.x(), q2 = q.y(), q3 = q.z();
    Mat3 r;
    r << 1 - 2 * (q2 * q2 + q3 * q3), 2 * (q1 * q2 - q0 * q3), 2 * (q1 * q3 + q0 * q2),
         2 * (q1 * q2 + q0 * q3), 1 - 2 * (q1 * q1 + q3 * q3), 2 * (q2 * q3 - q0 * q1),
         2 * (q1 * q3 - q0 * q2), 2 * (q2 * q3 + q0 * q1), 1 - 2 * (q1 * q1 + q2 * q2);
    return r;
}

std::array<Vec3, 3> rotated_point_jacobian(const Vec3& q, const Vec3& v) {
    const double nsq = q.squaredNorm();
    if (nsq >= 1.0) throw NumericalError("rotation jacobian needs |q| < 1");
    const double q0 = std::sqrt(1.0 - nsq);
    const double q1 = q.x(), q2 = q.y(), q3 = q.z();

    // dR/dq_i with q0 = sqrt(1 - |q|^2), so dq0/dq_i = -q_i/q0.
    std::array<Vec3, 3> out;
    for (int i = 0; i < 3; ++i) {
        const double dq0 = -q[i] / q0;
        double dq1 = (i == 0), dq2 = (i == 1), dq3 = (i == 2);
        Mat3 dr;
        dr << -4 * (q2 * dq2 + q3 * dq3),
              2 * (dq1 * q2 + q1 * dq2 - dq0 * q3 - q0 * dq3),
              2 * (dq1 * q3 + q1 * dq3 + dq0 * q2 + q0 * dq2),
              2 * (dq1 * q2 + q1 * dq2 + dq0 * q3 + q0 * dq3),
              -4 * (q1 * dq1 + q3 * dq3),
              2 * (dq2 * q3 + q2 * dq3 - dq0 * q1 - q0 * dq1),
              2 * (dq1 * q3 + q1 * dq3 - dq0 * q2 - q0 * dq2),
              2 * (dq2 * q3 + q2 * dq3 + dq0 * q1 + q0 * dq1),
              -4 * (q1 * dq1 + q2 * dq2);
        out[i] = dr * v;
    }
    return out;
}

Eigen::MatrixX2d project(const Eigen::MatrixX3d& vertices, const CameraParams& cam) {
    cam.validate();
    const Mat3 r = quaternion_rotation(cam.q);
    Eigen::MatrixX2d out(vertices.rows(), 2);
    for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
        const Vec3 v = r * vertices.row(i).transpose() + cam.t;
        if (v.z() <= 0.0)
            throw NumericalError("vertex " + std::to_string(i) + " is behind the camera (vz=" +
                                 std::to_string(v.z()) + ")");
        out(i, 0) = cam.principal_point.x() + cam.f * v.x() / v.z();
        out(i, 1) = cam.principal_point.y() + cam.f * v.y() / v.z();
    }
    return out;
}

ProjectionJacobian project_with_jacobian(const Vec3& vertex, const CameraParams& cam) {
    const Mat3 r = quaternion_rotation(cam.q);
    const Vec3 v = r * vertex + cam.t;
    if (v.z() <= 0.0) throw NumericalError("vertex behind camera in jacobian evaluation");

    ProjectionJacobian jac;
    const double inv_z = 1.0 / v.z();
    jac.pixel = cam.principal_point + cam.f * inv_z * Vec2(v.x(), v.y());

    // d(pixel)/d(view-space point)
    Eigen::Matrix<double, 2, 3> d_view;
    d_view << cam.f * inv_z, 0, -cam.f * v.x() * inv_z * inv_z,
              0, cam.f * inv_z, -cam.f * v.y() * inv_z * inv_z;

    jac.d_cam.col(0) = inv_z * Vec2(v.x(), v.y());            // d/df
    const auto dq = rotated_point_jacobian(cam.q, vertex);
    for (int i = 0; i < 3; ++i) jac.d_cam.col(1 + i) = d_view * dq[i];
    jac.d_cam.block<2, 3>(0, 4) = d_view;                     // d/dt
    jac.d_vertex = d_view * r;
    return jac;
}

namespace {

// Similarity transform (s, R, t) minimizing ||s R x_i + t - y_i||^2 with
// det(R) = +1 (Kabsch-Umeyama).
void align_similarity(const Eigen::MatrixX3d& x, const Eigen::MatrixX3d& y,
                      Eigen::MatrixX3d& out) {
    const Vec3 cx = x.colwise().mean().transpose();
    const Vec3 cy = y.colwise().mean().transpose();
    const Eigen::MatrixX3d xc = x.rowwise() - cx.transpose();
    const Eigen::MatrixX3d yc = y.rowwise() - cy.transpose();

    const Mat3 cov = xc.transpose() * yc;
    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) d(2, 2) = -1;
    const Mat3 rot = svd.matrixV() * d * svd.matrixU().transpose();

    const double denom = xc.squaredNorm();
    if (denom <= 0.0) throw DataError("degenerate geometry: all vertices coincide");
    const double scale = (svd.singularValues().asDiagonal() * d).trace() / denom;

    out = (scale * (xc * rot.transpose())).rowwise() + cy.transpose();
}

// Rotate a centered mean shape so its principal axes line up with x/y/z
// (descending variance), with deterministic signs and det +1.
Mat3 canonical_rotation(const Eigen::MatrixX3d& mean) {
    const Mat3 cov = mean.transpose() * mean;
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    // SelfAdjointEigenSolver sorts ascending; we want descending.
    Mat3 axes;
    axes.col(0) = eig.eigenvectors().col(2);
    axes.col(1) = eig.eigenvectors().col(1);
    for (int k = 0; k < 2; ++k) {
        const Eigen::VectorXd proj = mean * axes.col(k);
        Eigen::Index imax;
        proj.cwiseAbs().maxCoeff(&imax);
        if (proj(imax) < 0) axes.col(k) = -axes.col(k);
    }
    axes.col(2) = axes.col(0).cross(axes.col(1));
    return axes.transpose();
}

} // namespace

ProcrustesResult generalized_procrustes(const std::vector<Eigen::MatrixX3d>& meshes,
                                        double tol, int max_iters) {
    if (meshes.empty()) throw DataError("generalized_procrustes needs at least one mesh");
    const Eigen::Index n = meshes[0].rows();
    for (const auto& m : meshes)
        if (m.rows() != n) throw DataError("meshes must share topology");

    ProcrustesResult res;
    res.aligned = meshes;

    auto normalize = [](Eigen::MatrixX3d& m) {
        m.rowwise() -= m.colwise().mean().eval();
        const double norm = m.norm();
        if (norm <= 0.0) throw DataError("degenerate geometry: all vertices coincide");
        m /= norm;
    };

    Eigen::MatrixX3d mean = meshes[0];
    normalize(mean);

    for (res.iterations = 1; res.iterations <= max_iters; ++res.iterations) {
        for (std::size_t i = 0; i < meshes.size(); ++i)
            align_similarity(meshes[i], mean, res.aligned[i]);

        Eigen::MatrixX3d new_mean = Eigen::MatrixX3d::Zero(n, 3);
        for (const auto& m : res.aligned) new_mean += m;
        new_mean /= static_cast<double>(meshes.size());
        normalize(new_mean);

        const double change = (new_mean - mean).norm();
        mean = new_mean;
        if (change < tol) break;
    }

    const Mat3 canon = canonical_rotation(mean);
    mean = mean * canon.transpose();
    for (std::size_t i = 0; i < meshes.size(); ++i)
        align_similarity(meshes[i], mean, res.aligned[i]);
    res.mean = mean;
    return res;
}

} // namespace facesyn
