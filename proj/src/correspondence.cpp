#include "facesyn/correspondence.hpp"

#include "facesyn/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <set>

namespace facesyn {

Eigen::MatrixX2d cylindrical_uv(const TriMesh& mesh) {
    const Eigen::Index n = mesh.vertices.rows();
    if (n < 3) throw DataError("cylindrical_uv needs at least 3 vertices");

    const Vec3 centroid = mesh.vertices.colwise().mean().transpose();
    const Eigen::MatrixX3d centered = mesh.vertices.rowwise() - centroid.transpose();

    Eigen::SelfAdjointEigenSolver<Mat3> eig(centered.transpose() * centered);
    Vec3 axis = eig.eigenvectors().col(2); // largest variance
    Eigen::Index imax;
    axis.cwiseAbs().maxCoeff(&imax);
    if (axis(imax) < 0) axis = -axis;

    // Lateral frame: x' from world x (or world y when the axis is near x),
    // z' = x' cross axis, so an identity-aligned mesh keeps the plain formula.
    Vec3 xp = Vec3::UnitX() - axis.x() * axis;
    if (xp.norm() < 1e-9) xp = Vec3::UnitY() - axis.y() * axis;
    xp.normalize();
    const Vec3 zp = xp.cross(axis);

    const Eigen::VectorXd h = centered * axis;
    const double h_min = h.minCoeff(), h_max = h.maxCoeff();
    if (!(h_max - h_min > 0)) throw DataError("cylindrical_uv: mesh has zero extent along its axis");

    Eigen::MatrixX2d uv(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x = centered.row(i).dot(xp);
        const double z = centered.row(i).dot(zp);
        uv(i, 0) = (std::atan2(x, z) + std::numbers::pi) / (2.0 * std::numbers::pi);
        uv(i, 1) = (h(i) - h_min) / (h_max - h_min);
    }
    return uv;
}

namespace {

inline double tps_kernel(double r2) {
    // r^2 log r = 0.5 r^2 log r^2; zero at r = 0.
    return r2 > 0.0 ? 0.5 * r2 * std::log(r2) : 0.0;
}

} // namespace

TpsWarp tps_fit(const Eigen::MatrixX2d& src, const Eigen::MatrixX2d& dst) {
    const Eigen::Index k = src.rows();
    if (k < 3) throw DataError("TPS needs at least 3 control points");
    if (dst.rows() != k) throw DataError("TPS control point counts differ");

    // [ K  P ] [w]   [dst]
    // [ P' 0 ] [a] = [ 0 ]   with K_ij = phi(|p_i - p_j|), P = [1 x y].
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(k + 3, k + 3);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = i + 1; j < k; ++j) {
            const double v = tps_kernel((src.row(i) - src.row(j)).squaredNorm());
            sys(i, j) = v;
            sys(j, i) = v;
        }
        sys(i, k) = 1.0;
        sys(i, k + 1) = src(i, 0);
        sys(i, k + 2) = src(i, 1);
        sys(k, i) = 1.0;
        sys(k + 1, i) = src(i, 0);
        sys(k + 2, i) = src(i, 1);
    }

    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(k + 3, 2);
    rhs.topRows(k) = dst;

    Eigen::FullPivLU<Eigen::MatrixXd> lu(sys);
    if (!lu.isInvertible())
        throw NumericalError("TPS system is singular (collinear or duplicate control points)");
    const Eigen::MatrixXd sol = lu.solve(rhs);

    TpsWarp warp;
    warp.controls = src;
    warp.kernel_w = sol.topRows(k);
    warp.affine = sol.bottomRows(3);
    return warp;
}

Eigen::MatrixX2d tps_apply(const TpsWarp& warp, const Eigen::MatrixX2d& points) {
    const Eigen::Index q = points.rows();
    const Eigen::Index k = warp.controls.rows();
    Eigen::MatrixX2d out(q, 2);
    for (Eigen::Index i = 0; i < q; ++i) {
        Eigen::RowVector2d p = points.row(i);
        Eigen::RowVector2d v = warp.affine.row(0) + p.x() * warp.affine.row(1) +
                               p.y() * warp.affine.row(2);
        for (Eigen::Index j = 0; j < k; ++j)
            v += tps_kernel((p - warp.controls.row(j)).squaredNorm()) * warp.kernel_w.row(j);
        out.row(i) = v;
    }
    return out;
}

namespace {

std::vector<std::pair<int, int>> mesh_edges(const TriMesh& mesh) {
    std::set<std::pair<int, int>> edges;
    for (Eigen::Index t = 0; t < mesh.triangles.rows(); ++t) {
        for (int k = 0; k < 3; ++k) {
            int a = mesh.triangles(t, k);
            int b = mesh.triangles(t, (k + 1) % 3);
            if (a > b) std::swap(a, b);
            edges.emplace(a, b);
        }
    }
    return {edges.begin(), edges.end()};
}

int count_components(Eigen::Index n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<int> parent(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = static_cast<int>(i);
    std::function<int(int)> find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    };
    int comps = static_cast<int>(n);
    for (const auto& [a, b] : edges) {
        const int ra = find(a), rb = find(b);
        if (ra != rb) {
            parent[static_cast<std::size_t>(ra)] = rb;
            --comps;
        }
    }
    return comps;
}

Eigen::Index closest_target_vertex(const Eigen::MatrixX3d& targets, const Vec3& p) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < targets.rows(); ++i) {
        const double d = (targets.row(i).transpose() - p).squaredNorm();
        if (d < best_d) { // strict: lowest index wins ties
            best_d = d;
            best = i;
        }
    }
    return best;
}

} // namespace

NicpResult nicp_register(const TriMesh& source, const TriMesh& target, const NicpConfig& cfg,
                         const std::vector<NicpLandmark>& landmarks) {
    source.validate();
    target.validate();
    const Eigen::Index n = source.vertices.rows();
    if (n == 0 || target.vertices.rows() == 0) throw DataError("nicp: empty mesh");
    for (std::size_t i = 1; i < cfg.stiffness_schedule.size(); ++i)
        if (!(cfg.stiffness_schedule[i] < cfg.stiffness_schedule[i - 1]) ||
            cfg.stiffness_schedule[i] <= 0)
            throw DataError("stiffness schedule must be strictly decreasing and positive");

    const auto edges = mesh_edges(source);
    const int comps = count_components(n, edges);
    if (comps != 1)
        throw DataError("nicp: source mesh edge graph has " + std::to_string(comps) +
                        " connected components; registration needs a single component");

    // Unknowns: a 4x3 affine block X_i per vertex (rows: linear part + offset),
    // stacked into a (4n) x 3 matrix. A vertex maps to (v^T 1) X_i.
    Eigen::MatrixXd x(4 * n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        x.block<3, 3>(4 * i, 0) = Mat3::Identity();
        x.row(4 * i + 3).setZero();
    }

    auto deformed_positions = [&](const Eigen::MatrixXd& xs) {
        Eigen::MatrixX3d out(n, 3);
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::RowVector4d vh;
            vh << source.vertices(i, 0), source.vertices(i, 1), source.vertices(i, 2), 1.0;
            out.row(i) = vh * xs.block<4, 3>(4 * i, 0);
        }
        return out;
    };

    NicpResult result;
    result.deformed = source;

    for (const double alpha : cfg.stiffness_schedule) {
        double objective = std::numeric_limits<double>::infinity();
        for (int inner = 0; inner < cfg.iters_per_level; ++inner) {
            const Eigen::MatrixX3d current = deformed_positions(x);

            std::vector<Eigen::Index> corr(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i)
                corr[static_cast<std::size_t>(i)] =
                    closest_target_vertex(target.vertices, current.row(i).transpose());

            // Normal equations for:
            //   alpha * || X_i - X_j ||^2 over edges
            //   + || (v_i^T 1) X_i - u_i ||^2 over correspondences
            //   + beta * || (v_l^T 1) X_l - m_l ||^2 over landmarks
            std::vector<Eigen::Triplet<double>> trips;
            Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(4 * n, 3);
            const double a2 = alpha * alpha;
            for (const auto& [ia, ib] : edges) {
                for (int r = 0; r < 4; ++r) {
                    trips.emplace_back(4 * ia + r, 4 * ia + r, a2);
                    trips.emplace_back(4 * ib + r, 4 * ib + r, a2);
                    trips.emplace_back(4 * ia + r, 4 * ib + r, -a2);
                    trips.emplace_back(4 * ib + r, 4 * ia + r, -a2);
                }
            }
            auto add_point_term = [&](Eigen::Index vi, const Vec3& tgt, double w) {
                Eigen::Vector4d vh;
                vh << source.vertices(vi, 0), source.vertices(vi, 1), source.vertices(vi, 2), 1.0;
                for (int r = 0; r < 4; ++r) {
                    for (int c = 0; c < 4; ++c)
                        trips.emplace_back(4 * vi + r, 4 * vi + c, w * vh(r) * vh(c));
                    rhs.row(4 * vi + r) += w * vh(r) * tgt.transpose();
                }
            };
            for (Eigen::Index i = 0; i < n; ++i)
                add_point_term(i, target.vertices.row(corr[static_cast<std::size_t>(i)]).transpose(), 1.0);
            for (const auto& lm : landmarks) {
                if (lm.source_vertex < 0 || lm.source_vertex >= n)
                    throw DataError("nicp landmark references invalid source vertex");
                add_point_term(lm.source_vertex, lm.target_position, cfg.landmark_weight);
            }

            Eigen::SparseMatrix<double> a(4 * n, 4 * n);
            a.setFromTriplets(trips.begin(), trips.end());
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
            if (solver.info() != Eigen::Success)
                throw NumericalError("nicp: sparse factorization failed");
            const Eigen::MatrixXd x_new = solver.solve(rhs);

            // Objective under the correspondences used for this solve.
            auto eval_objective = [&](const Eigen::MatrixXd& xs) {
                double obj = 0.0;
                for (const auto& [ia, ib] : edges)
                    obj += a2 * (xs.block<4, 3>(4 * ia, 0) - xs.block<4, 3>(4 * ib, 0)).squaredNorm();
                const Eigen::MatrixX3d pos = deformed_positions(xs);
                for (Eigen::Index i = 0; i < n; ++i)
                    obj += (pos.row(i) - target.vertices.row(corr[static_cast<std::size_t>(i)]))
                               .squaredNorm();
                for (const auto& lm : landmarks)
                    obj += cfg.landmark_weight *
                           (pos.row(lm.source_vertex).transpose() - lm.target_position).squaredNorm();
                return obj;
            };
            const double obj_before = eval_objective(x);
            const double obj = eval_objective(x_new);
            result.inner_objectives.emplace_back(obj_before, obj);

            x = x_new;
            const double rel_change = std::abs(objective - obj) / std::max(obj, 1e-300);
            objective = obj;
            if (rel_change < 1e-10) break;
        }
        result.final_objective.push_back(objective);
    }

    result.deformed.vertices = deformed_positions(x);
    return result;
}

} // namespace facesyn
