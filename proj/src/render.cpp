#include "facesyn/render.hpp"

#include "facesyn/errors.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>

namespace facesyn {

Image::Image(int w, int h, double fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {
    if (w <= 0 || h <= 0) throw DataError("image dimensions must be positive");
}

void Image::validate() const {
    if (width <= 0 || height <= 0) throw DataError("image dimensions must be positive");
    if (pixels.size() != static_cast<std::size_t>(width) * height * 3)
        throw DataError("image buffer size mismatch");
    for (double v : pixels)
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw DataError("image values must be finite and in [0,1]");
}

std::size_t Mask::count() const {
    std::size_t n = 0;
    for (auto v : data) n += v != 0;
    return n;
}

Mask erode(const Mask& m, int pixels) {
    Mask out = m;
    for (int pass = 0; pass < pixels; ++pass) {
        Mask next = out;
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) {
                if (!out.at(x, y)) continue;
                const bool boundary = x == 0 || y == 0 || x == m.width - 1 || y == m.height - 1 ||
                                      !out.at(x - 1, y) || !out.at(x + 1, y) ||
                                      !out.at(x, y - 1) || !out.at(x, y + 1);
                if (boundary) next.set(x, y, false);
            }
        out = next;
    }
    return out;
}

Mask dilate(const Mask& m, int pixels) {
    Mask out = m;
    for (int pass = 0; pass < pixels; ++pass) {
        Mask next = out;
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) {
                if (out.at(x, y)) continue;
                const bool touch = (x > 0 && out.at(x - 1, y)) || (x < m.width - 1 && out.at(x + 1, y)) ||
                                   (y > 0 && out.at(x, y - 1)) || (y < m.height - 1 && out.at(x, y + 1));
                if (touch) next.set(x, y, true);
            }
        out = next;
    }
    return out;
}

namespace {

// Doubled signed area in pixel coordinates (x right, y down). Positive for
// clockwise-on-screen triangles, which is the front-facing orientation here.
inline double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
    return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// Top-left fill rule for positively oriented triangles: an edge owns its
// boundary samples when it goes up, or is exactly horizontal going right.
inline bool edge_is_top_left(const Vec2& a, const Vec2& b) {
    return (b.y() < a.y()) || (a.y() == b.y() && b.x() > a.x());
}

} // namespace

RenderOutput rasterize(const TriMesh& mesh, const Eigen::MatrixX3d& per_vertex_colors,
                       const CameraParams& cam, const Image& background) {
    background.validate();
    cam.validate();
    if (per_vertex_colors.rows() != mesh.vertices.rows())
        throw DataError("per-vertex color count does not match vertex count");

    RenderOutput out;
    out.image = background;
    out.mask = Mask(background.width, background.height, false);
    out.zbuffer.assign(static_cast<std::size_t>(background.width) * background.height,
                       std::numeric_limits<double>::infinity());

    const Mat3 rot = quaternion_rotation(cam.q);
    const Eigen::Index n = mesh.vertices.rows();
    Eigen::MatrixX3d view(n, 3);
    Eigen::MatrixX2d screen(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3 v = rot * mesh.vertices.row(i).transpose() + cam.t;
        view.row(i) = v.transpose();
        if (v.z() > 0.0) {
            screen(i, 0) = cam.principal_point.x() + cam.f * v.x() / v.z();
            screen(i, 1) = cam.principal_point.y() + cam.f * v.y() / v.z();
        }
    }

    for (Eigen::Index tri = 0; tri < mesh.triangles.rows(); ++tri) {
        const int i0 = mesh.triangles(tri, 0);
        int i1 = mesh.triangles(tri, 1);
        int i2 = mesh.triangles(tri, 2);
        if (view(i0, 2) <= 0 || view(i1, 2) <= 0 || view(i2, 2) <= 0) continue;

        // Meshes are wound with outward normals (right-hand rule); a
        // camera-facing triangle therefore projects with negative signed area
        // in y-down pixel coordinates. Cull the rest, then swap two vertices
        // so the fill rule below works with positive weights.
        if (orient2d(screen.row(i0).transpose(), screen.row(i1).transpose(),
                     screen.row(i2).transpose()) >= 0.0)
            continue; // back-facing or degenerate
        std::swap(i1, i2);

        const Vec2 p0 = screen.row(i0).transpose();
        const Vec2 p1 = screen.row(i1).transpose();
        const Vec2 p2 = screen.row(i2).transpose();
        const double area2 = orient2d(p0, p1, p2);

        const int min_x = std::max(0, static_cast<int>(std::floor(std::min({p0.x(), p1.x(), p2.x()}) - 0.5)));
        const int max_x = std::min(background.width - 1,
                                   static_cast<int>(std::ceil(std::max({p0.x(), p1.x(), p2.x()}) - 0.5)));
        const int min_y = std::max(0, static_cast<int>(std::floor(std::min({p0.y(), p1.y(), p2.y()}) - 0.5)));
        const int max_y = std::min(background.height - 1,
                                   static_cast<int>(std::ceil(std::max({p0.y(), p1.y(), p2.y()}) - 0.5)));
        if (min_x > max_x || min_y > max_y) continue;

        const bool tl0 = edge_is_top_left(p1, p2); // edge opposite vertex 0
        const bool tl1 = edge_is_top_left(p2, p0);
        const bool tl2 = edge_is_top_left(p0, p1);

        const double inv_z0 = 1.0 / view(i0, 2);
        const double inv_z1 = 1.0 / view(i1, 2);
        const double inv_z2 = 1.0 / view(i2, 2);

        for (int py = min_y; py <= max_y; ++py) {
            for (int px = min_x; px <= max_x; ++px) {
                const Vec2 p(px + 0.5, py + 0.5);
                const double w0 = orient2d(p1, p2, p);
                const double w1 = orient2d(p2, p0, p);
                const double w2 = orient2d(p0, p1, p);
                const bool in0 = w0 > 0 || (w0 == 0 && tl0);
                const bool in1 = w1 > 0 || (w1 == 0 && tl1);
                const bool in2 = w2 > 0 || (w2 == 0 && tl2);
                if (!(in0 && in1 && in2)) continue;

                // Screen-space barycentrics, then perspective correction via 1/z.
                const double b0 = w0 / area2;
                const double b1 = w1 / area2;
                const double b2 = w2 / area2;
                const double inv_z = b0 * inv_z0 + b1 * inv_z1 + b2 * inv_z2;
                const double depth = 1.0 / inv_z;

                const std::size_t pix = static_cast<std::size_t>(py) * background.width + px;
                if (depth >= out.zbuffer[pix]) continue;
                out.zbuffer[pix] = depth;
                out.mask.set(px, py, true);
                for (int c = 0; c < 3; ++c) {
                    const double col = (b0 * inv_z0 * per_vertex_colors(i0, c) +
                                        b1 * inv_z1 * per_vertex_colors(i1, c) +
                                        b2 * inv_z2 * per_vertex_colors(i2, c)) * depth;
                    out.image.at(px, py, c) = std::clamp(col, 0.0, 1.0);
                }
            }
        }
    }
    return out;
}

std::vector<bool> vertex_visibility(const TriMesh& mesh, const CameraParams& cam, int width,
                                    int height, double rel_tol) {
    const Image blank(width, height, 0.0);
    const Eigen::MatrixX3d colors = Eigen::MatrixX3d::Zero(mesh.vertices.rows(), 3);
    const RenderOutput render = rasterize(mesh, colors, cam, blank);

    const Mat3 rot = quaternion_rotation(cam.q);
    std::vector<bool> visible(static_cast<std::size_t>(mesh.vertices.rows()), false);
    for (Eigen::Index i = 0; i < mesh.vertices.rows(); ++i) {
        const Vec3 v = rot * mesh.vertices.row(i).transpose() + cam.t;
        if (v.z() <= 0.0) continue;
        const double sx = cam.principal_point.x() + cam.f * v.x() / v.z();
        const double sy = cam.principal_point.y() + cam.f * v.y() / v.z();
        const int px = static_cast<int>(std::floor(sx));
        const int py = static_cast<int>(std::floor(sy));
        if (px < 0 || py < 0 || px >= width || py >= height) continue;
        const double z_at = render.zbuffer[static_cast<std::size_t>(py) * width + px];
        if (std::isfinite(z_at) && v.z() <= z_at * (1.0 + rel_tol)) visible[static_cast<std::size_t>(i)] = true;
    }
    return visible;
}

PoissonResult poisson_blend(const Image& source, const Image& target, const Mask& mask,
                            bool mixed_gradients) {
    source.validate();
    target.validate();
    if (source.width != target.width || source.height != target.height ||
        mask.width != target.width || mask.height != target.height)
        throw DataError("poisson_blend inputs must share dimensions");
    for (int x = 0; x < mask.width; ++x)
        if (mask.at(x, 0) || mask.at(x, mask.height - 1))
            throw DataError("poisson mask touches the image border (pad the mask first)");
    for (int y = 0; y < mask.height; ++y)
        if (mask.at(0, y) || mask.at(mask.width - 1, y))
            throw DataError("poisson mask touches the image border (pad the mask first)");

    PoissonResult res;
    res.image = target;

    // Interior = all mask pixels (border exclusion above guarantees the full
    // 4-neighbor stencil exists for each).
    std::vector<int> index(static_cast<std::size_t>(mask.width) * mask.height, -1);
    std::vector<std::pair<int, int>> interior;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) {
                index[static_cast<std::size_t>(y) * mask.width + x] =
                    static_cast<int>(interior.size());
                interior.emplace_back(x, y);
            }
    if (interior.empty()) {
        res.degenerate = true;
        return res;
    }
    const int m = static_cast<int>(interior.size());

    Eigen::SparseMatrix<double> a(m, m);
    {
        std::vector<Eigen::Triplet<double>> triplets;
        triplets.reserve(static_cast<std::size_t>(m) * 5);
        for (int k = 0; k < m; ++k) {
            const auto [x, y] = interior[static_cast<std::size_t>(k)];
            triplets.emplace_back(k, k, 4.0);
            const int neighbors[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
            for (const auto& nb : neighbors) {
                const int j = index[static_cast<std::size_t>(nb[1]) * mask.width + nb[0]];
                if (j >= 0) triplets.emplace_back(k, j, -1.0);
            }
        }
        a.setFromTriplets(triplets.begin(), triplets.end());
    }

    for (int c = 0; c < 3; ++c) {
        Eigen::VectorXd b(m), guess(m);
        for (int k = 0; k < m; ++k) {
            const auto [x, y] = interior[static_cast<std::size_t>(k)];
            double rhs = 0.0;
            const int neighbors[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
            for (const auto& nb : neighbors) {
                double grad = source.at(x, y, c) - source.at(nb[0], nb[1], c);
                if (mixed_gradients) {
                    const double tgrad = target.at(x, y, c) - target.at(nb[0], nb[1], c);
                    if (std::abs(tgrad) > std::abs(grad)) grad = tgrad;
                }
                rhs += grad;
                if (index[static_cast<std::size_t>(nb[1]) * mask.width + nb[0]] < 0)
                    rhs += target.at(nb[0], nb[1], c); // Dirichlet boundary
            }
            b(k) = rhs;
            guess(k) = source.at(x, y, c);
        }

        Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                                 Eigen::DiagonalPreconditioner<double>>
            cg;
        cg.setTolerance(1e-8);
        cg.setMaxIterations(10 * static_cast<Eigen::Index>(m));
        cg.compute(a);
        const Eigen::VectorXd x = cg.solveWithGuess(b, guess);

        const double residual = (a * x - b).cwiseAbs().maxCoeff();
        if (!(residual < 1e-6))
            throw NumericalError("poisson solve residual " + std::to_string(residual) +
                                 " exceeds 1e-6");

        for (int k = 0; k < m; ++k) {
            const auto [px, py] = interior[static_cast<std::size_t>(k)];
            res.image.at(px, py, c) = std::clamp(x(k), 0.0, 1.0);
        }
    }
    return res;
}

} // namespace facesyn
