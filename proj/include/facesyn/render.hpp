#pragma once

#include "facesyn/geometry.hpp"

#include <vector>

namespace facesyn {

// H x W x 3 image with real-valued channels in [0,1]. Row-major, pixel (x, y)
// at channel c lives at (y * width + x) * 3 + c.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(int w, int h, double fill = 0.0);

    double& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    bool contains(double x, double y) const { return x >= 0 && y >= 0 && x < width && y < height; }

    void validate() const; // dimensions > 0, finite values in [0,1]
};

struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int w, int h, bool fill = false)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}
    bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v) { data[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    std::size_t count() const;
};

Mask erode(const Mask& m, int pixels);
Mask dilate(const Mask& m, int pixels);

struct RenderOutput {
    Image image;
    Mask mask;                    // true exactly where a triangle was drawn
    std::vector<double> zbuffer;  // view-space depth, +inf where uncovered
};

// Z-buffered perspective rasterizer with perspective-correct barycentric
// color interpolation. Uncovered pixels copy the background; behind-camera
// triangles are skipped, as are back-facing ones (meshes are wound with
// outward normals, so camera-facing triangles project with negative signed
// area in y-down pixel coordinates). Colors are clamped to [0,1] here (and
// only here). Pixel centers sit at +0.5; ties on shared edges follow the
// top-left fill rule so adjacent triangles partition coverage exactly.
RenderOutput rasterize(const TriMesh& mesh, const Eigen::MatrixX3d& per_vertex_colors,
                       const CameraParams& cam, const Image& background);

// Per-vertex visibility by z-buffer comparison against the mesh's own render.
// A vertex is visible when it projects in-bounds with positive depth and its
// depth is within rel_tol of the z-buffer value at its pixel.
std::vector<bool> vertex_visibility(const TriMesh& mesh, const CameraParams& cam, int width,
                                    int height, double rel_tol = 1e-3);

struct PoissonResult {
    Image image;
    bool degenerate = false;  // empty interior: target returned unchanged
};

// Gradient-domain compositing: per channel, solves the discrete Poisson
// equation on the mask interior (4-neighbor Laplacian, guidance = source
// gradients, Dirichlet boundary = target). Mask must not touch the image
// border. Solver: conjugate gradient with Jacobi preconditioner; the result
// satisfies ||Ax - b||_inf < 1e-6 before clamping to [0,1].
PoissonResult poisson_blend(const Image& source, const Image& target, const Mask& mask,
                            bool mixed_gradients = false);

} // namespace facesyn
