#pragma once

#include "facesyn/fitting.hpp"
#include "facesyn/gallery.hpp"
#include "facesyn/render.hpp"

#include <string>
#include <variant>
#include <vector>

namespace facesyn {

// What to impose on the fitted face: a VA point, a VA path rendered as an
// image sequence, or one of the six basic expressions.
struct AffectRequest {
    struct VaPoint {
        double valence, arousal;
    };
    struct VaPath {
        std::vector<Vec2> points;
        int frames;
    };
    struct Basic {
        std::string label;
    };
    std::variant<VaPoint, VaPath, Basic> request;

    static AffectRequest va_point(double v, double a) { return {VaPoint{v, a}}; }
    static AffectRequest va_path(std::vector<Vec2> pts, int frames) {
        return {VaPath{std::move(pts), frames}};
    }
    static AffectRequest basic(std::string label) { return {Basic{std::move(label)}}; }
};

// s_new = s_orig + (s_gen - template): impose the generated face's deformation
// on the reconstructed mesh.
Eigen::VectorXd transfer_deformation(const Eigen::VectorXd& s_orig, const Eigen::VectorXd& s_gen,
                                     const Eigen::VectorXd& template_shape);

struct SynthesisConfig {
    FitConfig fit;
    int mask_erode_px = 1;   // blend mask = rasterized coverage eroded this much
    bool mixed_gradients = false;
};

struct SynthesisFrame {
    Image image;
    int cluster_index = -1;  // gallery cluster used; -1 for basic expressions
    Mask render_mask;        // raw rasterized coverage (pre-erode)
};

struct SynthesisResult {
    FittingResult fit;
    std::vector<SynthesisFrame> frames;
};

// Full pipeline: fit once, sample the texture once, then per output frame
// query the gallery, impose the deformation, rasterize over the original
// image and poisson-blend the render back in.
SynthesisResult synthesize(const Image& image, const Landmarks2D& landmarks,
                           const LinearModel& shape_model, const LinearModel& texture_model,
                           const TriMesh& topology, const AffectGallery& gallery,
                           const AffectRequest& request, const SynthesisConfig& cfg = {});

} // namespace facesyn
