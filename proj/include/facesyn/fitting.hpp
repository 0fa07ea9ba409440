#pragma once

#include "facesyn/geometry.hpp"
#include "facesyn/linear_model.hpp"
#include "facesyn/render.hpp"

#include <optional>
#include <string>
#include <vector>

namespace facesyn {

enum class FeatureFn { RawRgb, ImageGradient };

struct FitConfig {
    double landmark_weight = 1e5;  // c_l
    double shape_weight = 3e6;     // c_s
    double texture_weight = 1.0;   // c_t
    int max_iters = 50;
    double landmark_rms_tol = 0.5; // pixels
    double cost_rel_tol = 1e-6;
    FeatureFn feature_fn = FeatureFn::RawRgb;
    int visibility_refresh = 5;    // iterations between z-buffer visibility updates
};

struct FittingResult {
    Eigen::VectorXd shape_coeffs;    // p
    Eigen::VectorXd texture_coeffs;  // lambda, recovered in closed form at the end
    CameraParams camera;
    Eigen::MatrixX3d sampled_texture; // N x 3 from the image; model fill-in when invisible
    std::vector<bool> visibility;
    std::vector<double> cost_trace;   // total cost per accepted step, non-increasing
    bool converged = false;
    std::string stop_reason;
    int accepted_steps = 0;
    double landmark_rms = 0.0;        // projected-landmark RMSE, pixels
    double pixel_rms = 0.0;           // RMS of F(W) - T(lambda) over visible features
};

// Feature planes sampled by the pixel term. RawRgb keeps the three channels;
// ImageGradient uses central-difference x/y gradients of each channel
// (6 planes). Sampling is bilinear with the interpolant's exact gradient, so
// fitting Jacobians agree with finite differences of the sampled values.
struct FeatureImage {
    int width = 0;
    int height = 0;
    std::vector<Eigen::MatrixXd> planes; // each height x width, indexed (y, x)

    // value and d/dx, d/dy of plane `p` at continuous pixel coordinates.
    void sample(int p, double x, double y, double& value, double& ddx, double& ddy) const;
};

FeatureImage make_feature_image(const Image& image, FeatureFn fn);

// One Gauss-Newton linearization at (p, cam) under a fixed visibility set;
// exposed so the Jacobians can be checked against finite differences.
struct FitLinearization {
    Eigen::VectorXd pixel_residual;   // F(W(p,c)) - mean_texture, visible features
    Eigen::MatrixXd pixel_jacobian;   // rows match pixel_residual, cols = n_s + 7
    Eigen::MatrixXd texture_basis;    // texture basis rows for visible features
    Eigen::VectorXd landmark_residual; // 136: projected - observed, in pixels
    Eigen::MatrixXd landmark_jacobian; // 136 x (n_s + 7)
};

FitLinearization linearize_fit(const FeatureImage& features, const Landmarks2D& landmarks,
                               const LinearModel& shape_model, const LinearModel& texture_model,
                               const Eigen::VectorXd& p, const CameraParams& cam,
                               const std::vector<bool>& visibility);

// Camera initialization from a 2D similarity alignment of the mean shape's 68
// landmark vertices to the image landmarks, with depth set from the model's
// extent.
CameraParams init_camera_from_landmarks(const LinearModel& shape_model,
                                        const Landmarks2D& landmarks, int image_width,
                                        int image_height);

// Minimizes ||F(W(p,c)) - T(lambda)||^2 + c_l ||W_l(p,c) - s_l||^2
//         + c_s ||p||^2_{Sigma_s^-1} + c_t ||lambda||^2_{Sigma_t^-1}
// by project-out Gauss-Newton over (p, c): the texture coefficients are
// eliminated through the ridge-projected pixel term and recovered by least
// squares at the end. Every step is guarded by backtracking halving (<= 10)
// so the accepted cost never increases.
//
// When `triangles` is given, vertex visibility uses the rasterized z-buffer
// of the current mesh; otherwise a point-splat depth test stands in.
FittingResult fit_3dmm(const Image& image, const Landmarks2D& landmarks,
                       const LinearModel& shape_model, const LinearModel& texture_model,
                       const FitConfig& cfg = {},
                       std::optional<std::pair<Eigen::VectorXd, CameraParams>> init = {},
                       const Eigen::MatrixX3i* triangles = nullptr);

struct SampledTexture {
    Eigen::MatrixX3d colors;     // N x 3
    std::vector<bool> visibility;
};

// Bilinear image color at each projected vertex. Invisible vertices (occluded
// by the mesh's own z-buffer, out of bounds, or behind the camera) take the
// fallback color when provided, else mid-gray.
SampledTexture sample_texture(const Image& image, const Eigen::MatrixX3d& vertices,
                              const CameraParams& cam, const Eigen::MatrixX3i& triangles,
                              const Eigen::MatrixX3d* fallback_colors = nullptr);

} // namespace facesyn
