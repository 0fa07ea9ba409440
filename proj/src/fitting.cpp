#include "facesyn/fitting.hpp"

#include "facesyn/errors.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace facesyn {

void FeatureImage::sample(int p, double x, double y, double& value, double& ddx,
                          double& ddy) const {
    const Eigen::MatrixXd& plane = planes[static_cast<std::size_t>(p)];
    // Pixel (i, j) holds the value at center (i + 0.5, j + 0.5); clamp to the
    // last interior cell so border samples extend the edge.
    double u = std::clamp(x - 0.5, 0.0, static_cast<double>(width - 1));
    double v = std::clamp(y - 0.5, 0.0, static_cast<double>(height - 1));
    const int i = std::min(static_cast<int>(u), width - 2);
    const int j = std::min(static_cast<int>(v), height - 2);
    const double a = u - i;
    const double b = v - j;
    const double p00 = plane(j, i), p01 = plane(j, i + 1);
    const double p10 = plane(j + 1, i), p11 = plane(j + 1, i + 1);
    value = (1 - a) * (1 - b) * p00 + a * (1 - b) * p01 + (1 - a) * b * p10 + a * b * p11;
    ddx = (1 - b) * (p01 - p00) + b * (p11 - p10);
    ddy = (1 - a) * (p10 - p00) + a * (p11 - p01);
}

FeatureImage make_feature_image(const Image& image, FeatureFn fn) {
    image.validate();
    FeatureImage f;
    f.width = image.width;
    f.height = image.height;
    std::vector<Eigen::MatrixXd> channels(3, Eigen::MatrixXd(image.height, image.width));
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < 3; ++c) channels[static_cast<std::size_t>(c)](y, x) = image.at(x, y, c);

    if (fn == FeatureFn::RawRgb) {
        f.planes = std::move(channels);
        return f;
    }
    // Central-difference gradients, edges clamped.
    for (int axis = 0; axis < 2; ++axis) {
        for (int c = 0; c < 3; ++c) {
            Eigen::MatrixXd g(image.height, image.width);
            const auto& ch = channels[static_cast<std::size_t>(c)];
            for (int y = 0; y < image.height; ++y) {
                for (int x = 0; x < image.width; ++x) {
                    if (axis == 0) {
                        const int x0 = std::max(x - 1, 0), x1 = std::min(x + 1, image.width - 1);
                        g(y, x) = (ch(y, x1) - ch(y, x0)) / 2.0;
                    } else {
                        const int y0 = std::max(y - 1, 0), y1 = std::min(y + 1, image.height - 1);
                        g(y, x) = (ch(y1, x) - ch(y0, x)) / 2.0;
                    }
                }
            }
            f.planes.push_back(std::move(g));
        }
    }
    return f;
}

namespace {

struct ThetaView {
    // theta = [p (n_s), f, q1, q2, q3, tx, ty, tz]
    static Eigen::VectorXd pack(const Eigen::VectorXd& p, const CameraParams& cam) {
        Eigen::VectorXd theta(p.size() + 7);
        theta.head(p.size()) = p;
        theta(p.size()) = cam.f;
        theta.segment<3>(p.size() + 1) = cam.q;
        theta.segment<3>(p.size() + 4) = cam.t;
        return theta;
    }
    static void unpack(const Eigen::VectorXd& theta, Eigen::Index n_s, Eigen::VectorXd& p,
                       CameraParams& cam) {
        p = theta.head(n_s);
        cam.f = theta(n_s);
        cam.q = theta.segment<3>(n_s + 1);
        cam.t = theta.segment<3>(n_s + 4);
    }
};

} // namespace

FitLinearization linearize_fit(const FeatureImage& features, const Landmarks2D& landmarks,
                               const LinearModel& shape_model, const LinearModel& texture_model,
                               const Eigen::VectorXd& p, const CameraParams& cam,
                               const std::vector<bool>& visibility) {
    const Eigen::Index n = shape_model.dim() / 3;
    const Eigen::Index n_s = shape_model.components();
    const int kf = static_cast<int>(features.planes.size());
    if (texture_model.dim() != kf * n)
        throw DataError("texture model dimension does not match feature function");

    const Eigen::VectorXd shape = shape_model.instance(p);
    Eigen::Index visible = 0;
    for (bool v : visibility) visible += v;

    FitLinearization lin;
    lin.pixel_residual.resize(kf * visible);
    lin.pixel_jacobian.resize(kf * visible, n_s + 7);
    lin.texture_basis.resize(kf * visible, texture_model.components());

    Eigen::Index row = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!visibility[static_cast<std::size_t>(i)]) continue;
        const Vec3 vertex = shape.segment<3>(3 * i);
        const ProjectionJacobian pj = project_with_jacobian(vertex, cam);
        const Eigen::Matrix<double, 2, Eigen::Dynamic> d_pix_dp =
            pj.d_vertex * shape_model.basis.block(3 * i, 0, 3, n_s);

        for (int c = 0; c < kf; ++c) {
            double val, gx, gy;
            features.sample(c, pj.pixel.x(), pj.pixel.y(), val, gx, gy);
            lin.pixel_residual(row) = val - texture_model.mean(c * n + i);
            const Eigen::RowVector2d grad(gx, gy);
            lin.pixel_jacobian.row(row).head(n_s) = grad * d_pix_dp;
            lin.pixel_jacobian.row(row).tail<7>() = grad * pj.d_cam;
            lin.texture_basis.row(row) = texture_model.basis.row(c * n + i);
            ++row;
        }
    }

    lin.landmark_residual.resize(136);
    lin.landmark_jacobian.resize(136, n_s + 7);
    for (int l = 0; l < 68; ++l) {
        const Eigen::Index vi = landmarks.vertex_map[static_cast<std::size_t>(l)];
        const Vec3 vertex = shape.segment<3>(3 * vi);
        const ProjectionJacobian pj = project_with_jacobian(vertex, cam);
        const Eigen::Matrix<double, 2, Eigen::Dynamic> d_pix_dp =
            pj.d_vertex * shape_model.basis.block(3 * vi, 0, 3, n_s);
        lin.landmark_residual.segment<2>(2 * l) = pj.pixel - landmarks.points.row(l).transpose();
        lin.landmark_jacobian.block(2 * l, 0, 2, n_s) = d_pix_dp;
        lin.landmark_jacobian.block<2, 7>(2 * l, n_s) = pj.d_cam;
    }
    return lin;
}

CameraParams init_camera_from_landmarks(const LinearModel& shape_model,
                                        const Landmarks2D& landmarks, int image_width,
                                        int image_height) {
    const Eigen::Index n = shape_model.dim() / 3;
    landmarks.validate(n);

    Eigen::Matrix<double, 68, 2> model_xy;
    Eigen::Matrix<double, 68, 3> model_pts;
    for (int l = 0; l < 68; ++l) {
        const Eigen::Index vi = landmarks.vertex_map[static_cast<std::size_t>(l)];
        model_pts.row(l) = shape_model.mean.segment<3>(3 * vi).transpose();
        model_xy.row(l) = model_pts.row(l).head<2>();
    }

    // 2D similarity (scale, z-rotation, translation) from model landmark x/y
    // to image landmarks.
    const Eigen::RowVector2d mc = model_xy.colwise().mean();
    const Eigen::RowVector2d ic = landmarks.points.colwise().mean();
    const Eigen::Matrix<double, 68, 2> mx = model_xy.rowwise() - mc;
    const Eigen::Matrix<double, 68, 2> ix = landmarks.points.rowwise() - ic;
    double a = 0, b = 0, denom = 0;
    for (int l = 0; l < 68; ++l) {
        a += mx(l, 0) * ix(l, 0) + mx(l, 1) * ix(l, 1);
        b += mx(l, 0) * ix(l, 1) - mx(l, 1) * ix(l, 0);
        denom += mx.row(l).squaredNorm();
    }
    if (denom <= 0) throw DataError("degenerate model landmarks");
    const double theta = std::atan2(b, a);
    const double scale = std::sqrt(a * a + b * b) / denom; // pixels per model unit

    Eigen::Vector3d lo = model_pts.colwise().minCoeff();
    Eigen::Vector3d hi = model_pts.colwise().maxCoeff();
    const double diag = (hi - lo).norm();

    CameraParams cam;
    cam.principal_point = Vec2(image_width / 2.0, image_height / 2.0);
    cam.q = Vec3(0, 0, std::sin(theta / 2.0));
    const double tz = 10.0 * diag;
    cam.f = scale * tz;

    const Mat3 rot = quaternion_rotation(cam.q);
    const Vec3 c3 = rot * Vec3(mc.x(), mc.y(), model_pts.col(2).mean());
    cam.t.z() = tz - c3.z();
    cam.t.x() = (ic.x() - cam.principal_point.x()) * tz / cam.f - c3.x();
    cam.t.y() = (ic.y() - cam.principal_point.y()) * tz / cam.f - c3.y();
    return cam;
}

namespace {

struct CostTerms {
    double pixel;    // e^T P e (texture projected out at the ridge optimum)
    double landmark; // c_l ||r_l||^2
    double prior;    // c_s p^T Sigma_s^-1 p
    double total() const { return pixel + landmark + prior; }
};

CostTerms evaluate_cost(const FitLinearization& lin, const Eigen::VectorXd& p,
                        const LinearModel& shape_model, const LinearModel& texture_model,
                        const FitConfig& cfg, Eigen::VectorXd* lambda_out = nullptr) {
    // Ridge-projected pixel term: min_l ||e - U l||^2 + c_t l' S^-1 l
    //                           = e' e - (U' e)' A^-1 (U' e),  A = U'U + c_t S^-1.
    const Eigen::MatrixXd& u = lin.texture_basis;
    Eigen::MatrixXd ridge = (u.transpose() * u).eval();
    ridge.diagonal() += cfg.texture_weight * texture_model.eigenvalues.cwiseInverse();
    const Eigen::LDLT<Eigen::MatrixXd> a_fact(ridge);
    const Eigen::VectorXd ue = u.transpose() * lin.pixel_residual;
    const Eigen::VectorXd lambda = a_fact.solve(ue);
    if (lambda_out) *lambda_out = lambda;

    CostTerms terms{};
    terms.pixel = lin.pixel_residual.squaredNorm() - ue.dot(lambda);
    terms.landmark = cfg.landmark_weight * lin.landmark_residual.squaredNorm();
    terms.prior = cfg.shape_weight *
                  p.cwiseQuotient(shape_model.eigenvalues).dot(p);
    return terms;
}

} // namespace

FittingResult fit_3dmm(const Image& image, const Landmarks2D& landmarks,
                       const LinearModel& shape_model, const LinearModel& texture_model,
                       const FitConfig& cfg,
                       std::optional<std::pair<Eigen::VectorXd, CameraParams>> init,
                       const Eigen::MatrixX3i* triangles) {
    image.validate();
    shape_model.validate();
    texture_model.validate();
    const Eigen::Index n = shape_model.dim() / 3;
    const Eigen::Index n_s = shape_model.components();
    landmarks.validate(n);
    if (shape_model.topology_hash != 0 && texture_model.topology_hash != 0 &&
        shape_model.topology_hash != texture_model.topology_hash)
        throw DataError("shape and texture models were built for different topologies");

    const FeatureImage features = make_feature_image(image, cfg.feature_fn);

    Eigen::VectorXd p = Eigen::VectorXd::Zero(n_s);
    CameraParams cam;
    if (init) {
        p = init->first;
        cam = init->second;
        if (p.size() != n_s) throw DataError("init shape coefficients have wrong length");
    } else {
        cam = init_camera_from_landmarks(shape_model, landmarks, image.width, image.height);
    }

    auto compute_visibility = [&](const Eigen::VectorXd& coeffs, const CameraParams& camera) {
        const Eigen::VectorXd shape = shape_model.instance(coeffs);
        if (triangles) {
            TriMesh mesh;
            mesh.vertices = TriMesh::unflatten(shape);
            mesh.triangles = *triangles;
            return vertex_visibility(mesh, camera, image.width, image.height);
        }
        // No triangulation available: point-splat depth test. Each projected
        // vertex splats its depth over a neighborhood sized to the average
        // vertex spacing; vertices within a fraction of the mesh depth span
        // of the local minimum count as visible.
        const Mat3 rot = quaternion_rotation(camera.q);
        std::vector<bool> vis(static_cast<std::size_t>(n), false);
        Eigen::MatrixXd zbuf = Eigen::MatrixXd::Constant(
            image.height, image.width, std::numeric_limits<double>::infinity());
        Eigen::MatrixX3d view(n, 3);
        Eigen::MatrixX2d screen(n, 2);
        double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Vec3 v = rot * shape.segment<3>(3 * i) + camera.t;
            view.row(i) = v.transpose();
            if (v.z() <= 0) continue;
            screen(i, 0) = camera.principal_point.x() + camera.f * v.x() / v.z();
            screen(i, 1) = camera.principal_point.y() + camera.f * v.y() / v.z();
            min_x = std::min(min_x, screen(i, 0));
            max_x = std::max(max_x, screen(i, 0));
            min_y = std::min(min_y, screen(i, 1));
            max_y = std::max(max_y, screen(i, 1));
        }
        const double area = std::max((max_x - min_x) * (max_y - min_y), 1.0);
        const int radius = std::max(1, static_cast<int>(std::ceil(
                                            std::sqrt(area / static_cast<double>(n)))));
        for (Eigen::Index i = 0; i < n; ++i) {
            if (view(i, 2) <= 0) continue;
            const int px = static_cast<int>(std::floor(screen(i, 0)));
            const int py = static_cast<int>(std::floor(screen(i, 1)));
            for (int dy = -radius; dy <= radius; ++dy)
                for (int dx = -radius; dx <= radius; ++dx) {
                    const int qx = px + dx, qy = py + dy;
                    if (qx < 0 || qy < 0 || qx >= image.width || qy >= image.height) continue;
                    zbuf(qy, qx) = std::min(zbuf(qy, qx), view(i, 2));
                }
        }
        const double depth_span = view.col(2).maxCoeff() - view.col(2).minCoeff();
        const double tol = std::max(0.1 * depth_span, 1e-9);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (view(i, 2) <= 0) continue;
            const int px = static_cast<int>(std::floor(screen(i, 0)));
            const int py = static_cast<int>(std::floor(screen(i, 1)));
            if (px < 0 || py < 0 || px >= image.width || py >= image.height) continue;
            if (view(i, 2) <= zbuf(py, px) + tol) vis[static_cast<std::size_t>(i)] = true;
        }
        return vis;
    };

    std::vector<bool> visibility = compute_visibility(p, cam);
    if (std::none_of(visibility.begin(), visibility.end(), [](bool v) { return v; }))
        throw DataError("fit degenerate: no visible vertices at initialization");

    FittingResult result;
    FitLinearization lin = linearize_fit(features, landmarks, shape_model, texture_model, p, cam,
                                         visibility);
    CostTerms cost = evaluate_cost(lin, p, shape_model, texture_model, cfg);
    if (!std::isfinite(cost.total()))
        throw NumericalError("non-finite fitting cost at initialization");
    result.cost_trace.push_back(cost.total());

    const Eigen::VectorXd sigma_s_inv = shape_model.eigenvalues.cwiseInverse();

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        if (iter > 0 && cfg.visibility_refresh > 0 && iter % cfg.visibility_refresh == 0) {
            const std::vector<bool> fresh = compute_visibility(p, cam);
            const FitLinearization fresh_lin = linearize_fit(features, landmarks, shape_model,
                                                             texture_model, p, cam, fresh);
            const CostTerms fresh_cost =
                evaluate_cost(fresh_lin, p, shape_model, texture_model, cfg);
            // Adopt the refreshed visibility only when it keeps the recorded
            // trace monotone; a stale set is preferable to a cost jump.
            if (fresh_cost.total() <= result.cost_trace.back()) {
                visibility = fresh;
                lin = fresh_lin;
                cost = fresh_cost;
            }
        }

        // Normal equations with the texture subspace projected out of the
        // pixel term: H = J'PJ + c_l Jl'Jl + c_s S^-1, g = J'Pe + ...
        const Eigen::MatrixXd& u = lin.texture_basis;
        Eigen::MatrixXd ridge = (u.transpose() * u).eval();
        ridge.diagonal() += cfg.texture_weight * texture_model.eigenvalues.cwiseInverse();
        const Eigen::LDLT<Eigen::MatrixXd> a_fact(ridge);
        const Eigen::MatrixXd uj = u.transpose() * lin.pixel_jacobian;
        const Eigen::VectorXd ue = u.transpose() * lin.pixel_residual;

        Eigen::MatrixXd h = lin.pixel_jacobian.transpose() * lin.pixel_jacobian -
                            uj.transpose() * a_fact.solve(uj);
        Eigen::VectorXd g = lin.pixel_jacobian.transpose() * lin.pixel_residual -
                            uj.transpose() * a_fact.solve(ue);
        h += cfg.landmark_weight * lin.landmark_jacobian.transpose() * lin.landmark_jacobian;
        g += cfg.landmark_weight * lin.landmark_jacobian.transpose() * lin.landmark_residual;
        h.topLeftCorner(n_s, n_s) += (cfg.shape_weight * sigma_s_inv).asDiagonal();
        g.head(n_s) += cfg.shape_weight * sigma_s_inv.cwiseProduct(p);

        const Eigen::VectorXd step = -Eigen::LDLT<Eigen::MatrixXd>(h).solve(g);
        if (!step.allFinite())
            throw NumericalError("non-finite Gauss-Newton step at iteration " +
                                 std::to_string(iter));

        const Eigen::VectorXd theta0 = ThetaView::pack(p, cam);
        bool accepted = false;
        double alpha = 1.0;
        for (int halving = 0; halving <= 10; ++halving, alpha *= 0.5) {
            Eigen::VectorXd p_try;
            CameraParams cam_try = cam;
            ThetaView::unpack(theta0 + alpha * step, n_s, p_try, cam_try);
            if (!(cam_try.f > 0) || cam_try.q.squaredNorm() >= 1.0) continue;
            bool behind = false;
            FitLinearization lin_try;
            try {
                lin_try = linearize_fit(features, landmarks, shape_model, texture_model, p_try,
                                        cam_try, visibility);
            } catch (const NumericalError&) {
                behind = true; // vertex moved behind the camera; shrink the step
            }
            if (behind) continue;
            const CostTerms cost_try =
                evaluate_cost(lin_try, p_try, shape_model, texture_model, cfg);
            if (!std::isfinite(cost_try.total())) continue;
            if (cost_try.total() < cost.total()) {
                p = p_try;
                cam = cam_try;
                lin = std::move(lin_try);
                const double prev = cost.total();
                cost = cost_try;
                result.cost_trace.push_back(cost.total());
                ++result.accepted_steps;
                accepted = true;
                if ((prev - cost.total()) / std::max(prev, 1e-300) < cfg.cost_rel_tol) {
                    result.converged = true;
                    result.stop_reason = "cost_rel_tol";
                }
                break;
            }
        }
        if (!accepted) {
            result.converged = true;
            result.stop_reason = "no_decrease";
            break;
        }
        const double lm_rms = std::sqrt(lin.landmark_residual.squaredNorm() / 68.0);
        if (lm_rms < cfg.landmark_rms_tol) {
            result.converged = true;
            result.stop_reason = "landmark_rms_tol";
        }
        if (result.converged) break;
    }
    if (!result.converged) result.stop_reason = "max_iters";

    Eigen::VectorXd lambda;
    evaluate_cost(lin, p, shape_model, texture_model, cfg, &lambda);

    result.shape_coeffs = p;
    result.texture_coeffs = lambda;
    result.camera = cam;
    result.visibility = visibility;
    result.landmark_rms = std::sqrt(lin.landmark_residual.squaredNorm() / 68.0);
    const Eigen::VectorXd final_residual = lin.pixel_residual - lin.texture_basis * lambda;
    result.pixel_rms = final_residual.size() > 0
                           ? std::sqrt(final_residual.squaredNorm() / final_residual.size())
                           : 0.0;

    // Raw RGB texture from the image at the fitted geometry; invisible
    // vertices take the texture-model reconstruction when features are RGB.
    const Eigen::VectorXd shape = shape_model.instance(p);
    Eigen::MatrixX3d fallback(n, 3);
    if (cfg.feature_fn == FeatureFn::RawRgb) {
        const Eigen::VectorXd tex = texture_model.instance(lambda);
        for (Eigen::Index i = 0; i < n; ++i)
            for (int c = 0; c < 3; ++c) fallback(i, c) = std::clamp(tex(c * n + i), 0.0, 1.0);
    } else {
        fallback.setConstant(0.5);
    }
    const FeatureImage rgb = make_feature_image(image, FeatureFn::RawRgb);
    const Mat3 rot = quaternion_rotation(cam.q);
    result.sampled_texture.resize(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
        bool ok = visibility[static_cast<std::size_t>(i)];
        const Vec3 v = rot * shape.segment<3>(3 * i) + cam.t;
        if (ok && v.z() > 0) {
            const double sx = cam.principal_point.x() + cam.f * v.x() / v.z();
            const double sy = cam.principal_point.y() + cam.f * v.y() / v.z();
            if (image.contains(sx, sy)) {
                for (int c = 0; c < 3; ++c) {
                    double val, gx, gy;
                    rgb.sample(c, sx, sy, val, gx, gy);
                    result.sampled_texture(i, c) = std::clamp(val, 0.0, 1.0);
                }
                continue;
            }
        }
        result.sampled_texture.row(i) = fallback.row(i);
    }
    return result;
}

SampledTexture sample_texture(const Image& image, const Eigen::MatrixX3d& vertices,
                              const CameraParams& cam, const Eigen::MatrixX3i& triangles,
                              const Eigen::MatrixX3d* fallback_colors) {
    image.validate();
    cam.validate();
    const Eigen::Index n = vertices.rows();
    if (fallback_colors && fallback_colors->rows() != n)
        throw DataError("fallback color count does not match vertex count");

    TriMesh mesh;
    mesh.vertices = vertices;
    mesh.triangles = triangles;
    mesh.validate();

    SampledTexture out;
    out.visibility = vertex_visibility(mesh, cam, image.width, image.height);
    out.colors.resize(n, 3);

    const FeatureImage rgb = make_feature_image(image, FeatureFn::RawRgb);
    const Mat3 rot = quaternion_rotation(cam.q);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Vec3 v = rot * vertices.row(i).transpose() + cam.t;
        bool sampled = false;
        if (out.visibility[static_cast<std::size_t>(i)] && v.z() > 0) {
            const double sx = cam.principal_point.x() + cam.f * v.x() / v.z();
            const double sy = cam.principal_point.y() + cam.f * v.y() / v.z();
            if (image.contains(sx, sy)) {
                for (int c = 0; c < 3; ++c) {
                    double val, gx, gy;
                    rgb.sample(c, sx, sy, val, gx, gy);
                    out.colors(i, c) = std::clamp(val, 0.0, 1.0);
                }
                sampled = true;
            } else {
                out.visibility[static_cast<std::size_t>(i)] = false;
            }
        }
        if (!sampled) {
            if (fallback_colors)
                out.colors.row(i) = fallback_colors->row(i);
            else
                out.colors.row(i).setConstant(0.5);
        }
    }
    return out;
}

} // namespace facesyn
