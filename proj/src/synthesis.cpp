#include "facesyn/synthesis.hpp"

#include "facesyn/errors.hpp"

namespace facesyn {

Eigen::VectorXd transfer_deformation(const Eigen::VectorXd& s_orig, const Eigen::VectorXd& s_gen,
                                     const Eigen::VectorXd& template_shape) {
    if (s_orig.size() != s_gen.size() || s_orig.size() != template_shape.size())
        throw DataError("transfer_deformation: shapes differ in length");
    return s_orig + (s_gen - template_shape);
}

namespace {

Mask border_cleared(Mask m) {
    for (int x = 0; x < m.width; ++x) {
        m.set(x, 0, false);
        m.set(x, m.height - 1, false);
    }
    for (int y = 0; y < m.height; ++y) {
        m.set(0, y, false);
        m.set(m.width - 1, y, false);
    }
    return m;
}

} // namespace

SynthesisResult synthesize(const Image& image, const Landmarks2D& landmarks,
                           const LinearModel& shape_model, const LinearModel& texture_model,
                           const TriMesh& topology, const AffectGallery& gallery,
                           const AffectRequest& request, const SynthesisConfig& cfg) {
    if (gallery.template_shape.size() != shape_model.dim())
        throw DataError("gallery and shape model disagree on vertex count");
    if (gallery.topology_hash != 0 && shape_model.topology_hash != 0 &&
        gallery.topology_hash != shape_model.topology_hash)
        throw DataError("gallery and shape model were built for different topologies");

    SynthesisResult result;
    result.fit = fit_3dmm(image, landmarks, shape_model, texture_model, cfg.fit, {},
                          &topology.triangles);
    const Eigen::VectorXd fitted_shape = shape_model.instance(result.fit.shape_coeffs);

    // Per-frame work list: gallery deformation + cluster id (-1 for basic).
    std::vector<std::pair<const Eigen::VectorXd*, int>> plan;
    if (const auto* pt = std::get_if<AffectRequest::VaPoint>(&request.request)) {
        const int c = query_va(gallery, pt->valence, pt->arousal);
        plan.emplace_back(&gallery.clusters[static_cast<std::size_t>(c)].mean_deformation, c);
    } else if (const auto* path = std::get_if<AffectRequest::VaPath>(&request.request)) {
        for (int c : query_path(gallery, path->points, path->frames))
            plan.emplace_back(&gallery.clusters[static_cast<std::size_t>(c)].mean_deformation, c);
    } else {
        const auto& basic = std::get<AffectRequest::Basic>(request.request);
        plan.emplace_back(&basic_expression_face(gallery, basic.label), -1);
    }

    for (const auto& [deformation, cluster] : plan) {
        TriMesh mesh = topology;
        mesh.vertices = TriMesh::unflatten(fitted_shape + *deformation);

        const RenderOutput render =
            rasterize(mesh, result.fit.sampled_texture, result.fit.camera, image);
        const Mask blend_mask = border_cleared(erode(render.mask, cfg.mask_erode_px));
        if (blend_mask.count() == 0)
            throw DataError("blend degenerate: render mask empty after erosion");

        const PoissonResult blended =
            poisson_blend(render.image, image, blend_mask, cfg.mixed_gradients);

        SynthesisFrame frame;
        frame.image = blended.image;
        frame.cluster_index = cluster;
        frame.render_mask = render.mask;
        result.frames.push_back(std::move(frame));
    }
    return result;
}

} // namespace facesyn
