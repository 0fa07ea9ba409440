#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "facesyn/render.hpp"
#include "facesyn/rng.hpp"
#include "facesyn/testbed.hpp"

#include <set>

using namespace facesyn;
using namespace facesyn::testbed;

TEST_CASE("zero expression parameters give the neutral face") {
    const TriMesh neutral = make_face(42, ExprParams{});
    const TriMesh same = make_face(42, ExprParams{});
    CHECK((neutral.vertices - same.vertices).cwiseAbs().maxCoeff() == 0.0);
    CHECK(expression_deformation(ExprParams{}).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("same seed is bitwise reproducible, different seeds differ") {
    ExprParams e;
    e.mouth_open = 0.5;
    const TriMesh a = make_face(7, e);
    const TriMesh b = make_face(7, e);
    CHECK(a.vertices == b.vertices);
    const TriMesh c = make_face(8, e);
    CHECK((a.vertices - c.vertices).cwiseAbs().maxCoeff() > 1e-4);
}

TEST_CASE("doubling bump magnitudes exactly doubles the deformation field") {
    ExprParams e;
    e.mouth_corner = 0.4;
    e.brow_raise = 0.3;
    e.eye_open = -0.2;
    ExprParams e2 = e;
    e2.mouth_corner *= 2;
    e2.brow_raise *= 2;
    e2.eye_open *= 2;
    const Eigen::VectorXd d1 = expression_deformation(e);
    const Eigen::VectorXd d2 = expression_deformation(e2);
    CHECK((d2 - 2.0 * d1).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("published VA law") {
    CHECK(ground_truth_va(ExprParams{}) == Vec2(0, 0));

    ExprParams smile;
    smile.mouth_corner = 1.0;
    CHECK(ground_truth_va(smile) == Vec2(1, 0));

    ExprParams e;
    e.mouth_corner = 0.5;
    e.brow_furrow = 0.2;
    e.mouth_open = 0.6;
    e.eye_open = 0.2;
    e.brow_raise = 0.5;
    const Vec2 va = ground_truth_va(e);
    CHECK(va.x() == doctest::Approx(0.3));
    CHECK(va.y() == doctest::Approx(0.5 * 0.6 + 0.5 * 0.2 + 0.3 * 0.5));

    ExprParams extreme;
    extreme.mouth_corner = 3.0;
    CHECK(ground_truth_va(extreme).x() == 1.0); // clamped
}

TEST_CASE("canonical params invert the law") {
    Xoshiro256pp rng(3);
    for (int i = 0; i < 20; ++i) {
        const double v = rng.uniform(-1, 1), a = rng.uniform(-1, 1);
        const Vec2 va = ground_truth_va(canonical_params(v, a));
        CHECK(va.x() == doctest::Approx(v).epsilon(1e-12));
        CHECK(va.y() == doctest::Approx(a).epsilon(1e-12));
    }
}

TEST_CASE("landmark vertices are 68 distinct valid indices") {
    const Topology topo;
    const auto lm = landmark_vertices(topo);
    std::set<int> unique(lm.begin(), lm.end());
    CHECK(unique.size() == 68);
    for (int v : lm) {
        CHECK(v >= 0);
        CHECK(v < topo.vertex_count());
    }
}

TEST_CASE("ground truth landmarks project the fixed vertices") {
    const TriMesh face = make_face(5, ExprParams{});
    const CameraParams cam = default_camera(128, 128);
    const Landmarks2D lm = ground_truth_landmarks(face, cam);
    const auto idx = landmark_vertices(Topology{});
    for (int i = 0; i < 68; ++i) {
        Eigen::MatrixX3d v(1, 3);
        v.row(0) = face.vertices.row(idx[static_cast<std::size_t>(i)]);
        const Eigen::MatrixX2d px = project(v, cam);
        CHECK((px.row(0).transpose() - lm.points.row(i).transpose()).norm() < 1e-12);
    }
}

TEST_CASE("default camera faces the head and covers a sensible area") {
    const TriMesh face = make_face(1, ExprParams{});
    const CameraParams cam = default_camera(128, 128);
    const Eigen::MatrixX3d colors = make_texture(1);
    const RenderOutput out = rasterize(face, colors, cam, Image(128, 128, 0.0));
    const double coverage = static_cast<double>(out.mask.count()) / (128.0 * 128.0);
    CHECK(coverage > 0.1);
    CHECK(coverage < 0.7);
}

TEST_CASE("landmarks land on the rendered face") {
    const TriMesh face = make_face(2, ExprParams{});
    const CameraParams cam = default_camera(160, 160);
    const Landmarks2D lm = ground_truth_landmarks(face, cam);
    const Eigen::MatrixX3d colors = make_texture(2);
    const RenderOutput out = rasterize(face, colors, cam, Image(160, 160, 0.0));
    int on_face = 0;
    for (int i = 0; i < 68; ++i) {
        const int x = static_cast<int>(lm.points(i, 0));
        const int y = static_cast<int>(lm.points(i, 1));
        if (x >= 0 && y >= 0 && x < 160 && y < 160 && out.mask.at(x, y)) ++on_face;
    }
    CHECK(on_face == 68);
}

TEST_CASE("expression bumps move the mesh where expected") {
    const Topology topo;
    ExprParams open_mouth;
    open_mouth.mouth_open = 1.0;
    const Eigen::VectorXd d = expression_deformation(open_mouth, topo);
    // Mouth-opening moves points downward (+y) near the lower front face.
    const Eigen::MatrixX3d base = make_face(0, ExprParams{}, topo, 0.0).vertices;
    double max_dy = 0;
    Eigen::Index argmax = 0;
    for (Eigen::Index i = 0; i < base.rows(); ++i) {
        if (d(3 * i + 1) > max_dy) {
            max_dy = d(3 * i + 1);
            argmax = i;
        }
    }
    CHECK(max_dy > 0.05);
    CHECK(base(argmax, 1) > 0);  // below the center line
    CHECK(base(argmax, 2) < 0);  // on the front
}

TEST_CASE("dataset generation is reproducible and annotations obey the law") {
    const Topology topo{.rings = 10, .segments = 10};
    const Dataset a = make_dataset(3, 5, 1234, 2, topo);
    const Dataset b = make_dataset(3, 5, 1234, 2, topo);
    CHECK(a.annotations.size() == 15);
    REQUIRE(a.annotations.size() == b.annotations.size());
    for (std::size_t i = 0; i < a.annotations.size(); ++i) {
        CHECK(a.annotations[i].valence == b.annotations[i].valence);
        CHECK(a.annotations[i].mesh_id == b.annotations[i].mesh_id);
        const auto& ma = a.meshes_by_id.at(a.annotations[i].mesh_id);
        const auto& mb = b.meshes_by_id.at(b.annotations[i].mesh_id);
        CHECK((ma - mb).cwiseAbs().maxCoeff() == 0.0);
    }
    for (const auto& label : kBasicExpressionLabels)
        CHECK(a.labeled_expressions.at(label).size() == 2);
}

TEST_CASE("mean labeled expression approximates the canonical deformation") {
    const Topology topo{.rings = 14, .segments = 14};
    const Dataset ds = make_dataset(10, 1, 555, 16, topo, 0.01);
    const Eigen::VectorXd joy_canon =
        expression_deformation(basic_expression_params("joy"), topo);

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(ds.template_shape.size());
    for (const auto& m : ds.labeled_expressions.at("joy")) mean += m;
    mean = mean / 16.0 - ds.template_shape;

    const double cos_sim = mean.dot(joy_canon) / (mean.norm() * joy_canon.norm());
    CHECK(cos_sim > 0.9);
}
