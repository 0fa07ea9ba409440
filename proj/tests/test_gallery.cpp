#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "facesyn/errors.hpp"
#include "facesyn/gallery.hpp"
#include "facesyn/rng.hpp"
#include "facesyn/testbed.hpp"
#include "oracles.hpp"

#include <filesystem>

using namespace facesyn;

namespace {

Eigen::MatrixX2d random_points(Xoshiro256pp& rng, int n) {
    Eigen::MatrixX2d p(n, 2);
    for (int i = 0; i < n; ++i) p.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1);
    return p;
}

} // namespace

TEST_CASE("K = N gives singleton clusters at the points") {
    Xoshiro256pp rng(1);
    const Eigen::MatrixX2d pts = random_points(rng, 7);
    const WardClustering c = ward_cluster(pts, 7);
    CHECK(c.merges.empty());
    for (int i = 0; i < 7; ++i) {
        CHECK(c.assignments[static_cast<std::size_t>(i)] == i);
        CHECK((c.centroids.row(i) - pts.row(i)).norm() == 0.0);
    }
}

TEST_CASE("well-separated groups split exactly at K = 2") {
    Xoshiro256pp rng(2);
    Eigen::MatrixX2d pts(20, 2);
    for (int i = 0; i < 10; ++i) pts.row(i) << -0.5 + rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01);
    for (int i = 10; i < 20; ++i) pts.row(i) << 0.5 + rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01);

    const WardClustering c = ward_cluster(pts, 2);
    for (int i = 1; i < 10; ++i) CHECK(c.assignments[static_cast<std::size_t>(i)] == c.assignments[0]);
    for (int i = 11; i < 20; ++i) CHECK(c.assignments[static_cast<std::size_t>(i)] == c.assignments[10]);
    CHECK(c.assignments[0] != c.assignments[10]);
}

TEST_CASE("merge sequence matches the brute-force minimal-increase oracle") {
    Xoshiro256pp rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 12;
        const int k = 1 + static_cast<int>(rng.next_u64() % 11);
        const Eigen::MatrixX2d pts = random_points(rng, n);
        const WardClustering c = ward_cluster(pts, k);
        const auto expected = oracles::ward_merges_brute(pts, k);
        REQUIRE(c.merges.size() == expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i) {
            CHECK(c.merges[i].first == expected[i].first);
            CHECK(c.merges[i].second == expected[i].second);
        }
    }
}

TEST_CASE("total within-cluster variance is non-increasing in K") {
    Xoshiro256pp rng(4);
    const Eigen::MatrixX2d pts = random_points(rng, 40);
    auto wcss = [&](int k) {
        const WardClustering c = ward_cluster(pts, k);
        double s = 0;
        for (int i = 0; i < 40; ++i)
            s += (pts.row(i) - c.centroids.row(c.assignments[static_cast<std::size_t>(i)]))
                     .squaredNorm();
        return s;
    };
    for (int k = 2; k <= 8; ++k) CHECK(wcss(k) <= wcss(k - 1) + 1e-12);
}

TEST_CASE("ward K out of range throws") {
    Xoshiro256pp rng(5);
    const Eigen::MatrixX2d pts = random_points(rng, 5);
    CHECK_THROWS_AS(ward_cluster(pts, 0), DataError);
    CHECK_THROWS_AS(ward_cluster(pts, 6), DataError);
}

namespace {

// Tiny synthetic gallery setup shared by the query tests.
struct GallerySetup {
    AffectGallery gallery;
    std::map<std::string, Eigen::VectorXd> meshes;
    Eigen::VectorXd templ;
};

GallerySetup make_setup(int n_points, int k, std::uint64_t seed) {
    GallerySetup s;
    Xoshiro256pp rng(seed);
    s.templ = Eigen::VectorXd::Zero(12);
    std::vector<VAAnnotation> annotations;
    for (int i = 0; i < n_points; ++i) {
        const std::string id = "m" + std::to_string(i);
        const double v = rng.uniform(-1, 1), a = rng.uniform(-1, 1);
        // Deformation encodes the VA pair so cluster means are predictable.
        Eigen::VectorXd mesh = Eigen::VectorXd::Zero(12);
        mesh(0) = v;
        mesh(1) = a;
        s.meshes[id] = mesh;
        annotations.push_back({v, a, id});
    }
    s.gallery = build_gallery(annotations, s.meshes, s.templ, k);
    return s;
}

} // namespace

TEST_CASE("build_gallery: meshes equal to the template give zero deformations") {
    std::map<std::string, Eigen::VectorXd> meshes;
    Eigen::VectorXd templ = Eigen::VectorXd::Constant(9, 2.0);
    std::vector<VAAnnotation> ann;
    for (int i = 0; i < 6; ++i) {
        const std::string id = "m" + std::to_string(i);
        meshes[id] = templ;
        ann.push_back({i / 10.0, -i / 10.0, id});
    }
    const AffectGallery g = build_gallery(ann, meshes, templ, 3);
    for (const auto& c : g.clusters) CHECK(c.mean_deformation.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("build_gallery: symmetric pair cancels to zero deformation") {
    Eigen::VectorXd templ = Eigen::VectorXd::Zero(6);
    Eigen::VectorXd d(6);
    d << 1, -2, 3, -4, 5, -6;
    std::map<std::string, Eigen::VectorXd> meshes{{"a", templ + d}, {"b", templ - d}};
    const std::vector<VAAnnotation> ann{{0.5, 0.5, "a"}, {0.5, 0.5, "b"}};
    const AffectGallery g = build_gallery(ann, meshes, templ, 1);
    CHECK(g.clusters[0].mean_deformation.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("build_gallery rejects unknown mesh ids and out-of-range VA") {
    Eigen::VectorXd templ = Eigen::VectorXd::Zero(3);
    std::map<std::string, Eigen::VectorXd> meshes{{"a", templ}};
    CHECK_THROWS_AS(build_gallery({{0.1, 0.1, "missing"}}, meshes, templ, 1), DataError);
    CHECK_THROWS_AS(build_gallery({{1.5, 0.0, "a"}}, meshes, templ, 1), DataError);
}

TEST_CASE("build_gallery is invariant to annotation order") {
    Xoshiro256pp rng(6);
    GallerySetup s = make_setup(30, 5, 77);

    // Rebuild with shuffled annotations (same data).
    std::vector<VAAnnotation> ann;
    for (const auto& [id, mesh] : s.meshes) ann.push_back({mesh(0), mesh(1), id});
    // map iteration is sorted by id string, a different order than insertion
    const AffectGallery g2 = build_gallery(ann, s.meshes, s.templ, 5);

    REQUIRE(g2.clusters.size() == s.gallery.clusters.size());
    // Same centroid set (possibly same order, by the deterministic id rule).
    for (std::size_t i = 0; i < g2.clusters.size(); ++i) {
        double best = 1e9;
        for (std::size_t j = 0; j < g2.clusters.size(); ++j)
            best = std::min(best,
                            (g2.clusters[i].centroid_va - s.gallery.clusters[j].centroid_va).norm());
        CHECK(best < 1e-12);
    }
}

TEST_CASE("query_va at a centroid returns that cluster; ties go to the lowest index") {
    GallerySetup s = make_setup(25, 4, 11);
    for (std::size_t i = 0; i < s.gallery.clusters.size(); ++i) {
        const Vec2 c = s.gallery.clusters[i].centroid_va;
        CHECK(query_va(s.gallery, c.x(), c.y()) == static_cast<int>(i));
    }

    // Artificial gallery with two equidistant clusters.
    AffectGallery g;
    g.template_shape = Eigen::VectorXd::Zero(3);
    for (int i = 0; i < 4; ++i) {
        AffectGallery::Cluster c;
        c.centroid_va = Vec2(i % 2 == 0 ? -0.5 : 0.5, 0.0);
        c.mean_deformation = Eigen::VectorXd::Constant(3, i);
        g.clusters.push_back(c);
    }
    CHECK(query_va(g, 0.0, 0.0) == 0); // equidistant between all; lowest wins
    CHECK_THROWS_AS(query_va(g, 1.2, 0.0), DataError);
}

TEST_CASE("query_va matches a linear-scan oracle") {
    Xoshiro256pp rng(7);
    GallerySetup s = make_setup(60, 9, 13);
    for (int trial = 0; trial < 200; ++trial) {
        const double v = rng.uniform(-1, 1), a = rng.uniform(-1, 1);
        int best = 0;
        double bd = 1e300;
        for (std::size_t i = 0; i < s.gallery.clusters.size(); ++i) {
            const double d = (s.gallery.clusters[i].centroid_va - Vec2(v, a)).squaredNorm();
            if (d < bd) {
                bd = d;
                best = static_cast<int>(i);
            }
        }
        CHECK(query_va(s.gallery, v, a) == best);
    }
}

TEST_CASE("query_va is piecewise constant within the nearest-centroid cell") {
    Xoshiro256pp rng(8);
    GallerySetup s = make_setup(40, 6, 17);
    for (int trial = 0; trial < 50; ++trial) {
        const double v = rng.uniform(-0.9, 0.9), a = rng.uniform(-0.9, 0.9);
        const int c = query_va(s.gallery, v, a);
        // Distance gap to the second nearest centroid.
        double d1 = 1e300, d2 = 1e300;
        for (const auto& cl : s.gallery.clusters) {
            const double d = (cl.centroid_va - Vec2(v, a)).norm();
            if (d < d1) {
                d2 = d1;
                d1 = d;
            } else {
                d2 = std::min(d2, d);
            }
        }
        const double radius = 0.49 * (d2 - d1);
        if (radius <= 0) continue;
        for (int probe = 0; probe < 8; ++probe) {
            const double ang = rng.uniform(0, 2 * M_PI);
            const double pv = std::clamp(v + radius * std::cos(ang), -1.0, 1.0);
            const double pa = std::clamp(a + radius * std::sin(ang), -1.0, 1.0);
            CHECK(query_va(s.gallery, pv, pa) == c);
        }
    }
}

TEST_CASE("query_path: identical points give identical frames") {
    GallerySetup s = make_setup(20, 4, 19);
    const std::vector<Vec2> path{{0.3, 0.3}, {0.3, 0.3}};
    const auto frames = query_path(s.gallery, path, 5);
    REQUIRE(frames.size() == 5);
    for (int f : frames) CHECK(f == frames[0]);
}

TEST_CASE("query_path hits the endpoint clusters with frames = 2") {
    GallerySetup s = make_setup(30, 5, 23);
    const Vec2 c0 = s.gallery.clusters[0].centroid_va;
    const Vec2 c3 = s.gallery.clusters[3].centroid_va;
    const auto frames = query_path(s.gallery, {c0, c3}, 2);
    REQUIRE(frames.size() == 2);
    CHECK(frames[0] == 0);
    CHECK(frames[1] == 3);
}

TEST_CASE("dense path lookups match per-sample brute force") {
    Xoshiro256pp rng(9);
    GallerySetup s = make_setup(50, 5, 29);
    std::vector<Vec2> path;
    for (int i = 0; i < 4; ++i) path.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1));

    const int frames = 37;
    const auto got = query_path(s.gallery, path, frames);

    // Re-derive the resampled points and look each up by brute force.
    std::vector<double> cum{0};
    for (std::size_t i = 1; i < path.size(); ++i)
        cum.push_back(cum.back() + (path[i] - path[i - 1]).norm());
    for (int f = 0; f < frames; ++f) {
        const double target = cum.back() * f / (frames - 1);
        std::size_t seg = 1;
        while (seg + 1 < path.size() && cum[seg] < target) ++seg;
        const double t = (target - cum[seg - 1]) / (cum[seg] - cum[seg - 1]);
        const Vec2 p = path[seg - 1] + t * (path[seg] - path[seg - 1]);
        CHECK(got[static_cast<std::size_t>(f)] ==
              query_va(s.gallery, std::clamp(p.x(), -1.0, 1.0), std::clamp(p.y(), -1.0, 1.0)));
    }
}

TEST_CASE("single-point path behaves as a static request") {
    GallerySetup s = make_setup(20, 3, 31);
    const auto frames = query_path(s.gallery, {Vec2(0.2, -0.4)}, 4);
    REQUIRE(frames.size() == 4);
    const int expected = query_va(s.gallery, 0.2, -0.4);
    for (int f : frames) CHECK(f == expected);
}

TEST_CASE("basic expression faces store and answer by label; unknown label throws") {
    Eigen::VectorXd templ = Eigen::VectorXd::Zero(6);
    std::map<std::string, Eigen::VectorXd> meshes{{"a", templ}};
    std::map<std::string, std::vector<Eigen::VectorXd>> labeled;
    for (int i = 0; i < kBasicExpressionCount; ++i) {
        Eigen::VectorXd m = templ;
        m(0) = i + 1;
        labeled[kBasicExpressionLabels[static_cast<std::size_t>(i)]] = {m};
    }
    const AffectGallery g =
        build_gallery({{0.0, 0.0, "a"}}, meshes, templ, 1, labeled);
    for (int i = 0; i < kBasicExpressionCount; ++i) {
        const auto& d = basic_expression_face(g, kBasicExpressionLabels[static_cast<std::size_t>(i)]);
        CHECK(d(0) == doctest::Approx(i + 1));
    }
    CHECK_THROWS_AS(basic_expression_face(g, "confusion"), DataError);
}

TEST_CASE("gallery container round trip") {
    GallerySetup s = make_setup(24, 4, 37);
    const auto path = std::filesystem::temp_directory_path() / "facesyn_gallery.bin";
    save_gallery(s.gallery, path.string());
    const AffectGallery back = load_gallery(path.string());
    REQUIRE(back.clusters.size() == s.gallery.clusters.size());
    for (std::size_t i = 0; i < back.clusters.size(); ++i) {
        CHECK((back.clusters[i].centroid_va - s.gallery.clusters[i].centroid_va).norm() == 0.0);
        CHECK((back.clusters[i].mean_deformation - s.gallery.clusters[i].mean_deformation)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
    }
    std::filesystem::remove(path);
}

TEST_CASE("testbed gallery reproduces the published VA law at cluster centroids") {
    const testbed::Topology topo{.rings = 16, .segments = 16};
    const auto ds = testbed::make_dataset(16, 40, 99, 4, topo, 0.005);
    const AffectGallery g = build_gallery(ds.annotations, ds.meshes_by_id, ds.template_shape, 8);

    for (const auto& c : g.clusters) {
        const Eigen::VectorXd expected = testbed::expression_deformation(
            testbed::canonical_params(c.centroid_va.x(), c.centroid_va.y()), topo);
        const double rel = (c.mean_deformation - expected).norm() / expected.norm();
        CHECK(rel < 0.15);
    }
}
