#include "facesyn/testbed.hpp"

#include "facesyn/errors.hpp"
#include "facesyn/rng.hpp"

#include <cmath>
#include <numbers>
#include <set>

namespace facesyn {

double Xoshiro256pp::next_normal() {
    const double u1 = std::max(next_double(), 1e-300);
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace testbed {

namespace {

constexpr double kPi = std::numbers::pi;

// Base ellipsoid radii (model units).
constexpr double kRadiusX = 0.8, kRadiusY = 1.0, kRadiusZ = 0.9;

// Unit-sphere direction for grid coordinates. theta in (0, pi) measured from
// the -y pole (top of head); phi = 0 faces -z (the camera).
Vec3 sphere_dir(double theta, double phi) {
    return {std::sin(theta) * std::sin(phi), -std::cos(theta), -std::sin(theta) * std::cos(phi)};
}

struct Bump {
    Vec3 anchor;       // unit direction of the bump center
    Vec3 displacement; // model units at weight 1, parameter 1
    int param;         // index into ExprParams fields
};

constexpr int kParamMouthCorner = 0, kParamMouthOpen = 1, kParamEyeOpen = 2, kParamBrowRaise = 3,
              kParamBrowFurrow = 4;

double param_value(const ExprParams& e, int idx) {
    switch (idx) {
        case kParamMouthCorner: return e.mouth_corner;
        case kParamMouthOpen: return e.mouth_open;
        case kParamEyeOpen: return e.eye_open;
        case kParamBrowRaise: return e.brow_raise;
        default: return e.brow_furrow;
    }
}

// Six bump sites; brow sites carry both the raise and furrow fields.
const std::vector<Bump>& bumps() {
    static const std::vector<Bump> b = [] {
        std::vector<Bump> v;
        const Vec3 mouth_l = sphere_dir(0.62 * kPi, -0.14 * kPi);
        const Vec3 mouth_r = sphere_dir(0.62 * kPi, 0.14 * kPi);
        const Vec3 mouth_c = sphere_dir(0.68 * kPi, 0.0);
        const Vec3 brow_l = sphere_dir(0.36 * kPi, -0.11 * kPi);
        const Vec3 brow_r = sphere_dir(0.36 * kPi, 0.11 * kPi);
        const Vec3 eyes = sphere_dir(0.44 * kPi, 0.0);
        v.push_back({mouth_l, Vec3(-0.10, -0.20, -0.06), kParamMouthCorner});
        v.push_back({mouth_r, Vec3(0.10, -0.20, -0.06), kParamMouthCorner});
        v.push_back({mouth_c, Vec3(0.0, 0.28, -0.04), kParamMouthOpen});
        v.push_back({brow_l, Vec3(0.0, -0.18, -0.04), kParamBrowRaise});
        v.push_back({brow_r, Vec3(0.0, -0.18, -0.04), kParamBrowRaise});
        v.push_back({brow_l, Vec3(0.10, 0.12, -0.06), kParamBrowFurrow});
        v.push_back({brow_r, Vec3(-0.10, 0.12, -0.06), kParamBrowFurrow});
        v.push_back({eyes, Vec3(0.0, -0.12, -0.10), kParamEyeOpen});
        return v;
    }();
    return b;
}

constexpr double kBumpSigma = 0.45; // radians of angular falloff

Eigen::MatrixX3d base_positions(const Topology& topo) {
    Eigen::MatrixX3d pos(topo.vertex_count(), 3);
    pos.row(0) = (Vec3(0, -kRadiusY, 0)).transpose(); // top pole
    for (int r = 1; r <= topo.rings - 1; ++r) {
        const double theta = kPi * r / topo.rings;
        for (int s = 0; s < topo.segments; ++s) {
            const double phi = 2.0 * kPi * s / topo.segments - kPi; // phi=0 at s=S/2
            const Vec3 d = sphere_dir(theta, phi);
            pos.row(topo.vertex_index(r, s)) =
                Vec3(kRadiusX * d.x(), kRadiusY * d.y(), kRadiusZ * d.z()).transpose();
        }
    }
    pos.row(topo.vertex_count() - 1) = (Vec3(0, kRadiusY, 0)).transpose(); // bottom pole
    return pos;
}

Eigen::MatrixX3i base_triangles(const Topology& topo) {
    std::vector<std::array<int, 3>> tris;
    const int s_count = topo.segments;
    auto idx = [&](int r, int s) { return topo.vertex_index(r, s); };
    // Top cap: wound so outward normals follow the right-hand rule.
    for (int s = 0; s < s_count; ++s) tris.push_back({0, idx(1, s), idx(1, s + 1)});
    for (int r = 1; r < topo.rings - 1; ++r) {
        for (int s = 0; s < s_count; ++s) {
            const int tl = idx(r, s), tr = idx(r, s + 1);
            const int bl = idx(r + 1, s), br = idx(r + 1, s + 1);
            tris.push_back({tl, bl, tr});
            tris.push_back({tr, bl, br});
        }
    }
    const int bottom = topo.vertex_count() - 1;
    for (int s = 0; s < s_count; ++s)
        tris.push_back({bottom, idx(topo.rings - 1, s + 1), idx(topo.rings - 1, s)});

    Eigen::MatrixX3i out(static_cast<Eigen::Index>(tris.size()), 3);
    for (std::size_t i = 0; i < tris.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) << tris[i][0], tris[i][1], tris[i][2];
    return out;
}

// Seeded low-frequency radial modulation: a handful of smooth spherical
// harmonics-like terms keeps identities distinguishable without sharp detail.
Eigen::VectorXd identity_radial_field(std::uint64_t identity_seed, const Topology& topo) {
    Xoshiro256pp rng(identity_seed);
    std::array<double, 9> coeff{};
    for (auto& c : coeff) c = rng.next_normal();

    const int n = topo.vertex_count();
    Eigen::VectorXd field(n);
    auto eval = [&](const Vec3& u) {
        return coeff[0] * u.x() + coeff[1] * u.y() + coeff[2] * u.z() +
               coeff[3] * u.x() * u.y() + coeff[4] * u.y() * u.z() + coeff[5] * u.x() * u.z() +
               coeff[6] * (u.x() * u.x() - u.y() * u.y()) +
               coeff[7] * (3 * u.z() * u.z() - 1) / 2.0 + coeff[8];
    };
    field(0) = eval(Vec3(0, -1, 0));
    for (int r = 1; r <= topo.rings - 1; ++r) {
        const double theta = kPi * r / topo.rings;
        for (int s = 0; s < topo.segments; ++s) {
            const double phi = 2.0 * kPi * s / topo.segments - kPi;
            field(topo.vertex_index(r, s)) = eval(sphere_dir(theta, phi));
        }
    }
    field(n - 1) = eval(Vec3(0, 1, 0));
    return field;
}

} // namespace

int Topology::vertex_index(int ring, int seg) const {
    const int s = ((seg % segments) + segments) % segments;
    if (ring < 1 || ring > rings - 1) throw DataError("testbed ring index out of range");
    return 1 + (ring - 1) * segments + s;
}

Vec2 ground_truth_va(const ExprParams& e) {
    const double v = std::clamp(e.mouth_corner - e.brow_furrow, -1.0, 1.0);
    const double a = std::clamp(0.5 * e.mouth_open + 0.5 * e.eye_open + 0.3 * e.brow_raise,
                                -1.0, 1.0);
    return {v, a};
}

ExprParams canonical_params(double valence, double arousal) {
    ExprParams e;
    e.mouth_corner = valence;
    e.mouth_open = arousal;
    e.eye_open = arousal;
    return e;
}

ExprParams basic_expression_params(const std::string& label) {
    // Fixed table, one canonical parameter set per basic expression.
    ExprParams e;
    if (label == "anger") {
        e.brow_furrow = 0.8;
        e.mouth_corner = -0.3;
        e.mouth_open = 0.2;
    } else if (label == "disgust") {
        e.brow_furrow = 0.5;
        e.mouth_corner = -0.5;
        e.eye_open = -0.3;
    } else if (label == "fear") {
        e.brow_raise = 0.7;
        e.eye_open = 0.8;
        e.mouth_open = 0.4;
    } else if (label == "joy") {
        e.mouth_corner = 0.9;
        e.mouth_open = 0.3;
        e.eye_open = 0.2;
    } else if (label == "sadness") {
        e.mouth_corner = -0.7;
        e.brow_raise = 0.3;
        e.eye_open = -0.2;
    } else if (label == "surprise") {
        e.brow_raise = 0.9;
        e.eye_open = 0.9;
        e.mouth_open = 0.8;
    } else {
        throw DataError("unknown basic expression label: \"" + label + "\"");
    }
    return e;
}

Eigen::VectorXd expression_deformation(const ExprParams& expr, const Topology& topo) {
    const Eigen::MatrixX3d base = base_positions(topo);
    const int n = topo.vertex_count();
    Eigen::VectorXd def = Eigen::VectorXd::Zero(3 * n);
    if (expr.is_zero()) return def;

    for (int i = 0; i < n; ++i) {
        const Vec3 u = base.row(i).transpose().normalized();
        Vec3 d = Vec3::Zero();
        for (const auto& bump : bumps()) {
            const double ang = std::acos(std::clamp(u.dot(bump.anchor), -1.0, 1.0));
            const double w = std::exp(-0.5 * (ang / kBumpSigma) * (ang / kBumpSigma));
            d += w * param_value(expr, bump.param) * bump.displacement;
        }
        def.segment<3>(3 * i) = d;
    }
    return def;
}

TriMesh make_face(std::uint64_t identity_seed, const ExprParams& expr, const Topology& topo,
                  double identity_scale) {
    TriMesh mesh;
    mesh.triangles = base_triangles(topo);
    Eigen::MatrixX3d pos = base_positions(topo);

    if (identity_scale != 0.0) {
        const Eigen::VectorXd field = identity_radial_field(identity_seed, topo);
        for (int i = 0; i < topo.vertex_count(); ++i) {
            const Vec3 p = pos.row(i).transpose();
            pos.row(i) = (p * (1.0 + identity_scale * field(i))).transpose();
        }
    }

    const Eigen::VectorXd def = expression_deformation(expr, topo);
    for (int i = 0; i < topo.vertex_count(); ++i)
        pos.row(i) += def.segment<3>(3 * i).transpose();

    mesh.vertices = pos;
    mesh.validate();
    return mesh;
}

Eigen::MatrixX3d make_texture(std::uint64_t identity_seed, const Topology& topo) {
    Xoshiro256pp rng(identity_seed ^ 0x74657874ULL);
    const Vec3 base_tone(0.75 + 0.1 * rng.next_double(), 0.55 + 0.1 * rng.next_double(),
                         0.45 + 0.1 * rng.next_double());
    std::array<double, 6> coeff{};
    for (auto& c : coeff) c = 0.25 * rng.next_double() - 0.125;

    const Eigen::MatrixX3d pos = base_positions(topo);
    Eigen::MatrixX3d tex(topo.vertex_count(), 3);
    for (int i = 0; i < topo.vertex_count(); ++i) {
        const Vec3 u = pos.row(i).transpose().normalized();
        const double mod = coeff[0] * u.x() + coeff[1] * u.y() + coeff[2] * u.z() +
                           coeff[3] * u.x() * u.y() + coeff[4] * u.y() * u.z() +
                           coeff[5] * u.x() * u.z();
        for (int c = 0; c < 3; ++c)
            tex(i, c) = std::clamp(base_tone(c) * (1.0 + mod) - 0.05 * c * mod, 0.05, 0.95);
    }
    return tex;
}

std::array<int, 68> landmark_vertices(const Topology& topo) {
    // Fractional (ring, segment) grid positions over the front of the head:
    // 17 jawline, 10 brows, 9 nose, 12 eyes, 20 mouth. Segment fraction 0.5
    // is the face center line (phi = 0).
    struct Frac {
        double r, s;
    };
    std::vector<Frac> fracs;
    for (int i = 0; i < 17; ++i) // jawline, ear to ear through the chin
        fracs.push_back({0.62 + 0.20 * std::sin(kPi * i / 16.0), 0.30 + 0.40 * i / 16.0});
    for (int i = 0; i < 5; ++i) fracs.push_back({0.34, 0.36 + 0.05 * i}); // left brow
    for (int i = 0; i < 5; ++i) fracs.push_back({0.34, 0.56 + 0.05 * i}); // right brow
    for (int i = 0; i < 4; ++i) fracs.push_back({0.44 + 0.05 * i, 0.50}); // nose bridge
    for (int i = 0; i < 5; ++i) fracs.push_back({0.57, 0.44 + 0.03 * i}); // nose base
    for (int i = 0; i < 6; ++i) // left eye ring
        fracs.push_back({0.43 + 0.03 * std::sin(2 * kPi * i / 6.0),
                         0.40 + 0.035 * std::cos(2 * kPi * i / 6.0)});
    for (int i = 0; i < 6; ++i) // right eye ring
        fracs.push_back({0.43 + 0.03 * std::sin(2 * kPi * i / 6.0),
                         0.60 + 0.035 * std::cos(2 * kPi * i / 6.0)});
    for (int i = 0; i < 12; ++i) // outer mouth ring
        fracs.push_back({0.63 + 0.045 * std::sin(2 * kPi * i / 12.0),
                         0.50 + 0.075 * std::cos(2 * kPi * i / 12.0)});
    for (int i = 0; i < 8; ++i) // inner mouth ring
        fracs.push_back({0.63 + 0.02 * std::sin(2 * kPi * i / 8.0),
                         0.50 + 0.045 * std::cos(2 * kPi * i / 8.0)});

    std::array<int, 68> out{};
    std::set<int> used;
    for (std::size_t i = 0; i < 68; ++i) {
        const int ring = std::clamp(static_cast<int>(std::lround(fracs[i].r * topo.rings)), 1,
                                    topo.rings - 1);
        int seg = static_cast<int>(std::lround(fracs[i].s * topo.segments));
        int vi = topo.vertex_index(ring, seg);
        while (used.count(vi)) vi = topo.vertex_index(ring, ++seg); // collision: next segment
        used.insert(vi);
        out[i] = vi;
    }
    return out;
}

Landmarks2D ground_truth_landmarks(const TriMesh& mesh, const CameraParams& cam,
                                   const Topology& topo) {
    const auto indices = landmark_vertices(topo);
    Eigen::MatrixX3d pts(68, 3);
    for (int i = 0; i < 68; ++i) pts.row(i) = mesh.vertices.row(indices[static_cast<std::size_t>(i)]);
    const Eigen::MatrixX2d projected = project(pts, cam);

    Landmarks2D lm;
    lm.points = projected;
    for (int i = 0; i < 68; ++i) lm.vertex_map[static_cast<std::size_t>(i)] = indices[static_cast<std::size_t>(i)];
    return lm;
}

CameraParams default_camera(int width, int height) {
    CameraParams cam;
    cam.principal_point = Vec2(width / 2.0, height / 2.0);
    cam.t = Vec3(0, 0, 6.0);
    cam.f = 0.28 * width * cam.t.z() / 1.0;
    return cam;
}

Dataset make_dataset(int n_identities, int frames_per_identity, std::uint64_t seed,
                     int expressions_per_label, const Topology& topo, double identity_scale) {
    if (n_identities < 1 || frames_per_identity < 1)
        throw DataError("dataset needs at least one identity and one frame");

    Dataset ds;
    ds.topology = topo;
    ds.template_shape = make_face(0, ExprParams{}, topo, 0.0).flatten();

    Xoshiro256pp rng(seed);
    ds.identity_seeds.reserve(static_cast<std::size_t>(n_identities));
    for (int i = 0; i < n_identities; ++i) ds.identity_seeds.push_back(rng.next_u64());

    char id_buf[64];
    for (int i = 0; i < n_identities; ++i) {
        for (int f = 0; f < frames_per_identity; ++f) {
            const double v = rng.uniform(-1.0, 1.0);
            const double a = rng.uniform(-1.0, 1.0);
            const ExprParams expr = canonical_params(v, a);
            std::snprintf(id_buf, sizeof id_buf, "id%03d_f%04d", i, f);
            const std::string mesh_id(id_buf);
            ds.meshes_by_id[mesh_id] =
                make_face(ds.identity_seeds[static_cast<std::size_t>(i)], expr, topo, identity_scale)
                    .flatten();
            ds.annotations.push_back({v, a, mesh_id});
        }
    }

    for (const char* label : kBasicExpressionLabels) {
        const ExprParams canon = basic_expression_params(label);
        auto& list = ds.labeled_expressions[label];
        for (int k = 0; k < expressions_per_label; ++k) {
            // Mild magnitude jitter around the canonical expression.
            const double gain = 1.0 + 0.1 * rng.next_normal();
            ExprParams e = canon;
            e.mouth_corner *= gain;
            e.mouth_open *= gain;
            e.eye_open *= gain;
            e.brow_raise *= gain;
            e.brow_furrow *= gain;
            const std::uint64_t id_seed =
                ds.identity_seeds[static_cast<std::size_t>(k % n_identities)];
            list.push_back(make_face(id_seed, e, topo, identity_scale).flatten());
        }
    }
    return ds;
}

} // namespace testbed
} // namespace facesyn
