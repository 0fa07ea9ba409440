#include "facesyn/gallery.hpp"

#include "facesyn/container.hpp"
#include "facesyn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace facesyn {

const std::array<const char*, kBasicExpressionCount> kBasicExpressionLabels = {
    "anger", "disgust", "fear", "joy", "sadness", "surprise"};

int basic_expression_index(const std::string& label) {
    for (int i = 0; i < kBasicExpressionCount; ++i)
        if (label == kBasicExpressionLabels[static_cast<std::size_t>(i)]) return i;
    throw DataError("unknown basic expression label: \"" + label + "\"");
}

void VAAnnotation::validate() const {
    if (!(valence >= -1.0 && valence <= 1.0 && arousal >= -1.0 && arousal <= 1.0))
        throw DataError("VA annotation outside [-1,1]^2 for mesh \"" + mesh_id + "\"");
}

WardClustering ward_cluster(const Eigen::MatrixX2d& points, int k) {
    const int n = static_cast<int>(points.rows());
    if (k < 1 || k > n) throw DataError("cluster count must satisfy 1 <= K <= point count");

    struct Cluster {
        Vec2 mean;
        int size;
        bool alive;
    };
    std::vector<Cluster> clusters(static_cast<std::size_t>(n));
    std::vector<int> member_of(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        clusters[static_cast<std::size_t>(i)] = {points.row(i).transpose(), 1, true};
        member_of[static_cast<std::size_t>(i)] = i;
    }

    // Ward merge cost: the increase in within-cluster sum of squares,
    // |A||B| / (|A|+|B|) * |mean_A - mean_B|^2.
    auto merge_cost = [&](int a, int b) {
        const auto& ca = clusters[static_cast<std::size_t>(a)];
        const auto& cb = clusters[static_cast<std::size_t>(b)];
        const double na = ca.size, nb = cb.size;
        return na * nb / (na + nb) * (ca.mean - cb.mean).squaredNorm();
    };

    // Per-row nearest-neighbor cache over j > i. Ward is reducible (a merged
    // cluster is never closer to a third one than the closer of its parts), so
    // a cached row minimum only needs recomputing when its partner took part
    // in a merge.
    std::vector<double> nn_cost(static_cast<std::size_t>(n),
                                std::numeric_limits<double>::infinity());
    std::vector<int> nn_j(static_cast<std::size_t>(n), -1);
    auto recompute_row = [&](int i) {
        nn_cost[static_cast<std::size_t>(i)] = std::numeric_limits<double>::infinity();
        nn_j[static_cast<std::size_t>(i)] = -1;
        for (int j = i + 1; j < n; ++j) {
            if (!clusters[static_cast<std::size_t>(j)].alive) continue;
            const double c = merge_cost(i, j);
            if (c < nn_cost[static_cast<std::size_t>(i)]) { // strict: smallest j wins ties
                nn_cost[static_cast<std::size_t>(i)] = c;
                nn_j[static_cast<std::size_t>(i)] = j;
            }
        }
    };
    for (int i = 0; i < n; ++i) recompute_row(i);

    WardClustering out;
    for (int step = 0; step < n - k; ++step) {
        double best = std::numeric_limits<double>::infinity();
        int bi = -1;
        for (int i = 0; i < n; ++i) {
            if (!clusters[static_cast<std::size_t>(i)].alive) continue;
            if (nn_cost[static_cast<std::size_t>(i)] < best) { // strict: smallest i wins ties
                best = nn_cost[static_cast<std::size_t>(i)];
                bi = i;
            }
        }
        const int bj = nn_j[static_cast<std::size_t>(bi)];
        auto& a = clusters[static_cast<std::size_t>(bi)];
        auto& b = clusters[static_cast<std::size_t>(bj)];
        a.mean = (a.mean * a.size + b.mean * b.size) / (a.size + b.size);
        a.size += b.size;
        b.alive = false;
        for (auto& m : member_of)
            if (m == bj) m = bi;
        out.merges.emplace_back(bi, bj);

        for (int i = 0; i < n; ++i) {
            if (!clusters[static_cast<std::size_t>(i)].alive) continue;
            if (i == bi || nn_j[static_cast<std::size_t>(i)] == bi ||
                nn_j[static_cast<std::size_t>(i)] == bj)
                recompute_row(i);
        }
    }

    std::vector<int> relabel(static_cast<std::size_t>(n), -1);
    int next = 0;
    for (int i = 0; i < n; ++i)
        if (clusters[static_cast<std::size_t>(i)].alive) relabel[static_cast<std::size_t>(i)] = next++;

    out.assignments.resize(static_cast<std::size_t>(n));
    out.centroids.resize(k, 2);
    for (int i = 0; i < n; ++i)
        out.assignments[static_cast<std::size_t>(i)] =
            relabel[static_cast<std::size_t>(member_of[static_cast<std::size_t>(i)])];
    for (int i = 0; i < n; ++i) {
        if (clusters[static_cast<std::size_t>(i)].alive)
            out.centroids.row(relabel[static_cast<std::size_t>(i)]) =
                clusters[static_cast<std::size_t>(i)].mean.transpose();
    }
    return out;
}

void AffectGallery::validate() const {
    if (clusters.empty()) throw DataError("gallery has no clusters");
    for (const auto& c : clusters) {
        if (c.centroid_va.cwiseAbs().maxCoeff() > 1.0 + 1e-12)
            throw DataError("gallery centroid outside [-1,1]^2");
        if (c.mean_deformation.size() != template_shape.size())
            throw DataError("gallery deformation does not match template size");
    }
    for (const auto& b : basic_expressions)
        if (b.size() != 0 && b.size() != template_shape.size())
            throw DataError("basic expression deformation does not match template size");
}

AffectGallery build_gallery(const std::vector<VAAnnotation>& annotations,
                            const std::map<std::string, Eigen::VectorXd>& meshes_by_id,
                            const Eigen::VectorXd& template_shape, int k,
                            const std::map<std::string, std::vector<Eigen::VectorXd>>&
                                labeled_expression_meshes,
                            std::uint64_t topology_hash) {
    if (annotations.empty()) throw DataError("no annotations supplied");
    Eigen::MatrixX2d va(static_cast<Eigen::Index>(annotations.size()), 2);
    for (std::size_t i = 0; i < annotations.size(); ++i) {
        annotations[i].validate();
        if (!meshes_by_id.count(annotations[i].mesh_id))
            throw DataError("annotation references unknown mesh_id \"" + annotations[i].mesh_id +
                            "\"");
        va(static_cast<Eigen::Index>(i), 0) = annotations[i].valence;
        va(static_cast<Eigen::Index>(i), 1) = annotations[i].arousal;
    }

    const WardClustering clustering = ward_cluster(va, k);

    AffectGallery gal;
    gal.template_shape = template_shape;
    gal.topology_hash = topology_hash;
    gal.clusters.resize(static_cast<std::size_t>(k));
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int c = 0; c < k; ++c) {
        gal.clusters[static_cast<std::size_t>(c)].centroid_va =
            clustering.centroids.row(c).transpose();
        gal.clusters[static_cast<std::size_t>(c)].mean_deformation =
            Eigen::VectorXd::Zero(template_shape.size());
    }
    for (std::size_t i = 0; i < annotations.size(); ++i) {
        const int c = clustering.assignments[i];
        const Eigen::VectorXd& mesh = meshes_by_id.at(annotations[i].mesh_id);
        if (mesh.size() != template_shape.size())
            throw DataError("mesh \"" + annotations[i].mesh_id + "\" does not match template size");
        gal.clusters[static_cast<std::size_t>(c)].mean_deformation += mesh;
        ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
        auto& cl = gal.clusters[static_cast<std::size_t>(c)];
        cl.mean_deformation = cl.mean_deformation / counts[static_cast<std::size_t>(c)] -
                              template_shape;
    }

    for (const auto& [label, meshes] : labeled_expression_meshes) {
        const int idx = basic_expression_index(label);
        if (meshes.empty()) throw DataError("label \"" + label + "\" has no meshes");
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(template_shape.size());
        for (const auto& m : meshes) {
            if (m.size() != template_shape.size())
                throw DataError("labeled mesh for \"" + label + "\" does not match template size");
            mean += m;
        }
        gal.basic_expressions[static_cast<std::size_t>(idx)] =
            mean / static_cast<double>(meshes.size()) - template_shape;
    }

    gal.validate();
    return gal;
}

int query_va(const AffectGallery& gallery, double valence, double arousal) {
    if (!(valence >= -1.0 && valence <= 1.0 && arousal >= -1.0 && arousal <= 1.0))
        throw DataError("VA query outside [-1,1]^2");
    const Vec2 p(valence, arousal);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < gallery.clusters.size(); ++i) {
        const double d = (gallery.clusters[i].centroid_va - p).squaredNorm();
        if (d < best_d) { // strict: lowest index wins ties
            best_d = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

std::vector<int> query_path(const AffectGallery& gallery, const std::vector<Vec2>& path,
                            int frames) {
    if (path.empty()) throw DataError("empty VA path");
    if (frames < 1) throw DataError("frames must be >= 1");

    std::vector<Vec2> pts = path;
    if (pts.size() == 1) pts.push_back(pts[0]); // degenerate: static request

    std::vector<double> cum(pts.size(), 0.0);
    for (std::size_t i = 1; i < pts.size(); ++i)
        cum[i] = cum[i - 1] + (pts[i] - pts[i - 1]).norm();
    const double total = cum.back();

    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(frames));
    for (int f = 0; f < frames; ++f) {
        Vec2 p;
        if (total <= 0.0) {
            p = pts[0];
        } else {
            const double s = frames > 1 ? total * f / (frames - 1) : 0.0;
            std::size_t seg = 1;
            while (seg + 1 < pts.size() && cum[seg] < s) ++seg;
            const double seg_len = cum[seg] - cum[seg - 1];
            const double t = seg_len > 0.0 ? (s - cum[seg - 1]) / seg_len : 0.0;
            p = pts[seg - 1] + t * (pts[seg] - pts[seg - 1]);
        }
        // Interpolation can drift a hair outside the box; clamp before lookup.
        out.push_back(query_va(gallery, std::clamp(p.x(), -1.0, 1.0), std::clamp(p.y(), -1.0, 1.0)));
    }
    return out;
}

const Eigen::VectorXd& basic_expression_face(const AffectGallery& gallery,
                                             const std::string& label) {
    const int idx = basic_expression_index(label);
    const auto& d = gallery.basic_expressions[static_cast<std::size_t>(idx)];
    if (d.size() == 0)
        throw DataError("gallery has no mean face for label \"" + label + "\"");
    return d;
}

void save_gallery(const AffectGallery& gallery, const std::string& path) {
    gallery.validate();
    Container c;
    c.meta["type"] = "affect_gallery";
    c.meta["topology_hash"] = gallery.topology_hash;

    const auto k = static_cast<Eigen::Index>(gallery.clusters.size());
    Eigen::MatrixXd centroids(k, 2);
    Eigen::MatrixXd deformations(gallery.template_shape.size(), k);
    for (Eigen::Index i = 0; i < k; ++i) {
        centroids.row(i) = gallery.clusters[static_cast<std::size_t>(i)].centroid_va.transpose();
        deformations.col(i) = gallery.clusters[static_cast<std::size_t>(i)].mean_deformation;
    }
    c.matrices.emplace_back("template", gallery.template_shape);
    c.matrices.emplace_back("centroids", centroids);
    c.matrices.emplace_back("deformations", deformations);

    nlohmann::json labels = nlohmann::json::array();
    for (int i = 0; i < kBasicExpressionCount; ++i) {
        const auto& d = gallery.basic_expressions[static_cast<std::size_t>(i)];
        if (d.size() != 0) {
            labels.push_back(kBasicExpressionLabels[static_cast<std::size_t>(i)]);
            c.matrices.emplace_back(std::string("expr_") +
                                        kBasicExpressionLabels[static_cast<std::size_t>(i)],
                                    d);
        }
    }
    c.meta["basic_expressions"] = labels;
    c.save(path);
}

AffectGallery load_gallery(const std::string& path) {
    const Container c = Container::load(path);
    if (c.meta.value("type", "") != "affect_gallery")
        throw DataError(path + ": container does not hold an affect gallery");

    AffectGallery gal;
    gal.topology_hash = c.meta.value("topology_hash", std::uint64_t{0});
    gal.template_shape = c.matrix("template");
    const Eigen::MatrixXd& centroids = c.matrix("centroids");
    const Eigen::MatrixXd& deformations = c.matrix("deformations");
    gal.clusters.resize(static_cast<std::size_t>(centroids.rows()));
    for (Eigen::Index i = 0; i < centroids.rows(); ++i) {
        gal.clusters[static_cast<std::size_t>(i)].centroid_va = centroids.row(i).transpose();
        gal.clusters[static_cast<std::size_t>(i)].mean_deformation = deformations.col(i);
    }
    for (const auto& label : c.meta.value("basic_expressions", nlohmann::json::array())) {
        const std::string name = label.get<std::string>();
        gal.basic_expressions[static_cast<std::size_t>(basic_expression_index(name))] =
            c.matrix("expr_" + name);
    }
    gal.validate();
    return gal;
}

} // namespace facesyn
