#pragma once

#include "facesyn/geometry.hpp"

#include <map>
#include <string>
#include <vector>

namespace facesyn {

struct VAAnnotation {
    double valence = 0.0; // [-1, 1]
    double arousal = 0.0; // [-1, 1]
    std::string mesh_id;

    void validate() const;
};

struct WardClustering {
    std::vector<int> assignments;   // per input point, cluster index in [0, K)
    Eigen::MatrixX2d centroids;     // K x 2, member means
    // Merge sequence as (cluster_id_a, cluster_id_b) with a < b; the merged
    // cluster keeps id a. Initial singletons carry ids 0..n-1.
    std::vector<std::pair<int, int>> merges;
};

// Agglomerative clustering, ward criterion on squared euclidean distance:
// each step merges the pair with the minimal increase in total within-cluster
// variance, ties broken by the lexicographically smallest (i, j) id pair.
// Final clusters are numbered 0..K-1 in ascending surviving-id order.
WardClustering ward_cluster(const Eigen::MatrixX2d& points, int k);

inline constexpr int kBasicExpressionCount = 6;
extern const std::array<const char*, kBasicExpressionCount> kBasicExpressionLabels;
int basic_expression_index(const std::string& label); // throws on unknown label

struct AffectGallery {
    struct Cluster {
        Vec2 centroid_va;
        Eigen::VectorXd mean_deformation; // 3N: cluster mean face minus template
    };
    std::vector<Cluster> clusters;
    Eigen::VectorXd template_shape; // 3N
    // Indexed by basic_expression_index; empty vector = label not supplied.
    std::array<Eigen::VectorXd, kBasicExpressionCount> basic_expressions;
    std::uint64_t topology_hash = 0;

    void validate() const;
};

// Clusters the VA annotations and stores per-cluster mean faces as
// deformations from the template; basic-expression mean faces come from the
// separately labeled sets.
AffectGallery build_gallery(const std::vector<VAAnnotation>& annotations,
                            const std::map<std::string, Eigen::VectorXd>& meshes_by_id,
                            const Eigen::VectorXd& template_shape, int k,
                            const std::map<std::string, std::vector<Eigen::VectorXd>>&
                                labeled_expression_meshes = {},
                            std::uint64_t topology_hash = 0);

// Nearest-centroid lookup; ties resolve to the lowest cluster index.
// Returns the cluster index (deformation via gallery.clusters[i]).
int query_va(const AffectGallery& gallery, double valence, double arousal);

// Path resampled to `frames` points by arc-length-uniform interpolation, then
// per-point nearest-centroid lookup. A single-point path is treated as a
// static request repeated `frames` times.
std::vector<int> query_path(const AffectGallery& gallery,
                            const std::vector<Vec2>& path, int frames);

const Eigen::VectorXd& basic_expression_face(const AffectGallery& gallery,
                                             const std::string& label);

void save_gallery(const AffectGallery& gallery, const std::string& path);
AffectGallery load_gallery(const std::string& path);

} // namespace facesyn
