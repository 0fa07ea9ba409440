#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace facesyn {

// Constraint applied to each component column after its least-squares update.
//  TwoSided:   max|B_k| = 1 (allows deformation in both directions; default)
//  NonNegative: B_k >= 0 and max B_k = 1
//  None:       no projection (used when comparing against plain low-rank fits)
enum class BlendshapeConstraint { TwoSided, NonNegative, None };

struct BlendshapeModel {
    Eigen::MatrixXd components;  // 3N x h
    BlendshapeConstraint constraint = BlendshapeConstraint::TwoSided;
    double sparsity_weight = 0.0;
    std::uint64_t topology_hash = 0;

    Eigen::Index component_count() const { return components.cols(); }
    void validate() const;

    // neutral + B c
    Eigen::VectorXd reconstruct(const Eigen::VectorXd& coeffs,
                                const Eigen::VectorXd& neutral) const;
};

struct BlendshapeBuildResult {
    BlendshapeModel model;
    Eigen::MatrixXd coefficients;       // h x m
    std::vector<double> objective_trace; // per alternation, non-increasing
    int alternations = 0;
};

// Sparse expression components from a 3N x m matrix of difference vectors
// (expressive mesh minus the subject's neutral). Minimizes
//   ||D - B C||_F^2 + w * sum_k ||C_k,:||_2
// by alternating a group-shrinkage C update with a columnwise least-squares
// B update plus constraint projection (component/coefficient scales are
// exchanged so the projection leaves B C unchanged). An alternation that
// fails to decrease the objective is rolled back and stops the build.
BlendshapeBuildResult build_blendshapes(const Eigen::MatrixXd& difference_matrix,
                                        Eigen::Index component_count, double sparsity_weight,
                                        BlendshapeConstraint constraint = BlendshapeConstraint::TwoSided,
                                        int max_alternations = 200, double rel_tol = 1e-7,
                                        std::uint64_t topology_hash = 0);

void save_blendshape_model(const BlendshapeModel& model, const std::string& path);
BlendshapeModel load_blendshape_model(const std::string& path);

} // namespace facesyn
