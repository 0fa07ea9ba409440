#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace facesyn {

enum class ModelKind { Shape, Texture };

// Mean + orthonormal basis + eigenvalues. Covers the shape model and the
// texture model; both are plain linear-Gaussian models over 3N vectors.
struct LinearModel {
    Eigen::VectorXd mean;        // 3N
    Eigen::MatrixXd basis;       // 3N x k, column-orthonormal
    Eigen::VectorXd eigenvalues; // k, positive, non-increasing
    ModelKind kind = ModelKind::Shape;
    std::uint64_t topology_hash = 0;

    Eigen::Index dim() const { return mean.size(); }
    Eigen::Index components() const { return basis.cols(); }

    // Checks orthonormality (to 1e-8) and the eigenvalue ordering invariant.
    void validate() const;

    Eigen::VectorXd instance(const Eigen::VectorXd& coeffs) const;
    Eigen::VectorXd project(const Eigen::VectorXd& sample) const; // basis^T (x - mean)
};

// PCA via eigendecomposition of the samples x samples Gram matrix (snapshot
// method; sample count << 3N). Eigenvalues are those of the sample covariance
// with 1/(m-1) normalization. Keeps the minimal prefix of components whose
// cumulative variance reaches variance_fraction. Basis sign convention: the
// first entry with |.| > 1e-12 in each column is positive.
LinearModel build_pca_model(const std::vector<Eigen::VectorXd>& samples,
                            double variance_fraction, ModelKind kind,
                            std::uint64_t topology_hash = 0);

// Iterative PCA imputation: missing entries start at the column mean, then
// alternate rank-r fit / re-fill until the refilled entries move < tol or
// max_iters is hit. mask(i,j) true = observed. Throws if a coordinate is
// observed in no sample.
std::vector<Eigen::VectorXd> impute_missing(const std::vector<Eigen::VectorXd>& samples,
                                            const std::vector<std::vector<bool>>& observed,
                                            int rank, double tol = 1e-6, int max_iters = 50);

// Container persistence: little-endian binary payload behind a JSON header.
void save_linear_model(const LinearModel& model, const std::string& path);
LinearModel load_linear_model(const std::string& path);

} // namespace facesyn
