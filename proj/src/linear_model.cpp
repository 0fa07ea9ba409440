#include "facesyn/linear_model.hpp"

#include "facesyn/container.hpp"
#include "facesyn/errors.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace facesyn {

void LinearModel::validate() const {
    if (basis.rows() != mean.size()) throw DataError("basis/mean dimension mismatch");
    if (eigenvalues.size() != basis.cols()) throw DataError("eigenvalue count != basis columns");
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
        if (!(eigenvalues(i) > 0)) throw DataError("eigenvalues must be strictly positive");
        if (i > 0 && eigenvalues(i) > eigenvalues(i - 1) + 1e-12)
            throw DataError("eigenvalues must be non-increasing");
    }
    const Eigen::MatrixXd gram = basis.transpose() * basis;
    if ((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() > 1e-8)
        throw DataError("basis is not column-orthonormal");
}

Eigen::VectorXd LinearModel::instance(const Eigen::VectorXd& coeffs) const {
    if (coeffs.size() != basis.cols())
        throw DataError("coefficient vector has length " + std::to_string(coeffs.size()) +
                        ", model has " + std::to_string(basis.cols()) + " components");
    return mean + basis * coeffs;
}

Eigen::VectorXd LinearModel::project(const Eigen::VectorXd& sample) const {
    if (sample.size() != mean.size()) throw DataError("sample/model dimension mismatch");
    return basis.transpose() * (sample - mean);
}

LinearModel build_pca_model(const std::vector<Eigen::VectorXd>& samples,
                            double variance_fraction, ModelKind kind,
                            std::uint64_t topology_hash) {
    const auto m = static_cast<Eigen::Index>(samples.size());
    if (m < 2) throw DataError("PCA needs at least 2 samples");
    if (!(variance_fraction > 0.0 && variance_fraction <= 1.0))
        throw DataError("variance_fraction must be in (0, 1]");
    const Eigen::Index dim = samples[0].size();
    for (const auto& s : samples)
        if (s.size() != dim) throw DataError("samples differ in length");

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& s : samples) mean += s;
    mean /= static_cast<double>(m);

    Eigen::MatrixXd centered(dim, m);
    for (Eigen::Index j = 0; j < m; ++j) centered.col(j) = samples[j] - mean;

    // Snapshot method: eigen-decompose the m x m Gram matrix instead of the
    // (3N)^2 covariance. Nonzero spectra coincide up to the 1/(m-1) factor.
    const Eigen::MatrixXd gram = centered.transpose() * centered / static_cast<double>(m - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw NumericalError("Gram eigendecomposition failed");

    // Ascending from Eigen; walk backwards for descending order.
    std::vector<Eigen::Index> order;
    const double total = std::max(eig.eigenvalues().sum(), 0.0);
    const double floor_ev = std::max(1e-12 * eig.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
    for (Eigen::Index i = m - 1; i >= 0; --i)
        if (eig.eigenvalues()(i) > floor_ev) order.push_back(i);
    if (order.empty() || total <= 0.0)
        throw DataError("zero-variance input: all samples identical");

    double cumulative = 0.0;
    Eigen::Index k = 0;
    for (; k < static_cast<Eigen::Index>(order.size()); ++k) {
        cumulative += eig.eigenvalues()(order[static_cast<std::size_t>(k)]);
        if (cumulative >= variance_fraction * total - 1e-15 * total) {
            ++k;
            break;
        }
    }
    if (k == 0) k = 1;

    LinearModel model;
    model.kind = kind;
    model.topology_hash = topology_hash;
    model.mean = mean;
    model.basis.resize(dim, k);
    model.eigenvalues.resize(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        const Eigen::Index src = order[static_cast<std::size_t>(c)];
        const double ev = eig.eigenvalues()(src);
        model.eigenvalues(c) = ev;
        // Basis column = centered * v / ||centered * v||; the norm equals
        // sqrt((m-1) * ev) by construction.
        Eigen::VectorXd col = centered * eig.eigenvectors().col(src);
        col /= std::sqrt(static_cast<double>(m - 1) * ev);
        // Deterministic sign: first entry with magnitude above threshold is positive.
        for (Eigen::Index r = 0; r < dim; ++r) {
            if (std::abs(col(r)) > 1e-12) {
                if (col(r) < 0) col = -col;
                break;
            }
        }
        model.basis.col(c) = col;
    }
    return model;
}

std::vector<Eigen::VectorXd> impute_missing(const std::vector<Eigen::VectorXd>& samples,
                                            const std::vector<std::vector<bool>>& observed,
                                            int rank, double tol, int max_iters) {
    const auto m = samples.size();
    if (m == 0) throw DataError("impute_missing: no samples");
    if (observed.size() != m) throw DataError("impute_missing: mask/sample count mismatch");
    const Eigen::Index dim = samples[0].size();
    if (rank < 1) throw DataError("impute_missing: rank must be >= 1");

    // Column means over observed entries; every coordinate must be seen somewhere.
    Eigen::VectorXd col_sum = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd col_cnt = Eigen::VectorXd::Zero(dim);
    bool any_missing = false;
    for (std::size_t j = 0; j < m; ++j) {
        if (samples[j].size() != dim) throw DataError("samples differ in length");
        if (static_cast<Eigen::Index>(observed[j].size()) != dim)
            throw DataError("mask length mismatch");
        for (Eigen::Index i = 0; i < dim; ++i) {
            if (observed[j][static_cast<std::size_t>(i)]) {
                col_sum(i) += samples[j](i);
                col_cnt(i) += 1.0;
            } else {
                any_missing = true;
            }
        }
    }
    if (!any_missing) return samples;
    for (Eigen::Index i = 0; i < dim; ++i)
        if (col_cnt(i) == 0.0)
            throw DataError("coordinate " + std::to_string(i) + " is missing in every sample");

    std::vector<Eigen::VectorXd> filled = samples;
    for (std::size_t j = 0; j < m; ++j)
        for (Eigen::Index i = 0; i < dim; ++i)
            if (!observed[j][static_cast<std::size_t>(i)]) filled[j](i) = col_sum(i) / col_cnt(i);

    for (int it = 0; it < max_iters; ++it) {
        LinearModel pca;
        try {
            pca = build_pca_model(filled, 1.0, ModelKind::Shape);
        } catch (const DataError&) {
            break; // zero variance after filling: nothing left to refine
        }
        const Eigen::Index r = std::min<Eigen::Index>(rank, pca.components());

        double max_change = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const Eigen::VectorXd coeff =
                pca.basis.leftCols(r).transpose() * (filled[j] - pca.mean);
            const Eigen::VectorXd recon = pca.mean + pca.basis.leftCols(r) * coeff;
            for (Eigen::Index i = 0; i < dim; ++i) {
                if (!observed[j][static_cast<std::size_t>(i)]) {
                    max_change = std::max(max_change, std::abs(recon(i) - filled[j](i)));
                    filled[j](i) = recon(i);
                }
            }
        }
        if (max_change < tol) break;
    }
    return filled;
}

void save_linear_model(const LinearModel& model, const std::string& path) {
    Container c;
    c.meta["type"] = "linear_model";
    c.meta["kind"] = model.kind == ModelKind::Shape ? "shape" : "texture";
    c.meta["topology_hash"] = model.topology_hash;
    c.matrices.emplace_back("mean", model.mean);
    c.matrices.emplace_back("basis", model.basis);
    c.matrices.emplace_back("eigenvalues", model.eigenvalues);
    c.save(path);
}

LinearModel load_linear_model(const std::string& path) {
    const Container c = Container::load(path);
    if (c.meta.value("type", "") != "linear_model")
        throw DataError(path + ": container does not hold a linear model");
    LinearModel model;
    model.kind = c.meta.value("kind", "shape") == "texture" ? ModelKind::Texture : ModelKind::Shape;
    model.topology_hash = c.meta.value("topology_hash", std::uint64_t{0});
    model.mean = c.matrix("mean");
    model.basis = c.matrix("basis");
    model.eigenvalues = c.matrix("eigenvalues");
    model.validate();
    return model;
}

} // namespace facesyn
