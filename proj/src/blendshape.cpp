#include "facesyn/blendshape.hpp"

#include "facesyn/container.hpp"
#include "facesyn/errors.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace facesyn {

namespace {

// Project one column onto its constraint set, rescaling the matching
// coefficient row inversely so the product B C is untouched. Zero columns are
// left to the caller (they keep their previous, feasible value).
bool project_column(Eigen::VectorXd& col, Eigen::RowVectorXd& coeff_row,
                    BlendshapeConstraint constraint) {
    switch (constraint) {
        case BlendshapeConstraint::None:
            return true;
        case BlendshapeConstraint::NonNegative:
            col = col.cwiseMax(0.0);
            [[fallthrough]];
        case BlendshapeConstraint::TwoSided: {
            const double scale = col.cwiseAbs().maxCoeff();
            if (scale <= 0.0) return false;
            col /= scale;
            coeff_row *= scale;
            return true;
        }
    }
    return false;
}

double objective(const Eigen::MatrixXd& d, const Eigen::MatrixXd& b, const Eigen::MatrixXd& c,
                 double w) {
    double omega = 0.0;
    for (Eigen::Index k = 0; k < c.rows(); ++k) omega += c.row(k).norm();
    return (d - b * c).squaredNorm() + w * omega;
}

} // namespace

void BlendshapeModel::validate() const {
    if (!components.allFinite()) throw DataError("blendshape components must be finite");
    for (Eigen::Index k = 0; k < components.cols(); ++k) {
        const auto col = components.col(k);
        switch (constraint) {
            case BlendshapeConstraint::TwoSided:
                if (std::abs(col.cwiseAbs().maxCoeff() - 1.0) > 1e-9)
                    throw DataError("two-sided constraint violated on component " + std::to_string(k));
                break;
            case BlendshapeConstraint::NonNegative:
                if (col.minCoeff() < 0.0 || std::abs(col.maxCoeff() - 1.0) > 1e-9)
                    throw DataError("nonnegative constraint violated on component " + std::to_string(k));
                break;
            case BlendshapeConstraint::None:
                break;
        }
    }
}

Eigen::VectorXd BlendshapeModel::reconstruct(const Eigen::VectorXd& coeffs,
                                             const Eigen::VectorXd& neutral) const {
    if (coeffs.size() != components.cols())
        throw DataError("blendshape coefficient count mismatch");
    if (neutral.size() != components.rows())
        throw DataError("neutral shape dimension mismatch");
    return neutral + components * coeffs;
}

BlendshapeBuildResult build_blendshapes(const Eigen::MatrixXd& d, Eigen::Index h,
                                        double sparsity_weight, BlendshapeConstraint constraint,
                                        int max_alternations, double rel_tol,
                                        std::uint64_t topology_hash) {
    const Eigen::Index m = d.cols();
    if (h < 1 || h > m)
        throw DataError("component count must satisfy 1 <= h <= sample count");
    if (sparsity_weight < 0) throw DataError("sparsity weight must be nonnegative");

    BlendshapeBuildResult res;
    res.model.constraint = constraint;
    res.model.sparsity_weight = sparsity_weight;
    res.model.topology_hash = topology_hash;

    if (d.isZero(0.0)) {
        // Nothing to factor; emit unit-axis components so constraints hold.
        res.model.components = Eigen::MatrixXd::Zero(d.rows(), h);
        for (Eigen::Index k = 0; k < h; ++k)
            res.model.components(k % d.rows(), k) = 1.0;
        res.coefficients = Eigen::MatrixXd::Zero(h, m);
        res.objective_trace.push_back(0.0);
        return res;
    }

    // Init: top-h left singular vectors of D (deterministic sign), C = B^T D.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(d, Eigen::ComputeThinU);
    Eigen::MatrixXd b = svd.matrixU().leftCols(h);
    for (Eigen::Index k = 0; k < h; ++k) {
        for (Eigen::Index r = 0; r < b.rows(); ++r) {
            if (std::abs(b(r, k)) > 1e-12) {
                if (b(r, k) < 0) b.col(k) = -b.col(k);
                break;
            }
        }
    }
    Eigen::MatrixXd c = b.transpose() * d;
    for (Eigen::Index k = 0; k < h; ++k) {
        Eigen::VectorXd col = b.col(k);
        Eigen::RowVectorXd row = c.row(k);
        if (project_column(col, row, constraint)) {
            b.col(k) = col;
            c.row(k) = row;
        }
    }

    double obj = objective(d, b, c, sparsity_weight);
    res.objective_trace.push_back(obj);

    for (int it = 0; it < max_alternations; ++it) {
        const Eigen::MatrixXd b_prev = b;
        const Eigen::MatrixXd c_prev = c;

        // (a) C update: block coordinate descent over rows with group
        // soft-thresholding. For row k with residual R = D - sum_{j!=k} B_j C_j:
        //   c_k = (1 - w / (2 ||B_k^T R||)) * B_k^T R / ||B_k||^2, or 0.
        Eigen::MatrixXd residual = d - b * c;
        for (Eigen::Index k = 0; k < h; ++k) {
            residual += b.col(k) * c.row(k);
            const Eigen::RowVectorXd g = b.col(k).transpose() * residual;
            const double bn2 = b.col(k).squaredNorm();
            const double gn = g.norm();
            if (bn2 <= 0.0 || gn <= sparsity_weight / 2.0) {
                c.row(k).setZero();
            } else {
                c.row(k) = (1.0 - sparsity_weight / (2.0 * gn)) * g / bn2;
            }
            residual -= b.col(k) * c.row(k);
        }

        // (b) B update: joint least squares over columns with nonzero
        // coefficient rows, then constraint projection with scale exchange.
        std::vector<Eigen::Index> active;
        for (Eigen::Index k = 0; k < h; ++k)
            if (c.row(k).norm() > 0) active.push_back(k);
        if (!active.empty()) {
            Eigen::MatrixXd ca(active.size(), m);
            for (std::size_t i = 0; i < active.size(); ++i) ca.row(i) = c.row(active[i]);
            const Eigen::MatrixXd gram = ca * ca.transpose();
            Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
            if (ldlt.info() == Eigen::Success) {
                const Eigen::MatrixXd ba = ldlt.solve(ca * d.transpose()).transpose();
                if (ba.allFinite()) {
                    for (std::size_t i = 0; i < active.size(); ++i) {
                        Eigen::VectorXd col = ba.col(i);
                        Eigen::RowVectorXd row = c.row(active[i]);
                        if (project_column(col, row, constraint)) {
                            b.col(active[i]) = col;
                            c.row(active[i]) = row;
                        }
                    }
                }
            }
        }

        const double new_obj = objective(d, b, c, sparsity_weight);
        if (new_obj > obj) {
            // Projection bumped the penalty past the data-term gain; keep the
            // previous iterate and stop.
            b = b_prev;
            c = c_prev;
            break;
        }
        res.objective_trace.push_back(new_obj);
        res.alternations = it + 1;
        const double rel = (obj - new_obj) / std::max(obj, 1e-300);
        obj = new_obj;
        if (rel < rel_tol) break;
    }

    res.model.components = b;
    res.coefficients = c;
    return res;
}

void save_blendshape_model(const BlendshapeModel& model, const std::string& path) {
    Container c;
    c.meta["type"] = "blendshape_model";
    c.meta["kind"] = "blendshape";
    c.meta["constraint"] = model.constraint == BlendshapeConstraint::TwoSided ? "two_sided"
                           : model.constraint == BlendshapeConstraint::NonNegative ? "nonnegative"
                                                                                   : "none";
    c.meta["sparsity_weight"] = model.sparsity_weight;
    c.meta["topology_hash"] = model.topology_hash;
    c.matrices.emplace_back("components", model.components);
    c.save(path);
}

BlendshapeModel load_blendshape_model(const std::string& path) {
    const Container c = Container::load(path);
    if (c.meta.value("type", "") != "blendshape_model")
        throw DataError(path + ": container does not hold a blendshape model");
    BlendshapeModel model;
    const std::string constraint = c.meta.value("constraint", "two_sided");
    model.constraint = constraint == "nonnegative" ? BlendshapeConstraint::NonNegative
                       : constraint == "none" ? BlendshapeConstraint::None
                                              : BlendshapeConstraint::TwoSided;
    model.sparsity_weight = c.meta.value("sparsity_weight", 0.0);
    model.topology_hash = c.meta.value("topology_hash", std::uint64_t{0});
    model.components = c.matrix("components");
    model.validate();
    return model;
}

} // namespace facesyn
