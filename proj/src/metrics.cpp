#include "facesyn/metrics.hpp"

#include "facesyn/errors.hpp"

#include <cmath>
#include <limits>

namespace facesyn {

namespace {

void check_pair(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() == 0) throw DataError("metric input series is empty");
    if (x.size() != y.size()) throw DataError("metric input series differ in length");
}

struct Moments {
    double mean_x, mean_y, var_x, var_y, cov;
};

Moments population_moments(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const double n = static_cast<double>(x.size());
    Moments m{};
    m.mean_x = x.mean();
    m.mean_y = y.mean();
    const Eigen::VectorXd xc = x.array() - m.mean_x;
    const Eigen::VectorXd yc = y.array() - m.mean_y;
    m.var_x = xc.squaredNorm() / n;
    m.var_y = yc.squaredNorm() / n;
    m.cov = xc.dot(yc) / n;
    return m;
}

} // namespace

double metric_mse(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    check_pair(x, y);
    return (x - y).squaredNorm() / static_cast<double>(x.size());
}

double metric_ccc(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    check_pair(x, y);
    const Moments m = population_moments(x, y);
    const double mean_diff = m.mean_x - m.mean_y;
    const double denom = m.var_x + m.var_y + mean_diff * mean_diff;
    if (denom == 0.0)
        throw NumericalError("CCC undefined: both series constant with equal means");
    return 2.0 * m.cov / denom;
}

double metric_pcc(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    check_pair(x, y);
    const Moments m = population_moments(x, y);
    if (m.var_x == 0.0 || m.var_y == 0.0)
        throw NumericalError("PCC undefined: a series has zero variance");
    return m.cov / std::sqrt(m.var_x * m.var_y);
}

double metric_sagr(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    check_pair(x, y);
    Eigen::Index agree = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const bool both_nonneg = x(i) >= 0.0 && y(i) >= 0.0;
        const bool both_nonpos = x(i) <= 0.0 && y(i) <= 0.0;
        if (both_nonneg || both_nonpos) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(x.size());
}

Eigen::MatrixXd confusion_matrix(const std::vector<int>& pred, const std::vector<int>& truth,
                                 int num_classes) {
    if (pred.size() != truth.size()) throw DataError("prediction/truth lengths differ");
    if (num_classes < 1) throw DataError("num_classes must be >= 1");
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(num_classes, num_classes);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < 0 || pred[i] >= num_classes || truth[i] < 0 || truth[i] >= num_classes)
            throw DataError("class id out of range at sample " + std::to_string(i));
        m(truth[i], pred[i]) += 1.0;
    }
    return m;
}

double f1_macro(const std::vector<int>& pred, const std::vector<int>& truth, int num_classes) {
    const Eigen::MatrixXd m = confusion_matrix(pred, truth, num_classes);
    double sum = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        const double tp = m(c, c);
        const double predicted = m.col(c).sum();
        const double actual = m.row(c).sum();
        double f1 = 0.0;
        if (predicted > 0 && actual > 0) {
            const double precision = tp / predicted;
            const double recall = tp / actual;
            if (precision + recall > 0) f1 = 2.0 * precision * recall / (precision + recall);
        }
        sum += f1;
    }
    return sum / num_classes;
}

double diag_average(const Eigen::MatrixXd& confusion) {
    if (confusion.rows() != confusion.cols() || confusion.rows() == 0)
        throw DataError("confusion matrix must be square and nonempty");
    double sum = 0.0;
    for (Eigen::Index r = 0; r < confusion.rows(); ++r) {
        const double row_total = confusion.row(r).sum();
        if (row_total > 0) sum += confusion(r, r) / row_total;
    }
    return sum / static_cast<double>(confusion.rows());
}

std::pair<int, int> VAGrid::cell_of(double v, double a) const {
    auto idx = [this](double t) {
        const int i = static_cast<int>(std::floor((t + 1.0) / 2.0 * bins));
        return std::min(std::max(i, 0), bins - 1);
    };
    return {idx(v), idx(a)};
}

VAGrid va_grid_mse(const Eigen::MatrixX2d& pred_va, const Eigen::MatrixX2d& true_va, int bins) {
    if (bins < 1) throw DataError("va_grid_mse needs bins >= 1");
    if (pred_va.rows() != true_va.rows()) throw DataError("prediction/truth lengths differ");
    VAGrid grid;
    grid.bins = bins;
    grid.cell_mse = Eigen::MatrixXd::Zero(bins, bins);
    grid.cell_count = Eigen::MatrixXi::Zero(bins, bins);

    for (Eigen::Index i = 0; i < true_va.rows(); ++i) {
        const auto [cv, ca] = grid.cell_of(true_va(i, 0), true_va(i, 1));
        const double dv = pred_va(i, 0) - true_va(i, 0);
        const double da = pred_va(i, 1) - true_va(i, 1);
        grid.cell_mse(cv, ca) += (dv * dv + da * da) / 2.0;
        grid.cell_count(cv, ca) += 1;
    }
    for (int r = 0; r < bins; ++r)
        for (int c = 0; c < bins; ++c)
            grid.cell_mse(r, c) = grid.cell_count(r, c) > 0
                                      ? grid.cell_mse(r, c) / grid.cell_count(r, c)
                                      : std::numeric_limits<double>::quiet_NaN();
    return grid;
}

} // namespace facesyn
