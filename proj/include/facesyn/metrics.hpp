#pragma once

#include <Eigen/Core>
#include <vector>

namespace facesyn {

// Evaluation measures for valence/arousal regression and expression
// classification. All moments are population moments (1/N), used
// consistently so the CCC/PCC ratio identities hold.

double metric_mse(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Concordance correlation: 2 s_xy / (s_x^2 + s_y^2 + (mean_x - mean_y)^2).
// Throws NumericalError when the denominator vanishes (both series constant
// with equal means).
double metric_ccc(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Pearson correlation; throws NumericalError if either variance is zero.
double metric_pcc(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Sign agreement with inclusive zero: x=0 agrees with either sign.
double metric_sagr(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

// Confusion matrix: rows = truth, columns = prediction, raw counts.
Eigen::MatrixXd confusion_matrix(const std::vector<int>& pred, const std::vector<int>& truth,
                                 int num_classes);

// Unweighted mean of per-class F1; a class with neither predictions nor true
// samples contributes 0.
double f1_macro(const std::vector<int>& pred, const std::vector<int>& truth, int num_classes);

// Mean of the row-normalized diagonal (per-class recall); empty rows count 0.
double diag_average(const Eigen::MatrixXd& confusion);

struct VAGrid {
    int bins = 0;                // B; cells tile [-1,1]^2
    Eigen::MatrixXd cell_mse;    // B x B, NaN marks empty cells
    Eigen::MatrixXi cell_count;  // B x B

    // Cell index of a (valence, arousal) pair; the closed upper edge +1 falls
    // in the last cell.
    std::pair<int, int> cell_of(double v, double a) const;
};

// Bins samples by TRUE va; per-cell MSE averages the squared valence and
// arousal errors jointly: mean of ((dv^2 + da^2)/2).
VAGrid va_grid_mse(const Eigen::MatrixX2d& pred_va, const Eigen::MatrixX2d& true_va, int bins);

} // namespace facesyn
