#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "facesyn/errors.hpp"
#include "facesyn/metrics.hpp"
#include "facesyn/rng.hpp"
#include "oracles.hpp"

using namespace facesyn;

TEST_CASE("ccc of a series with itself is 1; negation of zero-mean is -1") {
    Xoshiro256pp rng(1);
    const Eigen::VectorXd x = oracles::random_vector(rng, 50, -1, 1);
    CHECK(metric_ccc(x, x) == doctest::Approx(1.0).epsilon(1e-12));

    Eigen::VectorXd z = x;
    z.array() -= z.mean();
    CHECK(metric_ccc(z, (-z).eval()) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("ccc/pcc/mse/sagr match direct-formula oracles") {
    Xoshiro256pp rng(2);
    for (int trial = 0; trial < 200; ++trial) {
        const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng.next_u64() % 60);
        const Eigen::VectorXd x = oracles::random_vector(rng, n, -1, 1);
        const Eigen::VectorXd y = oracles::random_vector(rng, n, -1, 1);
        CHECK(metric_ccc(x, y) == doctest::Approx(oracles::ccc_direct(x, y)).epsilon(1e-12));
        CHECK(metric_pcc(x, y) == doctest::Approx(oracles::pcc_direct(x, y)).epsilon(1e-12));
        CHECK(metric_mse(x, y) == doctest::Approx(oracles::mse_direct(x, y)).epsilon(1e-12));
        CHECK(metric_sagr(x, y) == doctest::Approx(oracles::sagr_direct(x, y)).epsilon(1e-12));
    }
}

TEST_CASE("|ccc| <= |pcc| and ccc is symmetric") {
    Xoshiro256pp rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::VectorXd x = oracles::random_vector(rng, 40, -1, 1);
        const Eigen::VectorXd y = oracles::random_vector(rng, 40, -1, 1);
        CHECK(std::abs(metric_ccc(x, y)) <= std::abs(metric_pcc(x, y)) + 1e-12);
        CHECK(metric_ccc(x, y) == doctest::Approx(metric_ccc(y, x)).epsilon(1e-12));
    }
}

TEST_CASE("pcc is affine invariant") {
    Xoshiro256pp rng(4);
    const Eigen::VectorXd x = oracles::random_vector(rng, 30, -1, 1);
    const Eigen::VectorXd y = 2.0 * x.array() + 3.0;
    CHECK(metric_pcc(x, y) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(metric_pcc(x, (-x).eval()) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("degenerate metric inputs raise undefined-metric errors") {
    const Eigen::VectorXd c = Eigen::VectorXd::Constant(5, 0.7);
    CHECK_THROWS_AS(metric_ccc(c, c), NumericalError);
    Eigen::VectorXd x(5);
    x << 1, 2, 3, 4, 5;
    CHECK_THROWS_AS(metric_pcc(x, c), NumericalError);
    // Constant but different means: CCC is defined (0), not an error.
    const Eigen::VectorXd c2 = Eigen::VectorXd::Constant(5, 0.2);
    CHECK(metric_ccc(c, c2) == doctest::Approx(0.0));
}

TEST_CASE("mse basics") {
    Eigen::VectorXd x(4), zero(4), one(4);
    x << 0.1, -0.4, 0.2, 0.9;
    zero.setZero();
    one.setOnes();
    CHECK(metric_mse(x, x) == 0.0);
    CHECK(metric_mse(zero, one) == doctest::Approx(1.0));
}

TEST_CASE("sagr inclusive-zero rule") {
    Eigen::VectorXd x(3), y(3);
    x << 0.0, 0.5, -0.5;
    y << -1.0, 0.5, 0.5;
    // x=0 vs y=-1 agrees (both <= 0); the last pair disagrees.
    CHECK(metric_sagr(x, y) == doctest::Approx(2.0 / 3.0));

    Eigen::VectorXd same(4);
    same << -1, 1, -1, 1;
    CHECK(metric_sagr(same, same) == 1.0);
}

TEST_CASE("sagr and mse are invariant under a common permutation") {
    Xoshiro256pp rng(5);
    const Eigen::Index n = 31;
    const Eigen::VectorXd x = oracles::random_vector(rng, n, -1, 1);
    const Eigen::VectorXd y = oracles::random_vector(rng, n, -1, 1);
    Eigen::VectorXd xp(n), yp(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        xp(i) = x((i * 7) % n);
        yp(i) = y((i * 7) % n);
    }
    CHECK(metric_mse(xp, yp) == doctest::Approx(metric_mse(x, y)).epsilon(1e-12));
    CHECK(metric_sagr(xp, yp) == doctest::Approx(metric_sagr(x, y)).epsilon(1e-12));
}

TEST_CASE("perfect prediction scores F1 = 1 and diagonal average 1") {
    const std::vector<int> labels = {0, 1, 2, 1, 0, 2, 2};
    CHECK(f1_macro(labels, labels, 3) == doctest::Approx(1.0));
    CHECK(diag_average(confusion_matrix(labels, labels, 3)) == doctest::Approx(1.0));
}

TEST_CASE("all-one-class prediction on balanced two-class data gives macro F1 = 1/3") {
    const std::vector<int> truth = {0, 0, 1, 1};
    const std::vector<int> pred = {0, 0, 0, 0};
    CHECK(f1_macro(pred, truth, 2) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("class absent from both prediction and truth contributes zero") {
    const std::vector<int> truth = {0, 0, 1, 1};
    const std::vector<int> pred = {0, 0, 1, 1};
    // Class 2 never appears: perfect F1 on classes 0/1, 0 for class 2.
    CHECK(f1_macro(pred, truth, 3) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("confusion matrix rows are truth, columns are prediction") {
    const std::vector<int> truth = {0, 0, 1};
    const std::vector<int> pred = {1, 0, 1};
    const Eigen::MatrixXd m = confusion_matrix(pred, truth, 2);
    CHECK(m(0, 0) == 1.0);
    CHECK(m(0, 1) == 1.0);
    CHECK(m(1, 1) == 1.0);
    CHECK(m(1, 0) == 0.0);
}

TEST_CASE("va grid: single cell, perfect prediction") {
    Eigen::MatrixX2d va(3, 2);
    va << 0.55, 0.55, 0.6, 0.52, 0.58, 0.57;
    const VAGrid grid = va_grid_mse(va, va, 4);
    const auto [cv, ca] = grid.cell_of(0.55, 0.55);
    CHECK(grid.cell_mse(cv, ca) == 0.0);
    CHECK(grid.cell_count.sum() == 3);
    int empty = 0;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            if (grid.cell_count(r, c) == 0) {
                ++empty;
                CHECK(std::isnan(grid.cell_mse(r, c)));
            }
    CHECK(empty == 15);
}

TEST_CASE("uniform valence shift of 0.1 gives 0.005 in every nonempty cell") {
    Xoshiro256pp rng(6);
    Eigen::MatrixX2d truth(200, 2);
    for (int i = 0; i < 200; ++i)
        truth.row(i) << rng.uniform(-0.99, 0.89), rng.uniform(-0.99, 0.99);
    Eigen::MatrixX2d pred = truth;
    pred.col(0).array() += 0.1;

    const VAGrid grid = va_grid_mse(pred, truth, 5);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c)
            if (grid.cell_count(r, c) > 0)
                CHECK(grid.cell_mse(r, c) == doctest::Approx(0.005).epsilon(1e-12));
}

TEST_CASE("B = 1 reduces to the global joint MSE, and counts weight correctly") {
    Xoshiro256pp rng(7);
    const int n = 150;
    Eigen::MatrixX2d truth(n, 2), pred(n, 2);
    for (int i = 0; i < n; ++i) {
        truth.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1);
        pred.row(i) << rng.uniform(-1, 1), rng.uniform(-1, 1);
    }
    const double global_joint =
        (metric_mse(pred.col(0), truth.col(0)) + metric_mse(pred.col(1), truth.col(1))) / 2.0;

    const VAGrid one = va_grid_mse(pred, truth, 1);
    CHECK(one.cell_mse(0, 0) == doctest::Approx(global_joint).epsilon(1e-12));

    // Sum of count * cell MSE over nonempty cells equals N * global joint MSE.
    const VAGrid grid = va_grid_mse(pred, truth, 7);
    double weighted = 0;
    for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 7; ++c)
            if (grid.cell_count(r, c) > 0) weighted += grid.cell_count(r, c) * grid.cell_mse(r, c);
    CHECK(weighted == doctest::Approx(n * global_joint).epsilon(1e-9));
}
