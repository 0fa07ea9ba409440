#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "facesyn/errors.hpp"
#include "facesyn/linear_model.hpp"
#include "facesyn/rng.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>
#include <filesystem>

using namespace facesyn;

namespace {

std::vector<Eigen::VectorXd> random_samples(Xoshiro256pp& rng, int m, int dim, double lo = -1,
                                            double hi = 1) {
    std::vector<Eigen::VectorXd> s;
    for (int i = 0; i < m; ++i) s.push_back(oracles::random_vector(rng, dim, lo, hi));
    return s;
}

} // namespace

TEST_CASE("exact 2D affine subspace is recovered with k = 2") {
    Xoshiro256pp rng(1);
    const int dim = 60;
    const Eigen::VectorXd origin = oracles::random_vector(rng, dim, -1, 1);
    const Eigen::VectorXd dir1 = oracles::random_vector(rng, dim, -1, 1);
    const Eigen::VectorXd dir2 = oracles::random_vector(rng, dim, -1, 1);

    std::vector<Eigen::VectorXd> samples;
    for (int i = 0; i < 10; ++i)
        samples.push_back(origin + rng.uniform(-2, 2) * dir1 + rng.uniform(-2, 2) * dir2);

    const LinearModel model = build_pca_model(samples, 0.995, ModelKind::Shape);
    CHECK(model.components() == 2);
    for (const auto& s : samples) {
        const Eigen::VectorXd recon = model.instance(model.project(s));
        CHECK((recon - s).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("variance fraction 1.0 keeps full rank and reconstructs exactly") {
    Xoshiro256pp rng(2);
    const auto samples = random_samples(rng, 8, 40);
    const LinearModel model = build_pca_model(samples, 1.0, ModelKind::Shape);
    CHECK(model.components() == 7); // rank of 8 centered samples
    for (const auto& s : samples) {
        const Eigen::VectorXd recon = model.instance(model.project(s));
        CHECK((recon - s).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("eigenvalues match a full covariance eigendecomposition oracle") {
    Xoshiro256pp rng(3);
    const int m = 20, dim = 150;
    const auto samples = random_samples(rng, m, dim);
    const LinearModel model = build_pca_model(samples, 1.0, ModelKind::Shape);

    // Oracle: dense eigendecomposition of the (dim x dim) sample covariance.
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& s : samples) mean += s;
    mean /= m;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& s : samples) cov += (s - mean) * (s - mean).transpose();
    cov /= (m - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);

    REQUIRE(model.components() == m - 1);
    for (Eigen::Index i = 0; i < model.components(); ++i) {
        const double expected = eig.eigenvalues()(dim - 1 - i);
        CHECK(std::abs(model.eigenvalues(i) - expected) / expected < 1e-8);
        // Basis columns match up to sign.
        const Eigen::VectorXd v = eig.eigenvectors().col(dim - 1 - i);
        const double dot = std::abs(v.dot(model.basis.col(i)));
        CHECK(dot == doctest::Approx(1.0).epsilon(1e-7));
    }
}

TEST_CASE("identical samples raise a zero-variance error") {
    std::vector<Eigen::VectorXd> samples(4, Eigen::VectorXd::Ones(12));
    CHECK_THROWS_AS(build_pca_model(samples, 0.995, ModelKind::Shape), DataError);
}

TEST_CASE("instance evaluates mean and single basis directions") {
    Xoshiro256pp rng(4);
    const auto samples = random_samples(rng, 6, 30);
    const LinearModel model = build_pca_model(samples, 1.0, ModelKind::Shape);

    CHECK((model.instance(Eigen::VectorXd::Zero(model.components())) - model.mean)
              .cwiseAbs()
              .maxCoeff() == 0.0);

    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(model.components());
    e1(1) = 2.5;
    CHECK((model.instance(e1) - (model.mean + 2.5 * model.basis.col(1))).cwiseAbs().maxCoeff() <
          1e-12);

    // Affine linearity: instance(p1) + instance(p2) - mean = instance(p1+p2).
    const Eigen::VectorXd p1 = oracles::random_vector(rng, model.components(), -1, 1);
    const Eigen::VectorXd p2 = oracles::random_vector(rng, model.components(), -1, 1);
    const Eigen::VectorXd lhs = model.instance(p1) + model.instance(p2) - model.mean;
    CHECK((lhs - model.instance(p1 + p2)).cwiseAbs().maxCoeff() < 1e-12);

    CHECK_THROWS_AS(model.instance(Eigen::VectorXd::Zero(model.components() + 1)), DataError);
}

TEST_CASE("sampling lambda = sqrt(eigenvalue) * z reproduces the spectrum") {
    Xoshiro256pp rng(5);
    const auto samples = random_samples(rng, 10, 36);
    const LinearModel model = build_pca_model(samples, 1.0, ModelKind::Texture);

    const int draws = 1000;
    Eigen::MatrixXd coords(draws, model.components());
    for (int d = 0; d < draws; ++d) {
        Eigen::VectorXd lam(model.components());
        for (Eigen::Index i = 0; i < model.components(); ++i)
            lam(i) = std::sqrt(model.eigenvalues(i)) * rng.next_normal();
        coords.row(d) = model.project(model.instance(lam)).transpose();
    }
    for (Eigen::Index i = 0; i < model.components(); ++i) {
        const double mean = coords.col(i).mean();
        const double var =
            (coords.col(i).array() - mean).square().sum() / (draws - 1);
        CHECK(var > 0.8 * model.eigenvalues(i));
        CHECK(var < 1.2 * model.eigenvalues(i));
    }
}

TEST_CASE("reconstruction error is non-increasing in k") {
    Xoshiro256pp rng(6);
    const auto samples = random_samples(rng, 12, 48);
    const LinearModel model = build_pca_model(samples, 1.0, ModelKind::Shape);

    const Eigen::VectorXd probe = oracles::random_vector(rng, 48, -1, 1);
    double prev = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 1; k <= model.components(); ++k) {
        const Eigen::MatrixXd basis = model.basis.leftCols(k);
        const Eigen::VectorXd recon = model.mean + basis * (basis.transpose() * (probe - model.mean));
        const double err = (recon - probe).norm();
        CHECK(err <= prev + 1e-12);
        prev = err;
    }
}

TEST_CASE("build is invariant to sample order") {
    Xoshiro256pp rng(7);
    auto samples = random_samples(rng, 9, 33);
    const LinearModel a = build_pca_model(samples, 1.0, ModelKind::Shape);
    std::reverse(samples.begin(), samples.end());
    const LinearModel b = build_pca_model(samples, 1.0, ModelKind::Shape);
    CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((a.eigenvalues - b.eigenvalues).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((a.basis - b.basis).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("imputation returns unchanged samples when nothing is missing") {
    Xoshiro256pp rng(8);
    const auto samples = random_samples(rng, 5, 20);
    std::vector<std::vector<bool>> mask(5, std::vector<bool>(20, true));
    const auto out = impute_missing(samples, mask, 2);
    for (int i = 0; i < 5; ++i)
        CHECK((out[static_cast<std::size_t>(i)] - samples[static_cast<std::size_t>(i)])
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
}

TEST_CASE("imputation recovers hidden entries of rank-1 data") {
    Xoshiro256pp rng(9);
    const int m = 15, dim = 40;
    const Eigen::VectorXd u = oracles::random_vector(rng, dim, 0.5, 1.5);
    std::vector<Eigen::VectorXd> samples;
    for (int j = 0; j < m; ++j) samples.push_back(rng.uniform(-2, 2) * u);

    auto truth = samples;
    std::vector<std::vector<bool>> mask(m, std::vector<bool>(dim, true));
    int hidden = 0;
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < dim; ++i)
            if (rng.next_double() < 0.10) {
                mask[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = false;
                samples[static_cast<std::size_t>(j)](i) = 0.0;
                ++hidden;
            }
    REQUIRE(hidden > 0);

    const auto out = impute_missing(samples, mask, 1, 1e-9, 200);
    double max_err = 0;
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < dim; ++i)
            if (!mask[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)])
                max_err = std::max(max_err, std::abs(out[static_cast<std::size_t>(j)](i) -
                                                     truth[static_cast<std::size_t>(j)](i)));
    CHECK(max_err < 1e-3);
}

TEST_CASE("a fully missing sample converges to the reconstruction of the mean") {
    Xoshiro256pp rng(10);
    const int m = 8, dim = 24;
    auto samples = random_samples(rng, m, dim);
    std::vector<std::vector<bool>> mask(m, std::vector<bool>(dim, true));
    mask[0] = std::vector<bool>(dim, false);
    samples[0].setZero();

    const auto out = impute_missing(samples, mask, 2, 1e-9, 200);
    // The filled sample carries no information of its own; it should sit at
    // the (fitted) mean of the others, i.e. its rank-2 projection is itself.
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (int j = 0; j < m; ++j) mean += out[static_cast<std::size_t>(j)];
    mean /= m;
    CHECK((out[0] - mean).norm() < 0.3 * mean.norm() + 1e-6);
}

TEST_CASE("a coordinate missing everywhere is unimputable") {
    Xoshiro256pp rng(11);
    auto samples = random_samples(rng, 4, 10);
    std::vector<std::vector<bool>> mask(4, std::vector<bool>(10, true));
    for (auto& row : mask) row[3] = false;
    CHECK_THROWS_AS(impute_missing(samples, mask, 1), DataError);
}

TEST_CASE("model container round trip") {
    Xoshiro256pp rng(12);
    const auto samples = random_samples(rng, 7, 27);
    LinearModel model = build_pca_model(samples, 1.0, ModelKind::Texture, 0xabcdef12345ULL);

    const auto path = std::filesystem::temp_directory_path() / "facesyn_model.bin";
    save_linear_model(model, path.string());
    const LinearModel back = load_linear_model(path.string());
    CHECK(back.kind == ModelKind::Texture);
    CHECK(back.topology_hash == model.topology_hash);
    CHECK((back.mean - model.mean).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.basis - model.basis).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.eigenvalues - model.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
    std::filesystem::remove(path);
}
