#include <doctest.h>

#include <cmath>
#include <cstring>

#include "cefr/error.hpp"
#include "cefr/estimator.hpp"

using namespace cefr;

namespace {

BasisMatrix basis_of(std::size_t degree, const Eigen::MatrixXd& v) {
    return build_basis({static_cast<std::size_t>(v.cols()), degree, true}, v);
}

bool bitwise_equal(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

TEST_CASE("constant basis gives the ratio of means") {
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(3, 1);
    SeriesRatioFit fit = fit_series_ratio(basis_of(0, v), {1, 2, 3}, {1, 1, 2}, 0.0);
    REQUIRE(fit.beta.size() == 1);
    CHECK(fit.beta(0) == doctest::Approx(1.5).epsilon(1e-15));
    Eigen::MatrixXd grid(3, 1);
    grid << -4, 0, 9;
    Eigen::VectorXd th = predict_theta(fit, grid);
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(th(j) == fit.beta(0));
}

TEST_CASE("predict_theta is a dot product with the basis") {
    SeriesRatioFit fit;
    fit.basis = {1, 1, true};
    fit.beta = Eigen::Vector2d(1, 2);
    Eigen::MatrixXd v(2, 1);
    v << 3, 0;
    Eigen::VectorXd th = predict_theta(fit, v);
    CHECK(th(0) == 7.0);
    CHECK(th(1) == 1.0);
    try {
        predict_theta(fit, Eigen::MatrixXd::Zero(1, 2));
        FAIL("expected input error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::input);
    }
}

TEST_CASE("unit denominator reduces to least squares") {
    SeededRng rng(3);
    const Eigen::Index n = 500;
    Eigen::MatrixXd v(n, 2);
    std::vector<double> u(n), t(n, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        v(i, 0) = rng.normal();
        v(i, 1) = rng.uniform();
        u[static_cast<std::size_t>(i)] = std::sin(v(i, 0)) + v(i, 1) + rng.normal();
    }
    BasisMatrix p = basis_of(3, v);
    SeriesRatioFit fit = fit_series_ratio(p, u, t, 0.0);
    Eigen::VectorXd uu = Eigen::Map<const Eigen::VectorXd>(u.data(), n);
    Eigen::VectorXd ols = p.values.colPivHouseholderQr().solve(uu);
    CHECK((fit.beta - ols).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("huge ridge shrinks beta to zero") {
    SeededRng rng(4);
    Eigen::MatrixXd v(100, 1);
    std::vector<double> u(100), t(100);
    for (int i = 0; i < 100; ++i) {
        v(i, 0) = rng.normal();
        u[static_cast<std::size_t>(i)] = 5.0 + rng.normal();
        t[static_cast<std::size_t>(i)] = 1.0 + rng.uniform();
    }
    BasisMatrix p = basis_of(2, v);
    SeriesRatioFit fit = fit_series_ratio(p, u, t, 1e12);
    Eigen::VectorXd pu = weighted_sum(p.values, u) / 100.0;
    CHECK(fit.beta.norm() <= pu.norm() / 1e12 + 1e-9);
}

TEST_CASE("q_hat is stored unregularized") {
    Eigen::MatrixXd v(4, 1);
    v << 0, 1, 2, 3;
    BasisMatrix p = basis_of(1, v);
    std::vector<double> t{1, 2, 1, 2};
    SeriesRatioFit a = fit_series_ratio(p, {1, 2, 3, 4}, t, 0.0);
    SeriesRatioFit b = fit_series_ratio(p, {1, 2, 3, 4}, t, 0.5);
    CHECK(a.q_hat.matrix() == b.q_hat.matrix());
    Eigen::MatrixXd q = weighted_gram(p.values, t) / 4.0;
    CHECK((a.q_hat.matrix() - q).cwiseAbs().maxCoeff() < 1e-15);
    Eigen::VectorXd resid = (b.q_hat.matrix() + 0.5 * Eigen::MatrixXd::Identity(2, 2)) * b.beta - b.pu_hat;
    CHECK(resid.norm() < 1e-12);
}

TEST_CASE("singular system names a remedy") {
    Eigen::MatrixXd v = Eigen::MatrixXd::Constant(10, 1, 2.0);
    try {
        fit_series_ratio(basis_of(1, v), std::vector<double>(10, 1.0), std::vector<double>(10, 1.0), 0.0);
        FAIL("expected singular error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::singular);
        CHECK(std::string(e.what()).find("lambda") != std::string::npos);
    }
}

TEST_CASE("separate-sample fit equals the joint fit on one sample") {
    SeededRng rng(6);
    Eigen::MatrixXd v(300, 2);
    std::vector<double> u(300), t(300);
    for (int i = 0; i < 300; ++i) {
        v(i, 0) = rng.normal();
        v(i, 1) = rng.normal();
        t[static_cast<std::size_t>(i)] = 1.0 + 0.5 * rng.uniform();
        u[static_cast<std::size_t>(i)] = v(i, 0) * t[static_cast<std::size_t>(i)] + rng.normal();
    }
    BasisMatrix p = basis_of(2, v);
    for (double lambda : {0.0, 0.01}) {
        SeriesRatioFit joint = fit_series_ratio(p, u, t, lambda);
        SeriesRatioFit sep = fit_series_ratio_separate(p, u, p, t, lambda);
        CHECK(bitwise_equal(joint.beta, sep.beta));
    }
    // Genuinely different samples still give a valid fit.
    Eigen::MatrixXd v2(300, 2);
    for (int i = 0; i < 300; ++i) {
        v2(i, 0) = rng.normal();
        v2(i, 1) = rng.normal();
    }
    SeriesRatioFit two = fit_series_ratio_separate(p, u, basis_of(2, v2), t, 0.0);
    CHECK(two.beta.allFinite());
    CHECK(two.n == 300);
}

TEST_CASE("beta scales with u") {
    SeededRng rng(7);
    Eigen::MatrixXd v(200, 1);
    std::vector<double> u(200), t(200);
    for (int i = 0; i < 200; ++i) {
        v(i, 0) = rng.normal();
        u[static_cast<std::size_t>(i)] = rng.normal();
        t[static_cast<std::size_t>(i)] = 0.5 + rng.uniform();
    }
    BasisMatrix p = basis_of(3, v);
    SeriesRatioFit base = fit_series_ratio(p, u, t, 0.0);
    for (double c : {2.0, -0.25, 3.0}) {
        std::vector<double> cu(u);
        for (double& x : cu) x *= c;
        SeriesRatioFit scaled = fit_series_ratio(p, cu, t, 0.0);
        if (c != 3.0)
            CHECK(bitwise_equal(scaled.beta, Eigen::VectorXd(c * base.beta)));
        else
            CHECK((scaled.beta - c * base.beta).cwiseAbs().maxCoeff() <= 1e-12 * base.beta.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("constant true ratio is recovered") {
    const double c = 1.7;
    SeededRng rng(8);
    const std::size_t n = 50000;
    Eigen::MatrixXd v(n, 1);
    std::vector<double> u(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.normal();
        const double zeta = 1.0 + 0.5 * std::tanh(x);
        v(static_cast<Eigen::Index>(i), 0) = x;
        t[i] = zeta + 0.5 * rng.normal();
        u[i] = c * zeta + rng.normal();
    }
    SeriesRatioFit fit = fit_series_ratio(basis_of(0, v), u, t, 0.0);
    double tbar = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) tbar += t[i] / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double e = u[i] - fit.beta(0) * t[i];
        s2 += e * e / static_cast<double>(n);
    }
    const double se = std::sqrt(s2 / static_cast<double>(n)) / tbar;
    CHECK(std::abs(fit.beta(0) - c) <= 3.0 * se);
}
