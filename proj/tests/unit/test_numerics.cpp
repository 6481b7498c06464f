#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cefr/error.hpp"
#include "cefr/numerics.hpp"

using namespace cefr;

TEST_CASE("solve_sym small systems") {
    Eigen::VectorXd x = solve_sym(SymMatrix::identity(2), Eigen::VectorXd(Eigen::Vector2d(3, 4)));
    CHECK(x(0) == doctest::Approx(3.0));
    CHECK(x(1) == doctest::Approx(4.0));

    Eigen::Matrix2d d;
    d << 2, 0, 0, 4;
    x = solve_sym(SymMatrix(d), Eigen::VectorXd(Eigen::Vector2d(2, 4)));
    CHECK(x(0) == doctest::Approx(1.0));
    CHECK(x(1) == doctest::Approx(1.0));

    // [[2,1],[1,2]] x = (3,3): subtracting half the first row from the second
    // gives 1.5 x2 = 1.5.
    Eigen::Matrix2d a;
    a << 2, 1, 1, 2;
    x = solve_sym(SymMatrix(a), Eigen::VectorXd(Eigen::Vector2d(3, 3)));
    CHECK(std::abs(x(0) - 1.0) < 1e-12);
    CHECK(std::abs(x(1) - 1.0) < 1e-12);
}

TEST_CASE("solve_sym rejects a singular system") {
    Eigen::Matrix2d a;
    a << 1, 1, 1, 1;
    try {
        solve_sym(SymMatrix(a), Eigen::VectorXd(Eigen::Vector2d(1, 1)));
        FAIL("expected singular error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::singular);
    }
}

TEST_CASE("solve_sym recovers x for random well-conditioned SPD systems") {
    SeededRng rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = 1 + static_cast<int>(rng.below(8));
        Eigen::MatrixXd q(k, k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) q(i, j) = rng.normal();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(q);
        Eigen::MatrixXd u = qr.householderQ();
        Eigen::VectorXd ev(k);
        for (int i = 0; i < k; ++i) ev(i) = std::pow(10.0, 6.0 * rng.uniform());
        ev(0) = 1.0;
        Eigen::MatrixXd a = u * ev.asDiagonal() * u.transpose();
        Eigen::VectorXd x(k);
        for (int i = 0; i < k; ++i) x(i) = rng.normal();
        Eigen::VectorXd got = solve_sym(SymMatrix(a), Eigen::VectorXd(a * x));
        CHECK((got - x).norm() <= 1e-8 * (1.0 + x.norm()));
        Eigen::VectorXd b = a * x;
        CHECK((a * got - b).norm() <= 1e-8 * (1.0 + b.norm()));
    }
}

TEST_CASE("psd_sqrt examples") {
    Eigen::MatrixXd s = psd_sqrt(SymMatrix::identity(3));
    CHECK((s - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);

    Eigen::Matrix2d d;
    d << 4, 0, 0, 9;
    s = psd_sqrt(SymMatrix(d));
    CHECK(std::abs(s(0, 0) - 2.0) < 1e-12);
    CHECK(std::abs(s(1, 1) - 3.0) < 1e-12);
    CHECK(std::abs(s(0, 1)) < 1e-12);

    // Eigenpairs of [[2,-1],[-1,2]] are 1 on (1,1)/√2 and 3 on (1,-1)/√2.
    Eigen::Matrix2d m;
    m << 2, -1, -1, 2;
    Eigen::Matrix2d v;
    v << 1, 1, 1, -1;
    v /= std::sqrt(2.0);
    Eigen::Matrix2d expected = v * Eigen::Vector2d(1.0, std::sqrt(3.0)).asDiagonal() * v.transpose();
    s = psd_sqrt(SymMatrix(m));
    CHECK((s * s.transpose() - m).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((s - expected).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("psd_sqrt clips negative eigenvalues and stays PSD") {
    SeededRng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 1 + static_cast<int>(rng.below(6));
        Eigen::MatrixXd a(k, k);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) a(i, j) = rng.normal();
        SymMatrix m(a);
        Eigen::MatrixXd s = psd_sqrt(m);
        Eigen::MatrixXd ss = s * s.transpose();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ss);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(m.matrix());
        Eigen::VectorXd clipped = em.eigenvalues().cwiseMax(0.0);
        Eigen::MatrixXd expected = em.eigenvectors() * clipped.asDiagonal() * em.eigenvectors().transpose();
        CHECK((ss - expected).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("psd_sqrt rejects non-finite input") {
    Eigen::Matrix2d m;
    m << 1, NAN, NAN, 1;
    try {
        psd_sqrt(SymMatrix(m));
        FAIL("expected input error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::input);
    }
}

TEST_CASE("SymMatrix symmetrizes") {
    Eigen::Matrix2d m;
    m << 1, 2, 4, 1;
    SymMatrix s(m);
    CHECK(s(0, 1) == 3.0);
    CHECK(s(1, 0) == 3.0);
}

TEST_CASE("normal draws are deterministic") {
    SeededRng a(5), b(5);
    CHECK(std_normal_draws(a, 0).empty());
    auto x = std_normal_draws(a, 5);
    auto y = std_normal_draws(b, 5);
    CHECK(x == y);
    SeededRng c(6);
    CHECK(std_normal_draws(c, 5) != x);
    SeededRng root(9);
    auto d1 = root.derive(3), d2 = root.derive(3);
    CHECK(d1.next_u64() == d2.next_u64());
}

TEST_CASE("normal draws have unit moments") {
    SeededRng rng(1);
    auto x = std_normal_draws(rng, 1000000);
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    s /= static_cast<double>(x.size() - 1);
    CHECK(m > -0.01);
    CHECK(m < 0.01);
    CHECK(s > 0.99);
    CHECK(s < 1.01);
}

TEST_CASE("normal draws pass Kolmogorov-Smirnov") {
    SeededRng rng(2);
    auto x = std_normal_draws(rng, 100000);
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = 0.5 * std::erfc(-x[i] / std::sqrt(2.0));
        ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
    }
    CHECK(ks < 0.01);
}

TEST_CASE("normal quantile and cdf agree with erfc") {
    for (double p : {1e-6, 0.01, 0.025, 0.3, 0.5, 0.8, 0.975, 0.999}) {
        const double q = normal_quantile(p);
        CHECK(std::abs(0.5 * std::erfc(-q / std::sqrt(2.0)) - p) < 1e-12);
        CHECK(std::abs(normal_cdf(q) - p) < 1e-12);
    }
}

TEST_CASE("sample quantile uses linear interpolation") {
    std::vector<double> x{4, 1, 3, 2};
    CHECK(sample_quantile(x, 0.0) == 1.0);
    CHECK(sample_quantile(x, 1.0) == 4.0);
    CHECK(sample_quantile(x, 0.5) == doctest::Approx(2.5));
    CHECK(sample_quantile(x, 0.2) == doctest::Approx(1.6));
}
