#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace cefr {

// Dense symmetric matrix. The constructor averages m and mᵀ.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(const Eigen::MatrixXd& m);
    static SymMatrix zero(std::size_t k);
    static SymMatrix identity(std::size_t k);

    std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
    const Eigen::MatrixXd& matrix() const { return m_; }
    double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

    SymMatrix plus_ridge(double lambda) const;

private:
    Eigen::MatrixXd m_;
};

Eigen::VectorXd solve_sym(const SymMatrix& a, const Eigen::VectorXd& b);
Eigen::MatrixXd solve_sym(const SymMatrix& a, const Eigen::MatrixXd& b);

// Symmetric square root after clipping negative eigenvalues to zero.
Eigen::MatrixXd psd_sqrt(const SymMatrix& m);

// Counter-based generator: draw i is splitmix64(key + i·γ), key derived from
// the seed. Streams are reproducible across platforms.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64();
    double uniform();  // [0, 1)
    double normal();
    std::size_t below(std::size_t n);  // uniform integer in [0, n)

    // Independent child stream, a pure function of (seed, stream).
    SeededRng derive(std::uint64_t stream) const;

private:
    std::uint64_t seed_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

std::vector<double> std_normal_draws(SeededRng& rng, std::size_t n);

double normal_quantile(double p);
double normal_cdf(double x);

// Type-7 (linear interpolation) sample quantile; sorts a copy.
double sample_quantile(std::vector<double> x, double q);

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace cefr
