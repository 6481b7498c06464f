#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cefr/basis.hpp"
#include "cefr/estimator.hpp"
#include "cefr/numerics.hpp"

namespace cefr {

struct InferenceReport {
    SymMatrix omega_hat;
    Eigen::MatrixXd grid;  // m×q_V
    Eigen::VectorXd theta_grid;
    Eigen::VectorXd sigma_grid;
    Eigen::VectorXd pointwise_lo, pointwise_hi;
    Eigen::VectorXd uniform_lo, uniform_hi;
    double critical_value = 0.0;  // uniform
    double pointwise_critical_value = 0.0;
    double delta = 0.05;
    std::size_t b_draws = 0;
    std::size_t n = 0;
    std::uint64_t bootstrap_seed = 0;
};

enum class CriticalMode { pointwise, uniform };

// Ω̂ = Q̂⁻¹ E_N[p pᵀ ê²] Q̂⁻¹ with ê = u − t·θ̂ and the unregularized Q̂.
SymMatrix estimate_covariance(const SeriesRatioFit& fit, const BasisMatrix& p, const std::vector<double>& u,
                              const std::vector<double>& t);

double sigma_at(const SymMatrix& omega, const BasisSpec& basis, const Eigen::VectorXd& v);
Eigen::VectorXd sigma_on_grid(const SymMatrix& omega, const BasisSpec& basis, const Eigen::MatrixXd& grid);

// Uniform mode draws b Gaussian multipliers in fixed-size chunks, each with
// its own derived rng, so the value does not depend on `threads`.
double critical_value(const SymMatrix& omega, const BasisSpec& basis, const Eigen::MatrixXd& grid, double delta,
                      std::size_t b, const SeededRng& rng, CriticalMode mode, std::size_t threads = 1);

InferenceReport confidence_band(const SeriesRatioFit& fit, const SymMatrix& omega, const Eigen::MatrixXd& grid,
                                double delta, std::size_t b, const SeededRng& rng, std::size_t threads = 1);

// `points` equispaced values between the lo_q and hi_q sample quantiles of a
// single target covariate.
Eigen::MatrixXd default_grid(const Eigen::MatrixXd& v, std::size_t points = 100, double lo_q = 0.01,
                             double hi_q = 0.99);

}  // namespace cefr
