#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "cefr/basis.hpp"
#include "cefr/numerics.hpp"

namespace cefr {

// Σ t_i p_i p_iᵀ and Σ u_i p_i over the rows of p.
Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& p, const std::vector<double>& t);
Eigen::VectorXd weighted_sum(const Eigen::MatrixXd& p, const std::vector<double>& u);

struct SeriesRatioFit {
    Eigen::VectorXd beta;
    SymMatrix q_hat;  // unregularized
    Eigen::VectorXd pu_hat;
    double lambda = 0.0;
    BasisSpec basis;
    std::size_t n = 0;
};

SeriesRatioFit fit_series_ratio(const BasisMatrix& p, const std::vector<double>& u, const std::vector<double>& t,
                                double lambda);

// Numerator moments from (p_u, u), denominator moments from (p_t, t). The two
// samples must have equal size.
SeriesRatioFit fit_series_ratio_separate(const BasisMatrix& p_u, const std::vector<double>& u,
                                         const BasisMatrix& p_t, const std::vector<double>& t, double lambda);

SeriesRatioFit fit_from_moments(const Eigen::MatrixXd& q_sum, const Eigen::VectorXd& pu_sum, std::size_t n,
                                double lambda, const BasisSpec& basis);

// Rows of v_grid are evaluation points (m×q_V).
Eigen::VectorXd predict_theta(const SeriesRatioFit& fit, const Eigen::MatrixXd& v_grid);

}  // namespace cefr
