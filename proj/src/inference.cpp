#include "cefr/inference.hpp"

#include <algorithm>
#include <cmath>

#include "cefr/error.hpp"
#include "cefr/parallel.hpp"

namespace cefr {

namespace {

constexpr double kSigmaFloor = 1e-12;
constexpr std::size_t kChunk = 1024;

}  // namespace

SymMatrix estimate_covariance(const SeriesRatioFit& fit, const BasisMatrix& p, const std::vector<double>& u,
                              const std::vector<double>& t) {
    const std::size_t n = u.size();
    if (t.size() != n || static_cast<std::size_t>(p.values.rows()) != n)
        throw Error(ErrorKind::input, "inference", "signal lengths do not match the basis rows");
    if (p.values.cols() != fit.beta.size()) throw Error(ErrorKind::input, "inference", "basis does not match the fit");
    Eigen::VectorXd theta = p.values * fit.beta;
    std::vector<double> e2(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double e = u[i] - t[i] * theta(static_cast<Eigen::Index>(i));
        e2[i] = e * e;
    }
    SymMatrix m_hat(weighted_gram(p.values, e2) / static_cast<double>(n));
    Eigen::MatrixXd a = solve_sym(fit.q_hat, m_hat.matrix());  // Q⁻¹M
    Eigen::MatrixXd at = a.transpose();
    return SymMatrix(solve_sym(fit.q_hat, at));  // Q⁻¹MQ⁻¹
}

double sigma_at(const SymMatrix& omega, const BasisSpec& basis, const Eigen::VectorXd& v) {
    Eigen::VectorXd p = eval_basis(basis, v);
    if (static_cast<std::size_t>(p.size()) != omega.dim())
        throw Error(ErrorKind::input, "inference", "basis does not match the covariance");
    return std::sqrt(std::max(p.dot(omega.matrix() * p), 0.0));
}

Eigen::VectorXd sigma_on_grid(const SymMatrix& omega, const BasisSpec& basis, const Eigen::MatrixXd& grid) {
    BasisMatrix p = build_basis(basis, grid);
    if (static_cast<std::size_t>(p.values.cols()) != omega.dim())
        throw Error(ErrorKind::input, "inference", "basis does not match the covariance");
    Eigen::MatrixXd po = p.values * omega.matrix();
    Eigen::VectorXd s(grid.rows());
    for (Eigen::Index j = 0; j < grid.rows(); ++j) s(j) = std::sqrt(std::max(po.row(j).dot(p.values.row(j)), 0.0));
    return s;
}

double critical_value(const SymMatrix& omega, const BasisSpec& basis, const Eigen::MatrixXd& grid, double delta,
                      std::size_t b, const SeededRng& rng, CriticalMode mode, std::size_t threads) {
    if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorKind::input, "inference", "delta must be in (0,1)");
    const double pointwise = normal_quantile(1.0 - delta / 2.0);
    if (mode == CriticalMode::pointwise) return pointwise;
    if (grid.rows() < 1) throw Error(ErrorKind::input, "inference", "empty evaluation grid");
    if (b < 100) throw Error(ErrorKind::input, "inference", "need at least 100 bootstrap draws");

    BasisMatrix p = build_basis(basis, grid);
    Eigen::VectorXd sigma = sigma_on_grid(omega, basis, grid);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < sigma.size(); ++j)
        if (sigma(j) >= kSigmaFloor) keep.push_back(j);
    if (keep.empty())
        throw Error(ErrorKind::degenerate, "inference", "standard error is zero at every grid point");
    // Rows scaled by 1/σ̂ so each draw's statistic is a max-abs over rows.
    Eigen::MatrixXd ps(static_cast<Eigen::Index>(keep.size()), p.values.cols());
    for (std::size_t r = 0; r < keep.size(); ++r)
        ps.row(static_cast<Eigen::Index>(r)) = p.values.row(keep[r]) / sigma(keep[r]);
    const Eigen::MatrixXd a = ps * psd_sqrt(omega);
    const Eigen::Index k = a.cols();

    std::vector<double> stats(b);
    const std::size_t chunks = (b + kChunk - 1) / kChunk;
    parallel_for(chunks, threads, [&](std::size_t c) {
        SeededRng r = rng.derive(c);
        const std::size_t lo = c * kChunk, hi = std::min(b, lo + kChunk);
        Eigen::MatrixXd z(k, static_cast<Eigen::Index>(hi - lo));
        for (Eigen::Index col = 0; col < z.cols(); ++col)
            for (Eigen::Index i = 0; i < k; ++i) z(i, col) = r.normal();
        Eigen::MatrixXd tau = a * z;
        for (Eigen::Index col = 0; col < z.cols(); ++col)
            stats[lo + static_cast<std::size_t>(col)] = tau.col(col).cwiseAbs().maxCoeff();
    });
    std::sort(stats.begin(), stats.end());
    std::size_t idx = static_cast<std::size_t>(std::ceil((1.0 - delta) * static_cast<double>(b)));
    idx = std::clamp<std::size_t>(idx, 1, b) - 1;
    // The sup over the grid dominates any single point, so the pointwise
    // value is a floor; it only binds when the bootstrap quantile is noisy.
    return std::max(stats[idx], pointwise);
}

InferenceReport confidence_band(const SeriesRatioFit& fit, const SymMatrix& omega, const Eigen::MatrixXd& grid,
                                double delta, std::size_t b, const SeededRng& rng, std::size_t threads) {
    InferenceReport rep;
    rep.omega_hat = omega;
    rep.grid = grid;
    rep.delta = delta;
    rep.b_draws = b;
    rep.n = fit.n;
    rep.bootstrap_seed = rng.seed();
    rep.theta_grid = predict_theta(fit, grid);
    rep.sigma_grid = sigma_on_grid(omega, fit.basis, grid);
    rep.pointwise_critical_value = critical_value(omega, fit.basis, grid, delta, b, rng, CriticalMode::pointwise);
    const bool degenerate = rep.sigma_grid.maxCoeff() < kSigmaFloor;
    rep.critical_value = degenerate ? rep.pointwise_critical_value
                                    : critical_value(omega, fit.basis, grid, delta, b, rng, CriticalMode::uniform,
                                                     threads);
    const double root_n = std::sqrt(static_cast<double>(fit.n));
    Eigen::VectorXd half_pw = rep.pointwise_critical_value * rep.sigma_grid / root_n;
    Eigen::VectorXd half_u = rep.critical_value * rep.sigma_grid / root_n;
    rep.pointwise_lo = rep.theta_grid - half_pw;
    rep.pointwise_hi = rep.theta_grid + half_pw;
    rep.uniform_lo = rep.theta_grid - half_u;
    rep.uniform_hi = rep.theta_grid + half_u;
    return rep;
}

Eigen::MatrixXd default_grid(const Eigen::MatrixXd& v, std::size_t points, double lo_q, double hi_q) {
    if (v.cols() != 1)
        throw Error(ErrorKind::config, "inference", "a default grid needs a single target covariate; supply a grid");
    if (points < 1) throw Error(ErrorKind::config, "inference", "grid needs at least one point");
    std::vector<double> x(v.data(), v.data() + v.rows());
    const double lo = sample_quantile(x, lo_q), hi = sample_quantile(x, hi_q);
    Eigen::MatrixXd g(static_cast<Eigen::Index>(points), 1);
    for (std::size_t j = 0; j < points; ++j)
        g(static_cast<Eigen::Index>(j), 0) =
            points == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(points - 1);
    return g;
}

}  // namespace cefr
