#include "cefr/estimator.hpp"

#include "cefr/error.hpp"

namespace cefr {

namespace {

Eigen::Map<const Eigen::VectorXd> as_vec(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_inputs(const BasisMatrix& p, const std::vector<double>& v, const char* name) {
    if (static_cast<std::size_t>(p.values.rows()) != v.size())
        throw Error(ErrorKind::input, "estimator", std::string(name) + " length does not match the basis rows");
    if (!as_vec(v).allFinite()) throw Error(ErrorKind::input, "estimator", std::string(name) + " has non-finite entries");
}

}  // namespace

Eigen::MatrixXd weighted_gram(const Eigen::MatrixXd& p, const std::vector<double>& t) {
    Eigen::MatrixXd pt = p.array().colwise() * as_vec(t).array();
    return p.transpose() * pt;
}

Eigen::VectorXd weighted_sum(const Eigen::MatrixXd& p, const std::vector<double>& u) {
    return p.transpose() * as_vec(u);
}

SeriesRatioFit fit_from_moments(const Eigen::MatrixXd& q_sum, const Eigen::VectorXd& pu_sum, std::size_t n,
                                double lambda, const BasisSpec& basis) {
    if (!(lambda >= 0.0)) throw Error(ErrorKind::input, "estimator", "lambda must be >= 0");
    if (n == 0) throw Error(ErrorKind::input, "estimator", "empty sample");
    const double nd = static_cast<double>(n);
    SeriesRatioFit fit;
    fit.q_hat = SymMatrix(q_sum / nd);
    fit.pu_hat = pu_sum / nd;
    fit.lambda = lambda;
    fit.basis = basis;
    fit.n = n;
    try {
        fit.beta = solve_sym(fit.q_hat.plus_ridge(lambda), fit.pu_hat);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::singular) throw;
        throw Error(ErrorKind::singular, "estimator",
                    std::string(e.what()) + "; use a positive lambda or a smaller basis");
    }
    return fit;
}

SeriesRatioFit fit_series_ratio(const BasisMatrix& p, const std::vector<double>& u, const std::vector<double>& t,
                                double lambda) {
    return fit_series_ratio_separate(p, u, p, t, lambda);
}

SeriesRatioFit fit_series_ratio_separate(const BasisMatrix& p_u, const std::vector<double>& u,
                                         const BasisMatrix& p_t, const std::vector<double>& t, double lambda) {
    check_inputs(p_u, u, "u");
    check_inputs(p_t, t, "t");
    if (!(p_u.spec == p_t.spec)) throw Error(ErrorKind::input, "estimator", "samples use different bases");
    if (u.size() != t.size())
        throw Error(ErrorKind::input, "estimator", "numerator and denominator samples differ in size");
    const std::size_t k = static_cast<std::size_t>(p_u.values.cols());
    if (u.size() < k)
        throw Error(ErrorKind::input, "estimator",
                    "need N >= k (N=" + std::to_string(u.size()) + ", k=" + std::to_string(k) + ")");
    return fit_from_moments(weighted_gram(p_t.values, t), weighted_sum(p_u.values, u), u.size(), lambda, p_u.spec);
}

Eigen::VectorXd predict_theta(const SeriesRatioFit& fit, const Eigen::MatrixXd& v_grid) {
    BasisMatrix p = build_basis(fit.basis, v_grid);
    if (p.values.cols() != fit.beta.size()) throw Error(ErrorKind::input, "estimator", "basis does not match the fit");
    return p.values * fit.beta;
}

}  // namespace cefr
