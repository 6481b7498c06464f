#include "cefr/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cefr/error.hpp"
#include "cefr/estimator.hpp"
#include "cefr/inference.hpp"
#include "cefr/modelselect.hpp"
#include "cefr/parallel.hpp"

namespace cefr::sim {

namespace {

constexpr double kSepFloor = 1e-6;
constexpr std::size_t kOsrDim = 5;

Error config_error(const std::string& what) { return Error(ErrorKind::config, "simharness", what); }

double bernoulli(SeededRng& rng, double p) { return rng.uniform() < p ? 1.0 : 0.0; }

double index_sum(const Eigen::VectorXd& x) { return x.sum(); }

// Covariance with unit diagonal, X1 independent, and off-diagonals among the
// rest of magnitude U[0.1, 0.3] with a random sign. Row sums of off-diagonal
// magnitudes stay below one, so the matrix is positive definite.
Eigen::MatrixXd draw_covariance(SeededRng& rng) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Identity(kOsrDim, kOsrDim);
    for (Eigen::Index i = 1; i < static_cast<Eigen::Index>(kOsrDim); ++i)
        for (Eigen::Index j = i + 1; j < static_cast<Eigen::Index>(kOsrDim); ++j) {
            const double mag = 0.1 + 0.2 * rng.uniform();
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            c(i, j) = c(j, i) = sign * mag;
        }
    return c;
}

// E[f(v + s·Z)] for Z ~ N(0,1).
template <class F>
double normal_expectation(F f, double v, double s) {
    if (s <= 0.0) return f(v);
    constexpr double inv_root_2pi = 0.3989422804014327;
    auto integrand = [&](double z) { return inv_root_2pi * std::exp(-0.5 * z * z) * f(v + s * z); };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        integrand, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 15, 1e-12);
}

double rest_sd(const Eigen::MatrixXd& cov) {
    const Eigen::Index m = cov.rows() - 1;
    return std::sqrt(std::max(cov.bottomRightCorner(m, m).sum(), 0.0));
}

double mean_of(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double sd_of(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size() - 1));
}

std::vector<double> quintile_cuts(const std::vector<double>& x) {
    if (x.empty()) return std::vector<double>(4, std::numeric_limits<double>::quiet_NaN());
    return {sample_quantile(x, 0.2), sample_quantile(x, 0.4), sample_quantile(x, 0.6), sample_quantile(x, 0.8)};
}

std::vector<std::string> target_names(DgpKind kind) {
    if (kind == DgpKind::DGP_OSR) return {"x1"};
    return {"x1", "x2"};
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

struct Signals {
    std::vector<double> u, t;
};

// Known-design signals: constant cell probabilities and zero regressions.
Signals known_design_signals(const SimData& data, double trim_eps) {
    SignalSpec spec{Estimand::DATA_COMB, trim_eps};
    SignalColumns cols = signal_columns(spec, data.frame, data.mapping);
    const std::size_t n = cols.size();
    NuisancePredictions preds;
    preds.outcome.assign(2, std::vector<double>(n, 0.0));
    preds.treatment.assign(2, std::vector<double>(n, 0.0));
    preds.propensity.assign(4, std::vector<double>(n, 0.25));
    SignalPair sp = signals_from_predictions(spec, cols, preds);
    return {std::move(sp.u), std::move(sp.t)};
}

Candidate pick(const McConfig& cfg, std::size_t n_vars, const Eigen::MatrixXd& v, const std::vector<double>& u,
               const std::vector<double>& t, SeededRng rng) {
    if (!cfg.cross_validate) return {BasisSpec{n_vars, cfg.fixed_degree, true}, cfg.fixed_lambda};
    SelectOptions opts;
    opts.folds = cfg.cv_folds;
    opts.denominator_positive = true;
    return select_series_ratio(candidate_grid(n_vars, cfg.degrees, cfg.lambdas), v, u, t, opts, rng).chosen;
}

double test_mse(const Eigen::VectorXd& pred, const Eigen::MatrixXd& vt, const Oracle& oracle) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < vt.rows(); ++i) {
        const double e = pred(i) - oracle.theta0(vt.row(i).transpose());
        s += e * e;
    }
    return s / static_cast<double>(vt.rows());
}

}  // namespace

const char* to_string(DgpKind k) {
    switch (k) {
        case DgpKind::DGP_L: return "DGP_L";
        case DgpKind::DGP_Q: return "DGP_Q";
        case DgpKind::DGP_OSR: return "DGP_OSR";
    }
    return "?";
}

const char* to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::DSR: return "DSR";
        case EstimatorKind::SEP: return "SEP";
        case EstimatorKind::OSR: return "OSR";
    }
    return "?";
}

DgpKind dgp_from_string(const std::string& s) {
    for (auto k : {DgpKind::DGP_L, DgpKind::DGP_Q, DgpKind::DGP_OSR})
        if (s == to_string(k)) return k;
    throw config_error("unknown dgp '" + s + "' (expected DGP_L, DGP_Q or DGP_OSR)");
}

EstimatorKind estimator_from_string(const std::string& s) {
    for (auto k : {EstimatorKind::DSR, EstimatorKind::SEP, EstimatorKind::OSR})
        if (s == to_string(k)) return k;
    throw config_error("unknown estimator '" + s + "' (expected DSR, SEP or OSR)");
}

double Oracle::theta0(const Eigen::VectorXd& v) const {
    switch (kind) {
        case DgpKind::DGP_L: return 0.4 * (v(0) + v(1));
        case DgpKind::DGP_Q: return 0.2 * (v(0) + v(1)) * (v(0) + v(1));
        case DgpKind::DGP_OSR: return 0.4 * v(0);
    }
    return 0.0;
}

double Oracle::nu(const Eigen::VectorXd& v) const {
    if (kind != DgpKind::DGP_OSR) return theta0(v) * zeta(v);
    return normal_expectation([](double g) { return 0.4 * g * logistic(0.2 * g + 1.0); }, v(0), rest_sd(cov));
}

double Oracle::zeta(const Eigen::VectorXd& v) const {
    if (kind != DgpKind::DGP_OSR) return logistic(v(0) + v(1));
    return normal_expectation([](double g) { return logistic(0.2 * g + 1.0); }, v(0), rest_sd(cov));
}

double Oracle::cefr(const Eigen::VectorXd& v) const {
    if (kind != DgpKind::DGP_OSR) return theta0(v);
    return nu(v) / zeta(v);
}

double Oracle::mu(int w, const Eigen::VectorXd& x) const {
    const double g = index_sum(x);
    switch (kind) {
        case DgpKind::DGP_L: return logistic(g) + w * 0.4 * g * logistic(g);
        case DgpKind::DGP_Q: return logistic(g) + w * 0.2 * g * g * logistic(g);
        case DgpKind::DGP_OSR: return logistic(g) + w * 0.4 * g * logistic(0.2 * g + 1.0);
    }
    return 0.0;
}

double Oracle::pi(int w, const Eigen::VectorXd& x) const {
    const double g = index_sum(x);
    if (kind == DgpKind::DGP_OSR) return w * logistic(0.2 * g + 1.0);
    return w * logistic(g);
}

double Oracle::rho(int h, int w, const Eigen::VectorXd& x) const {
    if (kind != DgpKind::DGP_OSR) return 0.25;
    const double g = index_sum(x);
    const double ph = logistic(-0.1 * g), pw = logistic(0.1 * g);
    return (h ? ph : 1.0 - ph) * (w ? pw : 1.0 - pw);
}

NuisancePredictions Oracle::predictions(const Eigen::MatrixXd& x) const {
    const std::size_t n = static_cast<std::size_t>(x.rows());
    NuisancePredictions p;
    p.outcome.assign(2, std::vector<double>(n));
    p.treatment.assign(2, std::vector<double>(n));
    p.propensity.assign(4, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd xi = x.row(static_cast<Eigen::Index>(i)).transpose();
        for (int w = 0; w < 2; ++w) {
            p.outcome[w][i] = mu(w, xi);
            p.treatment[w][i] = pi(w, xi);
        }
        for (int h = 0; h < 2; ++h)
            for (int w = 0; w < 2; ++w) p.propensity[2 * h + w][i] = rho(h, w, xi);
    }
    return p;
}

SimData generate_dgp(const DgpSpec& spec, SeededRng& rng) {
    if (spec.n < 10) throw config_error("dgp sample size must be at least 10");
    SimData out;
    out.oracle.kind = spec.kind;
    const bool osr = spec.kind == DgpKind::DGP_OSR;
    const std::size_t dim = osr ? kOsrDim : 2;
    const std::size_t rows = osr ? spec.n : 2 * spec.n;

    Eigen::MatrixXd chol = Eigen::MatrixXd::Identity(dim, dim);
    if (osr) {
        out.oracle.cov = draw_covariance(rng);
        chol = out.oracle.cov.llt().matrixL();
    } else {
        out.oracle.cov = Eigen::MatrixXd::Identity(dim, dim);
    }

    std::vector<std::vector<double>> x(dim, std::vector<double>(rows));
    std::vector<double> w(rows), h(rows), d(rows), y(rows), eps(rows), obs(rows);
    Eigen::VectorXd z(dim);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < dim; ++j) z(static_cast<Eigen::Index>(j)) = rng.normal();
        Eigen::VectorXd xi = chol * z;
        for (std::size_t j = 0; j < dim; ++j) x[j][i] = xi(static_cast<Eigen::Index>(j));
        const double g = xi.sum();
        eps[i] = rng.normal();
        double d1 = 0.0;
        switch (spec.kind) {
            case DgpKind::DGP_L:
            case DgpKind::DGP_Q:
                h[i] = i < spec.n ? 1.0 : 0.0;
                w[i] = bernoulli(rng, 0.5);
                d1 = bernoulli(rng, logistic(g));
                break;
            case DgpKind::DGP_OSR:
                d1 = bernoulli(rng, logistic(0.2 * g + 1.0));
                w[i] = bernoulli(rng, logistic(0.1 * g));
                h[i] = bernoulli(rng, logistic(-0.1 * g));
                break;
        }
        d[i] = w[i] * d1;
        const double effect = spec.kind == DgpKind::DGP_Q ? 0.2 * g * g : 0.4 * g;
        y[i] = logistic(g) + d[i] * effect + 0.2 * eps[i];
        obs[i] = h[i] == 1.0 ? y[i] : d[i];
    }

    std::vector<std::string> cov_names;
    for (std::size_t j = 0; j < dim; ++j) {
        cov_names.push_back("x" + std::to_string(j + 1));
        out.frame.add_column(cov_names.back(), std::move(x[j]));
    }
    out.frame.add_column("w", std::move(w));
    out.frame.add_column("h", std::move(h));
    out.frame.add_column("obs", std::move(obs));
    out.frame.add_column("d_latent", std::move(d));
    out.frame.add_column("y_latent", std::move(y));
    out.frame.add_column("eps_latent", std::move(eps));

    out.mapping.outcome = "obs";
    out.mapping.time = "w";
    out.mapping.dataset_indicator = "h";
    out.mapping.covariates = cov_names;
    out.mapping.target_covariates = target_names(spec.kind);
    return out;
}

Eigen::MatrixXd draw_targets(DgpKind kind, std::size_t n, SeededRng& rng) {
    // X1 is independent of the other covariates in every design, and the
    // DGP_L/Q targets are iid standard normals.
    const Eigen::Index q = kind == DgpKind::DGP_OSR ? 1 : 2;
    Eigen::MatrixXd v(static_cast<Eigen::Index>(n), q);
    for (Eigen::Index i = 0; i < v.rows(); ++i)
        for (Eigen::Index j = 0; j < q; ++j) v(i, j) = rng.normal();
    return v;
}

Eigen::VectorXd evaluation_point(DgpKind kind) {
    if (kind == DgpKind::DGP_OSR) return Eigen::VectorXd::Ones(1);
    return Eigen::VectorXd::Ones(2);
}

McConfig osr_defaults() {
    McConfig c;
    c.dgp = DgpKind::DGP_OSR;
    c.estimator = EstimatorKind::OSR;
    c.degrees = {1, 2, 3};
    c.lambdas = {0.0};
    c.inference = true;
    LearnerSpec reg;
    reg.kind = LearnerKind::gbt_regression;
    LearnerSpec cls;
    cls.kind = LearnerKind::gbt_classification;
    c.learners = {{Role::outcome, reg}, {Role::treatment, reg}, {Role::propensity, cls}};
    return c;
}

SepFit sep_baseline(const BasisMatrix& p_u, const std::vector<double>& u, double lambda_u, const BasisMatrix& p_t,
                    const std::vector<double>& t, double lambda_t) {
    const std::vector<double> ones_u(u.size(), 1.0), ones_t(t.size(), 1.0);
    return {fit_series_ratio(p_u, u, ones_u, lambda_u), fit_series_ratio(p_t, t, ones_t, lambda_t)};
}

SepPrediction sep_predict(const SepFit& fit, const Eigen::MatrixXd& v) {
    Eigen::VectorXd num = predict_theta(fit.numerator, v);
    Eigen::VectorXd den = predict_theta(fit.denominator, v);
    SepPrediction out;
    out.value.resize(v.rows());
    out.floored.assign(static_cast<std::size_t>(v.rows()), false);
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        double d = den(i);
        if (std::abs(d) < kSepFloor) {
            d = d < 0.0 ? -kSepFloor : kSepFloor;
            out.floored[static_cast<std::size_t>(i)] = true;
        }
        out.value(i) = num(i) / d;
    }
    return out;
}

ReplicationResult run_replication(const McConfig& cfg, std::size_t r) {
    ReplicationResult res;
    res.seed = cfg.base_seed + r;
    const SeededRng rng(res.seed);
    try {
        SeededRng data_rng = rng.derive(0);
        SimData data = generate_dgp({cfg.dgp, cfg.n, res.seed}, data_rng);
        const Eigen::MatrixXd v = subvector(data.frame, data.mapping.target_covariates);
        const std::size_t q = static_cast<std::size_t>(v.cols());
        const Eigen::VectorXd v0 = evaluation_point(cfg.dgp);
        res.truth = data.oracle.theta0(v0);
        SeededRng test_rng = rng.derive(5);
        const Eigen::MatrixXd vt = draw_targets(cfg.dgp, cfg.n, test_rng);

        Signals sig;
        if (cfg.estimator == EstimatorKind::OSR) {
            SeededRng plan_rng = rng.derive(1);
            FoldPlan plan = make_folds(data.frame.n_rows(), cfg.crossfit_folds, plan_rng);
            SignalPair sp = crossfit_signals({Estimand::DATA_COMB, cfg.trim_eps}, data.frame, data.mapping,
                                             cfg.learners, plan, rng.derive(2));
            sig = {std::move(sp.u), std::move(sp.t)};
        } else {
            sig = known_design_signals(data, cfg.trim_eps);
        }

        if (cfg.estimator == EstimatorKind::SEP) {
            const std::vector<double> ones(sig.u.size(), 1.0);
            Candidate cu = pick(cfg, q, v, sig.u, ones, rng.derive(3));
            Candidate ct = pick(cfg, q, v, sig.t, ones, rng.derive(6));
            SepFit fit = sep_baseline(build_basis(cu.basis, v), sig.u, cu.lambda, build_basis(ct.basis, v), sig.t,
                                      ct.lambda);
            res.k = basis_dim(cu.basis);
            res.lambda = cu.lambda;
            res.estimate = sep_predict(fit, v0.transpose()).value(0);
            SepPrediction pt = sep_predict(fit, vt);
            res.floored = std::any_of(pt.floored.begin(), pt.floored.end(), [](bool b) { return b; });
            res.mse = test_mse(pt.value, vt, data.oracle);
            return res;
        }

        Candidate c = pick(cfg, q, v, sig.u, sig.t, rng.derive(3));
        BasisMatrix p = build_basis(c.basis, v);
        SeriesRatioFit fit = fit_series_ratio(p, sig.u, sig.t, c.lambda);
        res.k = basis_dim(c.basis);
        res.lambda = c.lambda;
        res.estimate = predict_theta(fit, v0.transpose())(0);
        res.mse = test_mse(predict_theta(fit, vt), vt, data.oracle);

        if (cfg.inference) {
            SymMatrix omega = estimate_covariance(fit, p, sig.u, sig.t);
            Eigen::MatrixXd grid = q == 1 ? default_grid(v, cfg.grid_points) : vt.topRows(std::min<Eigen::Index>(
                                                                                    vt.rows(), cfg.grid_points));
            InferenceReport band = confidence_band(fit, omega, grid, cfg.delta, cfg.bootstrap, rng.derive(4));
            res.has_band = true;
            res.covered = true;
            res.width = (band.uniform_hi - band.uniform_lo).maxCoeff();
            for (Eigen::Index j = 0; j < grid.rows(); ++j) {
                const double th = data.oracle.theta0(grid.row(j).transpose());
                res.covered = res.covered && band.uniform_lo(j) <= th && th <= band.uniform_hi(j);
            }
        }
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::config) throw;
        res.failed = true;
        res.error = e.what();
    }
    return res;
}

double McSummary::selection_share(std::size_t k) const {
    const std::size_t ok = replications - failures;
    if (ok == 0) return 0.0;
    std::size_t hits = 0;
    for (const auto& [key, count] : selections)
        if (key.first == k) hits += count;
    return static_cast<double>(hits) / static_cast<double>(ok);
}

McSummary summarize(const std::string& estimator, const std::string& dgp, std::size_t n, const std::string& k_label,
                    const std::string& lambda_label, std::vector<ReplicationResult> runs) {
    McSummary s;
    s.estimator = estimator;
    s.dgp = dgp;
    s.n = n;
    s.k_label = k_label;
    s.lambda_label = lambda_label;
    s.replications = runs.size();
    std::vector<double> est, err, mse, width;
    std::size_t covered = 0;
    for (const auto& r : runs) {
        if (r.failed) {
            ++s.failures;
            continue;
        }
        est.push_back(r.estimate);
        err.push_back(r.estimate - r.truth);
        mse.push_back(r.mse);
        ++s.selections[{r.k, r.lambda}];
        if (r.has_band) {
            s.has_band = true;
            width.push_back(r.width);
            covered += r.covered ? 1 : 0;
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.bias = err.empty() ? nan : mean_of(err);
    s.sd = err.empty() ? nan : sd_of(est);
    s.mse = mse.empty() ? nan : mean_of(mse);
    s.mse_sd = mse.empty() ? nan : sd_of(mse);
    s.mse_quantiles = quintile_cuts(mse);
    s.bias_quantiles = quintile_cuts(err);
    if (s.has_band) {
        s.width_mean = mean_of(width);
        s.width_sd = sd_of(width);
        s.width_quantiles = quintile_cuts(width);
        s.coverage = static_cast<double>(covered) / static_cast<double>(width.size());
    }
    s.runs = std::move(runs);
    return s;
}

McSummary run_monte_carlo(const McConfig& cfg) {
    if (cfg.replications < 1) throw config_error("replications must be at least 1");
    if (cfg.estimator == EstimatorKind::OSR && cfg.learners.empty())
        throw config_error("OSR needs nuisance learners");
    std::vector<ReplicationResult> runs(cfg.replications);
    parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) { runs[r] = run_replication(cfg, r); });
    const std::string k_label = cfg.cross_validate ? "CV" : std::to_string(basis_dim(
                                                                BasisSpec{target_names(cfg.dgp).size(),
                                                                          cfg.fixed_degree, true}));
    const std::string l_label = cfg.cross_validate ? "CV" : format_double(cfg.fixed_lambda);
    return summarize(to_string(cfg.estimator), to_string(cfg.dgp), cfg.n, k_label, l_label, std::move(runs));
}

std::vector<McSummary> run_sensitivity(const SweepConfig& cfg) {
    if (cfg.dgp == DgpKind::DGP_OSR) throw config_error("the sensitivity sweep covers DGP_L and DGP_Q only");
    if (cfg.replications < 1) throw config_error("replications must be at least 1");
    for (auto e : cfg.estimators)
        if (e == EstimatorKind::OSR) throw config_error("the sensitivity sweep covers DSR and SEP only");
    const std::size_t q = target_names(cfg.dgp).size();
    const std::size_t nd = cfg.degrees.size(), nl = cfg.lambdas.size(), ne = cfg.estimators.size();
    const std::size_t cells = ne * nd * nl;
    std::vector<std::vector<ReplicationResult>> grid(cells, std::vector<ReplicationResult>(cfg.replications));

    // Each replication draws its data and signals once and fits every cell.
    parallel_for(cfg.replications, cfg.threads, [&](std::size_t r) {
        const std::uint64_t seed = cfg.base_seed + r;
        const SeededRng rng(seed);
        SeededRng data_rng = rng.derive(0);
        SimData data = generate_dgp({cfg.dgp, cfg.n, seed}, data_rng);
        const Eigen::MatrixXd v = subvector(data.frame, data.mapping.target_covariates);
        const Eigen::VectorXd v0 = evaluation_point(cfg.dgp);
        SeededRng test_rng = rng.derive(5);
        const Eigen::MatrixXd vt = draw_targets(cfg.dgp, cfg.n, test_rng);
        Signals sig = known_design_signals(data, 0.01);
        const std::vector<double> ones(sig.u.size(), 1.0);
        for (std::size_t di = 0; di < nd; ++di) {
            const BasisSpec spec{q, cfg.degrees[di], true};
            const BasisMatrix p = build_basis(spec, v);
            for (std::size_t li = 0; li < nl; ++li)
                for (std::size_t ei = 0; ei < ne; ++ei) {
                    ReplicationResult& res = grid[(ei * nd + di) * nl + li][r];
                    res.seed = seed;
                    res.truth = data.oracle.theta0(v0);
                    res.k = basis_dim(spec);
                    res.lambda = cfg.lambdas[li];
                    try {
                        if (cfg.estimators[ei] == EstimatorKind::SEP) {
                            SepFit fit = sep_baseline(p, sig.u, res.lambda, p, sig.t, res.lambda);
                            res.estimate = sep_predict(fit, v0.transpose()).value(0);
                            SepPrediction pt = sep_predict(fit, vt);
                            res.floored = std::any_of(pt.floored.begin(), pt.floored.end(), [](bool b) { return b; });
                            res.mse = test_mse(pt.value, vt, data.oracle);
                        } else {
                            SeriesRatioFit fit = fit_series_ratio(p, sig.u, sig.t, res.lambda);
                            res.estimate = predict_theta(fit, v0.transpose())(0);
                            res.mse = test_mse(predict_theta(fit, vt), vt, data.oracle);
                        }
                    } catch (const Error& e) {
                        res.failed = true;
                        res.error = e.what();
                    }
                }
        }
    });

    std::vector<McSummary> out;
    for (std::size_t ei = 0; ei < ne; ++ei)
        for (std::size_t di = 0; di < nd; ++di)
            for (std::size_t li = 0; li < nl; ++li)
                out.push_back(summarize(to_string(cfg.estimators[ei]), to_string(cfg.dgp), cfg.n,
                                        std::to_string(basis_dim(BasisSpec{q, cfg.degrees[di], true})),
                                        format_double(cfg.lambdas[li]),
                                        std::move(grid[(ei * nd + di) * nl + li])));
    return out;
}

std::string campaign_csv(const std::vector<McSummary>& rows) {
    std::ostringstream os;
    os << "estimator,dgp,N,k,lambda,replications,failures,bias,sd,bias_q20,bias_q40,bias_q60,bias_q80,mse,mse_q20,"
          "mse_q40,mse_q60,mse_q80,mse_sd,"
          "width_mean,width_sd,width_q20,width_q40,width_q60,width_q80,cvr,top_selection\n";
    auto num = [](double v) {
        if (!std::isfinite(v)) return std::string("NA");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const auto& s : rows) {
        os << s.estimator << ',' << s.dgp << ',' << s.n << ',' << s.k_label << ',' << s.lambda_label << ','
           << s.replications << ',' << s.failures << ',' << num(s.bias) << ',' << num(s.sd);
        for (std::size_t i = 0; i < 4; ++i) os << ',' << num(s.bias_quantiles[i]);
        os << ',' << num(s.mse);
        for (std::size_t i = 0; i < 4; ++i) os << ',' << num(s.mse_quantiles[i]);
        os << ',' << num(s.mse_sd);
        if (s.has_band) {
            os << ',' << num(s.width_mean) << ',' << num(s.width_sd);
            for (std::size_t i = 0; i < 4; ++i) os << ',' << num(s.width_quantiles[i]);
            os << ',' << num(s.coverage);
        } else {
            os << ",NA,NA,NA,NA,NA,NA,NA";
        }
        std::string top = "NA";
        std::size_t best = 0;
        for (const auto& [key, count] : s.selections)
            if (count > best) {
                best = count;
                top = "k=" + std::to_string(key.first) + ";lambda=" + format_double(key.second);
            }
        os << ',' << top << '\n';
    }
    return os.str();
}

}  // namespace cefr::sim
