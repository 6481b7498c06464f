#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cefr/crossfit.hpp"
#include "cefr/dataset.hpp"
#include "cefr/estimator.hpp"
#include "cefr/numerics.hpp"
#include "cefr/signals.hpp"

namespace cefr::sim {

enum class DgpKind { DGP_L, DGP_Q, DGP_OSR };
enum class EstimatorKind { DSR, SEP, OSR };

const char* to_string(DgpKind k);
const char* to_string(EstimatorKind k);
DgpKind dgp_from_string(const std::string& s);
EstimatorKind estimator_from_string(const std::string& s);

// DGP_L / DGP_Q: n rows per separate sample, so the frame has n outcome rows
// (h=1) and n treatment rows (h=0). DGP_OSR: n rows in total.
struct DgpSpec {
    DgpKind kind = DgpKind::DGP_L;
    std::size_t n = 1000;
    std::uint64_t seed = 0;
};

// True functions of a generated design. x is the full covariate vector.
struct Oracle {
    DgpKind kind = DgpKind::DGP_L;
    Eigen::MatrixXd cov;  // covariate covariance (DGP_OSR)

    // Target θ₀ at target covariates v ((x1,x2) for DGP_L/Q, x1 for DGP_OSR).
    double theta0(const Eigen::VectorXd& v) const;
    // ν₀(v)/ζ₀(v) of the observable design. Equals θ₀ for DGP_L/Q; for
    // DGP_OSR it weights the effect by P(D₁=1|X), which differs from 0.4v.
    double cefr(const Eigen::VectorXd& v) const;
    double nu(const Eigen::VectorXd& v) const;
    double zeta(const Eigen::VectorXd& v) const;

    double mu(int w, const Eigen::VectorXd& x) const;  // E[Y | H=1, W=w, X=x]
    double pi(int w, const Eigen::VectorXd& x) const;  // E[D | H=0, W=w, X=x]
    double rho(int h, int w, const Eigen::VectorXd& x) const;

    // True nuisances at every row, in the DATA_COMB layout.
    NuisancePredictions predictions(const Eigen::MatrixXd& x) const;
};

struct SimData {
    ColumnFrame frame;
    ColumnMapping mapping;
    Oracle oracle;
};

SimData generate_dgp(const DgpSpec& spec, SeededRng& rng);

// Fresh draw of n target-covariate rows from the design distribution.
Eigen::MatrixXd draw_targets(DgpKind kind, std::size_t n, SeededRng& rng);

Eigen::VectorXd evaluation_point(DgpKind kind);

struct McConfig {
    DgpKind dgp = DgpKind::DGP_L;
    EstimatorKind estimator = EstimatorKind::DSR;
    std::size_t n = 2000;
    std::size_t replications = 200;
    std::uint64_t base_seed = 1;

    bool cross_validate = true;
    std::vector<std::size_t> degrees{1, 2, 3};
    std::vector<double> lambdas{0.001, 0.01, 0.1, 1.0};
    std::size_t cv_folds = 5;
    std::size_t fixed_degree = 1;
    double fixed_lambda = 0.0;

    LearnerSet learners;
    std::size_t crossfit_folds = 5;
    bool inference = false;
    std::size_t bootstrap = 1000;
    double delta = 0.05;
    std::size_t grid_points = 100;
    double trim_eps = 0.01;

    std::size_t threads = 1;
};

McConfig osr_defaults();

struct ReplicationResult {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    double estimate = 0.0;  // θ̂ at the evaluation point
    double truth = 0.0;
    double mse = 0.0;
    std::size_t k = 0;
    double lambda = 0.0;
    bool has_band = false;
    double width = 0.0;  // largest uniform band width over the grid
    bool covered = false;
    bool floored = false;  // SEP denominator hit the floor on the test sample
};

struct McSummary {
    std::string estimator;
    std::string dgp;
    std::size_t n = 0;
    std::string k_label;
    std::string lambda_label;
    std::size_t replications = 0;
    std::size_t failures = 0;
    double bias = 0.0;
    double sd = 0.0;
    double mse = 0.0;
    double mse_sd = 0.0;
    std::vector<double> mse_quantiles;  // 0.2, 0.4, 0.6, 0.8
    std::vector<double> bias_quantiles;
    bool has_band = false;
    double width_mean = 0.0;
    double width_sd = 0.0;
    std::vector<double> width_quantiles;
    double coverage = 0.0;
    std::map<std::pair<std::size_t, double>, std::size_t> selections;  // (k, λ) → count
    std::vector<ReplicationResult> runs;

    double selection_share(std::size_t k) const;
};

ReplicationResult run_replication(const McConfig& cfg, std::size_t r);
McSummary summarize(const std::string& estimator, const std::string& dgp, std::size_t n, const std::string& k_label,
                    const std::string& lambda_label, std::vector<ReplicationResult> runs);
McSummary run_monte_carlo(const McConfig& cfg);

// SEP: separate ridge-series fits of u and t on p; ratio with the
// denominator floored at 1e-6 in magnitude.
struct SepFit {
    SeriesRatioFit numerator;
    SeriesRatioFit denominator;
};

SepFit sep_baseline(const BasisMatrix& p_u, const std::vector<double>& u, double lambda_u, const BasisMatrix& p_t,
                    const std::vector<double>& t, double lambda_t);

struct SepPrediction {
    Eigen::VectorXd value;
    std::vector<bool> floored;
};

SepPrediction sep_predict(const SepFit& fit, const Eigen::MatrixXd& v);

// Fixed-(k, λ) sweep; every cell sees the same replications.
struct SweepConfig {
    DgpKind dgp = DgpKind::DGP_L;
    std::size_t n = 2000;
    std::size_t replications = 200;
    std::uint64_t base_seed = 1;
    std::vector<std::size_t> degrees{1, 2, 3};
    std::vector<double> lambdas{0.001, 0.01, 0.1, 1.0};
    std::vector<EstimatorKind> estimators{EstimatorKind::DSR, EstimatorKind::SEP};
    std::size_t threads = 1;
};

std::vector<McSummary> run_sensitivity(const SweepConfig& cfg);

std::string campaign_csv(const std::vector<McSummary>& rows);

}  // namespace cefr::sim
