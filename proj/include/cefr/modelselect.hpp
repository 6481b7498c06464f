#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cefr/basis.hpp"
#include "cefr/crossfit.hpp"
#include "cefr/numerics.hpp"

namespace cefr {

struct Candidate {
    BasisSpec basis;
    double lambda = 0.0;
};

struct CandidateScore {
    Candidate candidate;
    std::size_t k = 0;
    double score = 0.0;
    bool valid = true;
};

struct SelectionResult {
    Candidate chosen;
    std::vector<CandidateScore> scores;  // input order
    std::size_t folds = 0;
    std::vector<std::string> warnings;
};

struct SelectOptions {
    std::size_t folds = 5;
    // The criterion ranks models like MSE only when ζ₀ > 0; callers must
    // declare that before selection runs.
    bool denominator_positive = false;
    std::size_t threads = 1;
};

double cv_criterion(const Eigen::VectorXd& theta_hat, const std::vector<double>& u, const std::vector<double>& t);

// θ̂ on the held-out rows of `fold` (in FoldPlan::rows_in order) for a model
// trained on the other folds.
using FoldFit = std::function<Eigen::VectorXd(const Candidate&, std::size_t fold)>;

SelectionResult select_model(const std::vector<Candidate>& candidates, const FoldFit& pipeline, const FoldPlan& plan,
                             const std::vector<double>& u, const std::vector<double>& t, const SelectOptions& opts);

// Series-ratio pipeline on target covariates v (N×q_V). Fold moments are
// accumulated once per basis and reused across λ values.
SelectionResult select_series_ratio(const std::vector<Candidate>& candidates, const Eigen::MatrixXd& v,
                                    const std::vector<double>& u, const std::vector<double>& t,
                                    const SelectOptions& opts, SeededRng& rng);

std::vector<Candidate> candidate_grid(std::size_t n_vars, const std::vector<std::size_t>& degrees,
                                      const std::vector<double>& lambdas, bool interactions = true);

}  // namespace cefr
