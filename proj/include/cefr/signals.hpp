#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cefr/dataset.hpp"
#include "cefr/nuisance.hpp"

namespace cefr {

enum class Estimand {
    LATE,
    RATIO_CATE,
    ALT_RATIO_CATE,
    RATIO_LATE,
    ALT_RATIO_LATE,
    IDID,
    DATA_COMB,
    TWO_SAMPLE_LATE,
    TWO_SAMPLE_IDID,
    RAW,
};

const char* to_string(Estimand e);
Estimand estimand_from_string(const std::string& s);
std::vector<Estimand> all_estimands();

struct SignalSpec {
    Estimand estimand = Estimand::RAW;
    double trim_eps = 0.01;
};

enum class Role { outcome, treatment, propensity };

const char* to_string(Role r);

// Number of arm models per role. propensity_classes is 2 for a binary
// propensity (one probability column) and 4 or 8 for cell posteriors.
struct NuisanceLayout {
    std::size_t outcome_arms = 0;
    std::size_t treatment_arms = 0;
    std::size_t propensity_classes = 0;
};

NuisanceLayout nuisance_layout(Estimand e);

// Observed columns an estimand reads. Unused columns stay empty. For the
// data-combination family `y` holds the combined observation HY + (1-H)D.
// For RAW, `y` is u and `d` is t.
struct SignalColumns {
    std::vector<double> y, d, z, w, h;
    std::size_t size() const { return y.size(); }
};

SignalColumns signal_columns(const SignalSpec& spec, const ColumnFrame& frame, const ColumnMapping& mapping);

// Mapping roles the estimand needs; used to validate configs before loading.
std::vector<std::string> required_mapping_roles(Estimand e);

// Which rows train arm `arm` of `role`, and the response they are fit to.
bool in_arm(Estimand e, Role role, std::size_t arm, const SignalColumns& c, std::size_t i);
double arm_response(Estimand e, Role role, const SignalColumns& c, std::size_t i);
// Class label for the propensity model (binary 0/1 or cell index).
std::size_t propensity_label(Estimand e, const SignalColumns& c, std::size_t i);

// Nuisance values at each row: outcome[arm][i], treatment[arm][i],
// propensity[0][i] = P(label 1) for binary, propensity[cell][i] otherwise.
struct NuisancePredictions {
    std::vector<std::vector<double>> outcome;
    std::vector<std::vector<double>> treatment;
    std::vector<std::vector<double>> propensity;
};

struct SignalPair {
    std::vector<double> u;
    std::vector<double> t;
    std::vector<int> fold_id;
};

double dr_correction(double m, double indicator, double response, double prob);

// Pure signal kernel. Probabilities are trimmed to [eps, 1-eps] first.
SignalPair signals_from_predictions(const SignalSpec& spec, const SignalColumns& cols,
                                    const NuisancePredictions& preds);

struct NuisanceSet {
    std::map<std::size_t, FittedModel> outcome_models;
    std::map<std::size_t, FittedModel> treatment_models;
    std::optional<FittedModel> propensity_model;
};

NuisancePredictions predict_nuisances(const SignalSpec& spec, const NuisanceSet& nuis,
                                      const Eigen::MatrixXd& features);

SignalPair build_signals(const SignalSpec& spec, const ColumnFrame& frame, const ColumnMapping& mapping,
                         const NuisanceSet& nuis, const std::vector<std::size_t>& row_indices);

}  // namespace cefr
