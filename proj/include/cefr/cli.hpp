#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cefr/crossfit.hpp"
#include "cefr/dataset.hpp"
#include "cefr/error.hpp"
#include "cefr/signals.hpp"
#include "cefr/simharness.hpp"

namespace cefr::cli {

enum class Command { estimate, select, simulate, band };

const char* to_string(Command c);
Command command_from_string(const std::string& s);

struct GridSpec {
    std::size_t points = 100;
    double lower_quantile = 0.01;
    double upper_quantile = 0.99;
    std::optional<double> lower, upper;      // explicit range for a single covariate
    std::vector<std::vector<double>> values;  // explicit rows; wins when non-empty
};

struct InferenceSpec {
    std::size_t bootstrap_draws = 1000;
    double delta = 0.05;
    GridSpec grid;
};

struct SelectionSpec {
    std::vector<std::size_t> degrees{1, 2, 3};
    std::vector<double> lambdas{0.0};
    std::size_t folds = 5;
    bool interactions = true;
};

struct SimulationSpec {
    sim::DgpKind dgp = sim::DgpKind::DGP_L;
    std::vector<std::size_t> sizes{2000};
    std::size_t replications = 200;
    std::vector<sim::EstimatorKind> estimators{sim::EstimatorKind::DSR};
    bool cross_validate = true;
    std::size_t fixed_degree = 1;
    double fixed_lambda = 0.0;
    // Unset fields take the estimator's defaults (see sim::McConfig and
    // sim::osr_defaults).
    std::optional<std::vector<std::size_t>> degrees;
    std::optional<std::vector<double>> lambdas;
    std::size_t cv_folds = 5;
    std::optional<bool> inference;
    double trim_eps = 0.01;
    bool sweep = false;  // fixed-(k, lambda) grid over degrees x lambdas
};

struct RunConfig {
    Command command = Command::estimate;
    std::uint64_t seed = 0;
    std::string output_dir = ".";
    std::optional<std::size_t> threads;

    std::string data_path;
    ColumnMapping mapping;
    SignalSpec signal;
    bool denominator_positive = false;
    LearnerSet learners;  // roles left out of the config get GBT defaults
    std::size_t crossfit_folds = 5;

    std::optional<std::size_t> model_degree;
    double model_lambda = 0.0;
    bool model_interactions = true;
    std::optional<SelectionSpec> selection;
    InferenceSpec inference;
    SimulationSpec simulation;
    std::string fit_report_path;

    // The effective config (overrides applied, paths resolved, run-only
    // fields removed). Its hash identifies every artifact.
    nlohmann::json echo;
    std::string hash;
};

// Validates `doc` for `command`. Errors are ErrorKind::config and name the
// offending field path. Relative paths resolve against `base_dir`.
RunConfig parse_config(const nlohmann::json& doc, Command command, const std::string& base_dir = ".",
                       std::optional<std::uint64_t> seed_override = std::nullopt);

std::string config_hash(const nlohmann::json& doc);

int exit_code(ErrorKind kind);

// Runs one command and writes its artifacts; returns the process exit code.
// Messages go to `err`, the list of written files to `out`.
int run(Command command, const std::string& config_path, const std::optional<std::string>& output_dir,
        std::optional<std::uint64_t> seed_override, std::ostream& out, std::ostream& err);

}  // namespace cefr::cli
