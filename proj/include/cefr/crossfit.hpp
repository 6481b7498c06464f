#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "cefr/dataset.hpp"
#include "cefr/numerics.hpp"
#include "cefr/signals.hpp"

namespace cefr {

struct FoldPlan {
    std::size_t n = 0;
    std::size_t g_folds = 0;
    std::vector<int> assignment;

    std::vector<std::size_t> rows_in(std::size_t g) const;
    std::vector<std::size_t> rows_outside(std::size_t g) const;
};

FoldPlan make_folds(std::size_t n, std::size_t g, SeededRng& rng);

using LearnerSet = std::map<Role, LearnerSpec>;

// Per-fold record of which rows trained the nuisances and which were scored.
struct CrossfitLog {
    std::vector<std::vector<std::size_t>> training_rows;
    std::vector<std::vector<std::size_t>> evaluated_rows;
};

std::string arm_label(Estimand e, Role role, std::size_t arm);
std::string propensity_cell_label(Estimand e, std::size_t label);

SignalPair crossfit_signals(const SignalSpec& spec, const ColumnFrame& frame, const ColumnMapping& mapping,
                            const LearnerSet& learners, const FoldPlan& plan, const SeededRng& rng,
                            std::size_t threads = 1, CrossfitLog* log = nullptr);

}  // namespace cefr
