#include "cefr/crossfit.hpp"

#include "cefr/error.hpp"
#include "cefr/parallel.hpp"

namespace cefr {

namespace {

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    return out;
}

SignalColumns take(const SignalColumns& c, const std::vector<std::size_t>& rows) {
    auto pick = [&](const std::vector<double>& v) {
        std::vector<double> out;
        if (v.empty()) return out;
        out.reserve(rows.size());
        for (auto r : rows) out.push_back(v[r]);
        return out;
    };
    return {pick(c.y), pick(c.d), pick(c.z), pick(c.w), pick(c.h)};
}

const LearnerSpec& learner_for(const LearnerSet& learners, Role role) {
    auto it = learners.find(role);
    if (it == learners.end())
        throw Error(ErrorKind::config, "crossfit", std::string("no learner configured for role ") + to_string(role));
    return it->second;
}

}  // namespace

std::vector<std::size_t> FoldPlan::rows_in(std::size_t g) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == static_cast<int>(g)) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldPlan::rows_outside(std::size_t g) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] != static_cast<int>(g)) out.push_back(i);
    return out;
}

FoldPlan make_folds(std::size_t n, std::size_t g, SeededRng& rng) {
    if (g < 2 || g > n)
        throw Error(ErrorKind::input, "crossfit",
                    "fold count " + std::to_string(g) + " must be in [2, " + std::to_string(n) + "]");
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    FoldPlan plan;
    plan.n = n;
    plan.g_folds = g;
    plan.assignment.assign(n, 0);
    for (std::size_t pos = 0; pos < n; ++pos) plan.assignment[perm[pos]] = static_cast<int>(pos % g);
    return plan;
}

std::string arm_label(Estimand e, Role role, std::size_t arm) {
    std::string r = to_string(role);
    switch (e) {
        case Estimand::LATE:
        case Estimand::RATIO_LATE:
        case Estimand::ALT_RATIO_LATE: return r + " arm Z=" + std::to_string(arm);
        case Estimand::RATIO_CATE:
        case Estimand::ALT_RATIO_CATE: return r + " arm D=" + std::to_string(arm);
        case Estimand::IDID:
            return r + " cell (W=" + std::to_string(arm / 2) + ",Z=" + std::to_string(arm % 2) + ")";
        case Estimand::DATA_COMB:
            return r + " cell (H=" + (role == Role::outcome ? "1" : "0") + ",W=" + std::to_string(arm) + ")";
        case Estimand::TWO_SAMPLE_LATE:
            return r + " cell (H=" + (role == Role::outcome ? "1" : "0") + ",Z=" + std::to_string(arm) + ")";
        case Estimand::TWO_SAMPLE_IDID:
            return r + " cell (H=" + (role == Role::outcome ? "1" : "0") + ",W=" + std::to_string(arm / 2) +
                   ",Z=" + std::to_string(arm % 2) + ")";
        case Estimand::RAW: break;
    }
    return r;
}

std::string propensity_cell_label(Estimand e, std::size_t label) {
    auto s = [](std::size_t v) { return std::to_string(v); };
    switch (e) {
        case Estimand::LATE:
        case Estimand::RATIO_LATE:
        case Estimand::ALT_RATIO_LATE: return "propensity class Z=" + s(label);
        case Estimand::RATIO_CATE:
        case Estimand::ALT_RATIO_CATE: return "propensity class D=" + s(label);
        case Estimand::IDID: return "propensity cell (W=" + s(label / 2) + ",Z=" + s(label % 2) + ")";
        case Estimand::DATA_COMB: return "propensity cell (H=" + s(label / 2) + ",W=" + s(label % 2) + ")";
        case Estimand::TWO_SAMPLE_LATE: return "propensity cell (H=" + s(label / 2) + ",Z=" + s(label % 2) + ")";
        case Estimand::TWO_SAMPLE_IDID:
            return "propensity cell (H=" + s(label / 4) + ",W=" + s((label / 2) % 2) + ",Z=" + s(label % 2) + ")";
        case Estimand::RAW: break;
    }
    return "propensity";
}

SignalPair crossfit_signals(const SignalSpec& spec, const ColumnFrame& frame, const ColumnMapping& mapping,
                            const LearnerSet& learners, const FoldPlan& plan, const SeededRng& rng,
                            std::size_t threads, CrossfitLog* log) {
    const Estimand e = spec.estimand;
    const SignalColumns cols = signal_columns(spec, frame, mapping);
    if (plan.n != frame.n_rows())
        throw Error(ErrorKind::input, "crossfit", "fold plan size does not match the frame");
    if (e == Estimand::RAW) {
        SignalPair out = signals_from_predictions(spec, cols, {});
        for (std::size_t i = 0; i < out.fold_id.size(); ++i) out.fold_id[i] = plan.assignment[i];
        return out;
    }

    const NuisanceLayout lay = nuisance_layout(e);
    const Eigen::MatrixXd x = subvector(frame, mapping.covariates);
    const std::size_t g_folds = plan.g_folds;
    std::vector<SignalPair> pieces(g_folds);
    std::vector<std::vector<std::size_t>> train_rows(g_folds), eval_rows(g_folds);

    parallel_for(g_folds, threads, [&](std::size_t g) {
        const std::vector<std::size_t> train = plan.rows_outside(g);
        const std::vector<std::size_t> held = plan.rows_in(g);
        const SeededRng fold_rng = rng.derive(g);
        const Eigen::MatrixXd x_held = rows_of(x, held);
        auto degenerate = [&](const std::string& cell) {
            return Error(ErrorKind::degenerate, "crossfit",
                         "fold " + std::to_string(g) + ": too few training rows in " + cell);
        };

        auto fit_arms = [&](Role role, std::size_t arms, std::size_t stream) {
            std::vector<std::vector<double>> preds;
            for (std::size_t a = 0; a < arms; ++a) {
                std::vector<std::size_t> rows;
                for (auto i : train)
                    if (in_arm(e, role, a, cols, i)) rows.push_back(i);
                if (rows.size() < 2) throw degenerate(arm_label(e, role, a));
                Eigen::VectorXd target(static_cast<Eigen::Index>(rows.size()));
                for (std::size_t j = 0; j < rows.size(); ++j) target(static_cast<Eigen::Index>(j)) = arm_response(e, role, cols, rows[j]);
                SeededRng r = fold_rng.derive(stream * 16 + a);
                FittedModel m = fit(learner_for(learners, role), rows_of(x, rows), target, r);
                Eigen::VectorXd v = predict(m, x_held);
                preds.emplace_back(v.data(), v.data() + v.size());
            }
            return preds;
        };

        NuisancePredictions p;
        p.outcome = fit_arms(Role::outcome, lay.outcome_arms, 0);
        p.treatment = fit_arms(Role::treatment, lay.treatment_arms, 1);

        const LearnerSpec& prop_spec = learner_for(learners, Role::propensity);
        if (!prop_spec.is_classifier())
            throw Error(ErrorKind::config, "crossfit", "the propensity learner must be a classifier");
        const std::size_t classes = lay.propensity_classes;
        Eigen::VectorXd labels(static_cast<Eigen::Index>(train.size()));
        std::vector<std::size_t> counts(classes, 0);
        for (std::size_t j = 0; j < train.size(); ++j) {
            std::size_t l = propensity_label(e, cols, train[j]);
            labels(static_cast<Eigen::Index>(j)) = static_cast<double>(l);
            counts[l] += 1;
        }
        for (std::size_t k = 0; k < classes; ++k)
            if (counts[k] == 0) throw degenerate(propensity_cell_label(e, k));
        SeededRng prop_rng = fold_rng.derive(2 * 16);
        FittedModel prop = fit(prop_spec, rows_of(x, train), labels, prop_rng, classes);
        if (classes == 2) {
            Eigen::VectorXd v = predict(prop, x_held);
            p.propensity.emplace_back(v.data(), v.data() + v.size());
        } else {
            Eigen::MatrixXd pr = predict_proba(prop, x_held);
            for (Eigen::Index k = 0; k < pr.cols(); ++k) {
                Eigen::VectorXd col = pr.col(k);
                p.propensity.emplace_back(col.data(), col.data() + col.size());
            }
        }
        pieces[g] = signals_from_predictions(spec, take(cols, held), p);
        train_rows[g] = train;
        eval_rows[g] = held;
    });

    SignalPair out;
    out.u.assign(frame.n_rows(), 0.0);
    out.t.assign(frame.n_rows(), 0.0);
    out.fold_id.assign(frame.n_rows(), -1);
    for (std::size_t g = 0; g < g_folds; ++g) {
        for (std::size_t j = 0; j < eval_rows[g].size(); ++j) {
            const std::size_t i = eval_rows[g][j];
            out.u[i] = pieces[g].u[j];
            out.t[i] = pieces[g].t[j];
            out.fold_id[i] = static_cast<int>(g);
        }
    }
    if (log) {
        log->training_rows = std::move(train_rows);
        log->evaluated_rows = std::move(eval_rows);
    }
    return out;
}

}  // namespace cefr
