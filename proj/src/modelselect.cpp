#include "cefr/modelselect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cefr/error.hpp"
#include "cefr/estimator.hpp"
#include "cefr/parallel.hpp"

namespace cefr {

double cv_criterion(const Eigen::VectorXd& theta_hat, const std::vector<double>& u, const std::vector<double>& t) {
    const std::size_t n = u.size();
    if (n == 0) throw Error(ErrorKind::input, "modelselect", "empty validation fold");
    if (t.size() != n || static_cast<std::size_t>(theta_hat.size()) != n)
        throw Error(ErrorKind::input, "modelselect", "criterion inputs differ in length");
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double th = theta_hat(static_cast<Eigen::Index>(i));
        a += t[i] * th * th;
        b += u[i] * th;
    }
    const double nd = static_cast<double>(n);
    return a / nd - 2.0 * (b / nd);
}

SelectionResult select_model(const std::vector<Candidate>& candidates, const FoldFit& pipeline, const FoldPlan& plan,
                             const std::vector<double>& u, const std::vector<double>& t, const SelectOptions& opts) {
    if (!opts.denominator_positive)
        throw Error(ErrorKind::selection, "modelselect",
                    "cross-validation is only valid when the denominator function is known to be positive; "
                    "fix the basis degree and lambda manually instead");
    if (candidates.empty()) throw Error(ErrorKind::input, "modelselect", "no candidates");

    const std::size_t nc = candidates.size(), g = plan.g_folds;
    std::vector<std::vector<std::size_t>> held(g);
    std::vector<std::vector<double>> fu(g), ft(g);
    for (std::size_t f = 0; f < g; ++f) {
        held[f] = plan.rows_in(f);
        for (auto i : held[f]) {
            fu[f].push_back(u[i]);
            ft[f].push_back(t[i]);
        }
    }

    std::vector<double> fold_scores(nc * g, 0.0);
    std::vector<char> ok(nc * g, 1);
    parallel_for(nc * g, opts.threads, [&](std::size_t job) {
        const std::size_t c = job / g, f = job % g;
        try {
            Eigen::VectorXd th = pipeline(candidates[c], f);
            fold_scores[job] = cv_criterion(th, fu[f], ft[f]);
            ok[job] = std::isfinite(fold_scores[job]);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::singular && e.kind() != ErrorKind::input) throw;
            ok[job] = 0;
        }
    });

    SelectionResult res;
    res.folds = g;
    for (std::size_t c = 0; c < nc; ++c) {
        CandidateScore s;
        s.candidate = candidates[c];
        s.k = basis_dim(candidates[c].basis);
        double sum = 0.0;
        for (std::size_t f = 0; f < g; ++f) {
            s.valid = s.valid && ok[c * g + f];
            sum += fold_scores[c * g + f];
        }
        s.score = s.valid ? sum / static_cast<double>(g) : std::numeric_limits<double>::quiet_NaN();
        if (!s.valid) {
            std::ostringstream os;
            os << "candidate k=" << s.k << " lambda=" << candidates[c].lambda << " excluded (non-finite score)";
            res.warnings.push_back(os.str());
        }
        res.scores.push_back(s);
    }

    std::vector<std::size_t> order(nc);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (res.scores[a].k != res.scores[b].k) return res.scores[a].k < res.scores[b].k;
        return candidates[a].lambda < candidates[b].lambda;
    });
    std::size_t best = nc;
    for (auto c : order) {
        if (!res.scores[c].valid) continue;
        if (best == nc || res.scores[c].score < res.scores[best].score) best = c;
    }
    if (best == nc) throw Error(ErrorKind::selection, "modelselect", "every candidate produced a non-finite score");
    res.chosen = candidates[best];
    return res;
}

SelectionResult select_series_ratio(const std::vector<Candidate>& candidates, const Eigen::MatrixXd& v,
                                    const std::vector<double>& u, const std::vector<double>& t,
                                    const SelectOptions& opts, SeededRng& rng) {
    const std::size_t n = u.size();
    if (t.size() != n || static_cast<std::size_t>(v.rows()) != n)
        throw Error(ErrorKind::input, "modelselect", "signal lengths do not match the target covariates");
    if (!opts.denominator_positive) return select_model(candidates, nullptr, FoldPlan{}, u, t, opts);
    FoldPlan plan = make_folds(n, opts.folds, rng);
    const std::size_t g = plan.g_folds;

    struct Cache {
        BasisSpec spec;
        BasisMatrix p;
        std::vector<Eigen::MatrixXd> q;
        std::vector<Eigen::VectorXd> pu;
        std::vector<Eigen::MatrixXd> held_p;
    };
    std::vector<Cache> caches;
    for (const auto& c : candidates) {
        bool seen = false;
        for (const auto& cc : caches) seen = seen || cc.spec == c.basis;
        if (seen) continue;
        Cache cc;
        cc.spec = c.basis;
        cc.p = build_basis(c.basis, v);
        for (std::size_t f = 0; f < g; ++f) {
            auto rows = plan.rows_in(f);
            Eigen::MatrixXd pf(static_cast<Eigen::Index>(rows.size()), cc.p.values.cols());
            std::vector<double> uf, tf;
            for (std::size_t j = 0; j < rows.size(); ++j) {
                pf.row(static_cast<Eigen::Index>(j)) = cc.p.values.row(static_cast<Eigen::Index>(rows[j]));
                uf.push_back(u[rows[j]]);
                tf.push_back(t[rows[j]]);
            }
            cc.q.push_back(weighted_gram(pf, tf));
            cc.pu.push_back(weighted_sum(pf, uf));
            cc.held_p.push_back(std::move(pf));
        }
        caches.push_back(std::move(cc));
    }
    std::vector<std::size_t> fold_n(g);
    for (std::size_t f = 0; f < g; ++f) fold_n[f] = static_cast<std::size_t>(caches.front().held_p[f].rows());

    FoldFit pipeline = [&](const Candidate& c, std::size_t fold) -> Eigen::VectorXd {
        const Cache* cc = nullptr;
        for (const auto& x : caches)
            if (x.spec == c.basis) cc = &x;
        const Eigen::Index k = cc->p.values.cols();
        Eigen::MatrixXd q = Eigen::MatrixXd::Zero(k, k);
        Eigen::VectorXd pu = Eigen::VectorXd::Zero(k);
        std::size_t n_train = 0;
        for (std::size_t f = 0; f < g; ++f) {
            if (f == fold) continue;
            q += cc->q[f];
            pu += cc->pu[f];
            n_train += fold_n[f];
        }
        SeriesRatioFit fit = fit_from_moments(q, pu, n_train, c.lambda, c.basis);
        return cc->held_p[fold] * fit.beta;
    };
    return select_model(candidates, pipeline, plan, u, t, opts);
}

std::vector<Candidate> candidate_grid(std::size_t n_vars, const std::vector<std::size_t>& degrees,
                                      const std::vector<double>& lambdas, bool interactions) {
    std::vector<Candidate> out;
    for (auto d : degrees)
        for (auto l : lambdas) out.push_back({BasisSpec{n_vars, d, interactions}, l});
    return out;
}

}  // namespace cefr
