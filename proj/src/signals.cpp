#include "cefr/signals.hpp"

#include <algorithm>
#include <array>

#include "cefr/error.hpp"

namespace cefr {

namespace {

constexpr std::array<Estimand, 10> kEstimands{
    Estimand::LATE,      Estimand::RATIO_CATE,      Estimand::ALT_RATIO_CATE, Estimand::RATIO_LATE,
    Estimand::ALT_RATIO_LATE, Estimand::IDID,       Estimand::DATA_COMB,      Estimand::TWO_SAMPLE_LATE,
    Estimand::TWO_SAMPLE_IDID, Estimand::RAW,
};

Error config_error(const std::string& what) { return Error(ErrorKind::config, "signals", what); }

// Sum after sorting so the result does not depend on cell enumeration order.
double order_free_sum(std::array<double, 4> terms) {
    std::sort(terms.begin(), terms.end());
    return ((terms[0] + terms[1]) + terms[2]) + terms[3];
}

double sign_of(std::size_t w, std::size_t z) { return (w + z) % 2 == 0 ? 1.0 : -1.0; }

}  // namespace

const char* to_string(Estimand e) {
    switch (e) {
        case Estimand::LATE: return "LATE";
        case Estimand::RATIO_CATE: return "RATIO_CATE";
        case Estimand::ALT_RATIO_CATE: return "ALT_RATIO_CATE";
        case Estimand::RATIO_LATE: return "RATIO_LATE";
        case Estimand::ALT_RATIO_LATE: return "ALT_RATIO_LATE";
        case Estimand::IDID: return "IDID";
        case Estimand::DATA_COMB: return "DATA_COMB";
        case Estimand::TWO_SAMPLE_LATE: return "TWO_SAMPLE_LATE";
        case Estimand::TWO_SAMPLE_IDID: return "TWO_SAMPLE_IDID";
        case Estimand::RAW: return "RAW";
    }
    return "?";
}

Estimand estimand_from_string(const std::string& s) {
    for (auto e : kEstimands)
        if (s == to_string(e)) return e;
    throw config_error("unknown estimand '" + s + "'");
}

std::vector<Estimand> all_estimands() { return {kEstimands.begin(), kEstimands.end()}; }

const char* to_string(Role r) {
    switch (r) {
        case Role::outcome: return "outcome";
        case Role::treatment: return "treatment";
        case Role::propensity: return "propensity";
    }
    return "?";
}

NuisanceLayout nuisance_layout(Estimand e) {
    switch (e) {
        case Estimand::LATE:
        case Estimand::RATIO_LATE:
        case Estimand::ALT_RATIO_LATE: return {2, 2, 2};
        case Estimand::DATA_COMB:
        case Estimand::TWO_SAMPLE_LATE: return {2, 2, 4};
        case Estimand::RATIO_CATE:
        case Estimand::ALT_RATIO_CATE:
            return {2, 0, 2};
        case Estimand::IDID: return {4, 4, 4};
        case Estimand::TWO_SAMPLE_IDID: return {4, 4, 8};
        case Estimand::RAW: return {0, 0, 0};
    }
    return {};
}

std::vector<std::string> required_mapping_roles(Estimand e) {
    switch (e) {
        case Estimand::LATE:
        case Estimand::RATIO_LATE:
        case Estimand::ALT_RATIO_LATE: return {"outcome", "treatment", "instrument"};
        case Estimand::RATIO_CATE:
        case Estimand::ALT_RATIO_CATE:
        case Estimand::RAW: return {"outcome", "treatment"};
        case Estimand::IDID: return {"outcome", "treatment", "instrument", "time"};
        case Estimand::DATA_COMB: return {"outcome", "time", "dataset_indicator"};
        case Estimand::TWO_SAMPLE_LATE: return {"outcome", "instrument", "dataset_indicator"};
        case Estimand::TWO_SAMPLE_IDID: return {"outcome", "instrument", "time", "dataset_indicator"};
    }
    return {};
}

SignalColumns signal_columns(const SignalSpec& spec, const ColumnFrame& frame, const ColumnMapping& mapping) {
    SignalColumns c;
    auto fetch = [&](const std::string& role) -> std::vector<double> {
        const std::optional<std::string>* name = nullptr;
        if (role == "outcome") name = &mapping.outcome;
        if (role == "treatment") name = &mapping.treatment;
        if (role == "instrument") name = &mapping.instrument;
        if (role == "time") name = &mapping.time;
        if (role == "dataset_indicator") name = &mapping.dataset_indicator;
        if (!name || !*name)
            throw Error(ErrorKind::schema, "signals",
                        std::string("estimand ") + to_string(spec.estimand) + " requires a column mapped as " + role);
        if (!frame.has(**name))
            throw Error(ErrorKind::schema, "signals", "column '" + **name + "' mapped as " + role + " not found");
        return frame.column(**name);
    };
    for (const auto& role : required_mapping_roles(spec.estimand)) {
        if (role == "outcome") c.y = fetch(role);
        if (role == "treatment") c.d = fetch(role);
        if (role == "instrument") c.z = fetch(role);
        if (role == "time") c.w = fetch(role);
        if (role == "dataset_indicator") c.h = fetch(role);
    }
    return c;
}

bool in_arm(Estimand e, Role role, std::size_t arm, const SignalColumns& c, std::size_t i) {
    const double a = static_cast<double>(arm);
    switch (e) {
        case Estimand::LATE:
        case Estimand::RATIO_LATE:
        case Estimand::ALT_RATIO_LATE: return c.z[i] == a;
        case Estimand::RATIO_CATE:
        case Estimand::ALT_RATIO_CATE: return c.d[i] == a;
        case Estimand::IDID: return c.w[i] == static_cast<double>(arm / 2) && c.z[i] == static_cast<double>(arm % 2);
        case Estimand::DATA_COMB:
            return c.h[i] == (role == Role::outcome ? 1.0 : 0.0) && c.w[i] == a;
        case Estimand::TWO_SAMPLE_LATE:
            return c.h[i] == (role == Role::outcome ? 1.0 : 0.0) && c.z[i] == a;
        case Estimand::TWO_SAMPLE_IDID:
            return c.h[i] == (role == Role::outcome ? 1.0 : 0.0) && c.w[i] == static_cast<double>(arm / 2) &&
                   c.z[i] == static_cast<double>(arm % 2);
        case Estimand::RAW: return false;
    }
    return false;
}

double arm_response(Estimand e, Role role, const SignalColumns& c, std::size_t i) {
    if (role == Role::outcome) return e == Estimand::RATIO_LATE ? c.d[i] * c.y[i] : c.y[i];
    switch (e) {
        case Estimand::RATIO_LATE: return (1.0 - c.d[i]) * c.y[i];
        case Estimand::ALT_RATIO_LATE: return (2.0 * c.d[i] - 1.0) * c.y[i];
        case Estimand::DATA_COMB:
        case Estimand::TWO_SAMPLE_LATE:
        case Estimand::TWO_SAMPLE_IDID: return c.y[i];
        default: return c.d[i];
    }
}

std::size_t propensity_label(Estimand e, const SignalColumns& c, std::size_t i) {
    auto b = [](double v) { return static_cast<std::size_t>(v); };
    switch (e) {
        case Estimand::LATE:
        case Estimand::RATIO_LATE:
        case Estimand::ALT_RATIO_LATE: return b(c.z[i]);
        case Estimand::RATIO_CATE:
        case Estimand::ALT_RATIO_CATE: return b(c.d[i]);
        case Estimand::IDID: return 2 * b(c.w[i]) + b(c.z[i]);
        case Estimand::DATA_COMB: return 2 * b(c.h[i]) + b(c.w[i]);
        case Estimand::TWO_SAMPLE_LATE: return 2 * b(c.h[i]) + b(c.z[i]);
        case Estimand::TWO_SAMPLE_IDID: return 4 * b(c.h[i]) + 2 * b(c.w[i]) + b(c.z[i]);
        case Estimand::RAW: return 0;
    }
    return 0;
}

double dr_correction(double m, double indicator, double response, double prob) {
    if (!(prob > 0.0 && prob < 1.0))
        throw Error(ErrorKind::domain, "signals",
                    "probability " + std::to_string(prob) + " outside (0,1) reached the correction term");
    return m + indicator * (response - m) / prob;
}

SignalPair signals_from_predictions(const SignalSpec& spec, const SignalColumns& c, const NuisancePredictions& p) {
    const Estimand e = spec.estimand;
    const std::size_t n = c.size();
    SignalPair out;
    out.u.resize(n);
    out.t.resize(n);
    out.fold_id.assign(n, 0);
    if (e == Estimand::RAW) {
        out.u = c.y;
        out.t = c.d;
        return out;
    }
    const NuisanceLayout lay = nuisance_layout(e);
    auto check = [&](const std::vector<std::vector<double>>& v, std::size_t arms, const char* role) {
        if (v.size() < arms) throw config_error(std::string("missing ") + role + " nuisance predictions");
        for (std::size_t a = 0; a < arms; ++a)
            if (v[a].size() != n) throw config_error(std::string(role) + " predictions have the wrong length");
    };
    check(p.outcome, lay.outcome_arms, "outcome");
    check(p.treatment, lay.treatment_arms, "treatment");
    check(p.propensity, lay.propensity_classes == 2 ? 1 : lay.propensity_classes, "propensity");
    const double eps = spec.trim_eps;
    if (!(eps > 0.0 && eps < 0.5)) throw config_error("trimming eps must be in (0, 0.5)");
    auto rho = [&](std::size_t cell, std::size_t i) { return clip_probability(p.propensity[cell][i], eps); };

    for (std::size_t i = 0; i < n; ++i) {
        const auto& mu = p.outcome;
        const auto& pi = p.treatment;
        switch (e) {
            case Estimand::LATE:
            case Estimand::ALT_RATIO_LATE: {
                const double r = rho(0, i), z = c.z[i], y = c.y[i];
                const double resp = e == Estimand::LATE ? c.d[i] : (2.0 * c.d[i] - 1.0) * y;
                out.u[i] = dr_correction(mu[1][i], z, y, r) - dr_correction(mu[0][i], 1.0 - z, y, 1.0 - r);
                out.t[i] = dr_correction(pi[1][i], z, resp, r) - dr_correction(pi[0][i], 1.0 - z, resp, 1.0 - r);
                break;
            }
            case Estimand::RATIO_LATE: {
                const double r = rho(0, i), z = c.z[i];
                const double dy = c.d[i] * c.y[i], ndy = (1.0 - c.d[i]) * c.y[i];
                out.u[i] = dr_correction(mu[1][i], z, dy, r) - dr_correction(mu[0][i], 1.0 - z, dy, 1.0 - r);
                out.t[i] = dr_correction(pi[0][i], 1.0 - z, ndy, 1.0 - r) - dr_correction(pi[1][i], z, ndy, r);
                break;
            }
            case Estimand::RATIO_CATE:
            case Estimand::ALT_RATIO_CATE: {
                const double r = rho(0, i), d = c.d[i], y = c.y[i];
                const double a = dr_correction(mu[1][i], d, y, r);
                const double b = dr_correction(mu[0][i], 1.0 - d, y, 1.0 - r);
                if (e == Estimand::RATIO_CATE) {
                    out.u[i] = a;
                    out.t[i] = b;
                } else {
                    out.u[i] = a - b;
                    out.t[i] = a + b;
                }
                break;
            }
            case Estimand::IDID:
            case Estimand::TWO_SAMPLE_IDID: {
                const bool two = e == Estimand::TWO_SAMPLE_IDID;
                const double hu = two ? c.h[i] : 1.0, ht = two ? 1.0 - c.h[i] : 1.0;
                const double resp_t = two ? c.y[i] : c.d[i];
                std::array<double, 4> tu{}, tt{};
                for (std::size_t w = 0; w < 2; ++w) {
                    for (std::size_t z = 0; z < 2; ++z) {
                        const std::size_t cell = 2 * w + z;
                        const double ind = (c.w[i] == static_cast<double>(w) && c.z[i] == static_cast<double>(z)) ? 1.0 : 0.0;
                        const double s = sign_of(w, z);
                        const double ru = two ? rho(4 + cell, i) : rho(cell, i);
                        const double rt = rho(cell, i);
                        tu[cell] = s * dr_correction(mu[cell][i], hu * ind, c.y[i], ru);
                        tt[cell] = s * dr_correction(pi[cell][i], ht * ind, resp_t, rt);
                    }
                }
                out.u[i] = order_free_sum(tu);
                out.t[i] = order_free_sum(tt);
                break;
            }
            case Estimand::DATA_COMB:
            case Estimand::TWO_SAMPLE_LATE: {
                const double h = c.h[i], a = e == Estimand::DATA_COMB ? c.w[i] : c.z[i], y = c.y[i];
                out.u[i] = dr_correction(mu[1][i], h * a, y, rho(3, i)) -
                           dr_correction(mu[0][i], h * (1.0 - a), y, rho(2, i));
                out.t[i] = dr_correction(pi[1][i], (1.0 - h) * a, y, rho(1, i)) -
                           dr_correction(pi[0][i], (1.0 - h) * (1.0 - a), y, rho(0, i));
                break;
            }
            case Estimand::RAW: break;
        }
        if (!std::isfinite(out.u[i]) || !std::isfinite(out.t[i]))
            throw Error(ErrorKind::domain, "signals", "non-finite signal at row " + std::to_string(i));
    }
    return out;
}

NuisancePredictions predict_nuisances(const SignalSpec& spec, const NuisanceSet& nuis,
                                      const Eigen::MatrixXd& features) {
    const NuisanceLayout lay = nuisance_layout(spec.estimand);
    NuisancePredictions p;
    auto arms = [&](const std::map<std::size_t, FittedModel>& models, std::size_t count, const char* role) {
        std::vector<std::vector<double>> out;
        for (std::size_t a = 0; a < count; ++a) {
            auto it = models.find(a);
            if (it == models.end())
                throw config_error(std::string("missing ") + role + " model for arm " + std::to_string(a));
            Eigen::VectorXd v = predict(it->second, features);
            out.emplace_back(v.data(), v.data() + v.size());
        }
        return out;
    };
    p.outcome = arms(nuis.outcome_models, lay.outcome_arms, "outcome");
    p.treatment = arms(nuis.treatment_models, lay.treatment_arms, "treatment");
    if (lay.propensity_classes > 0) {
        if (!nuis.propensity_model) throw config_error("missing propensity model");
        if (lay.propensity_classes == 2) {
            Eigen::VectorXd v = predict(*nuis.propensity_model, features);
            p.propensity.emplace_back(v.data(), v.data() + v.size());
        } else {
            Eigen::MatrixXd pr = predict_proba(*nuis.propensity_model, features);
            if (static_cast<std::size_t>(pr.cols()) != lay.propensity_classes)
                throw config_error("propensity model has " + std::to_string(pr.cols()) + " classes, expected " +
                                   std::to_string(lay.propensity_classes));
            for (Eigen::Index k = 0; k < pr.cols(); ++k) {
                Eigen::VectorXd col = pr.col(k);
                p.propensity.emplace_back(col.data(), col.data() + col.size());
            }
        }
    }
    return p;
}

SignalPair build_signals(const SignalSpec& spec, const ColumnFrame& frame, const ColumnMapping& mapping,
                         const NuisanceSet& nuis, const std::vector<std::size_t>& row_indices) {
    ColumnFrame slice = frame.take_rows(row_indices);
    SignalColumns cols = signal_columns(spec, slice, mapping);
    if (spec.estimand == Estimand::RAW) return signals_from_predictions(spec, cols, {});
    Eigen::MatrixXd x = subvector(slice, mapping.covariates);
    return signals_from_predictions(spec, cols, predict_nuisances(spec, nuis, x));
}

}  // namespace cefr
