#include "oracle_worlds.hpp"

#include <cmath>

namespace oracle {

using cefr::Estimand;

namespace {

struct Fns {
    double a, b, c, q1, q0, pz, pw, ph, pd;
    double q[4];  // IDID cells 2w+z
};

Fns fns(double x1, double x2) {
    const double t1 = std::tanh(x1), t2 = std::tanh(x2);
    Fns f{};
    f.a = 1.0 + 0.5 * t1;
    f.b = 0.8 + 0.4 * t2;
    f.c = 0.3;
    f.q1 = 0.55 + 0.15 * t1;
    f.q0 = 0.15 + 0.1 * t2;
    f.pz = 0.5 + 0.2 * t1;
    f.pw = 0.5 + 0.2 * t2;
    f.ph = 0.5 + 0.15 * std::tanh(x1 + x2);
    f.pd = 0.5 + 0.3 * t1;
    f.q[0] = 0.1 + 0.05 * t1;
    f.q[1] = 0.2 + 0.05 * t2;
    f.q[2] = 0.15 + 0.05 * t1;
    f.q[3] = 0.6 + 0.2 * t2;
    return f;
}

double idid_contrast(const Fns& f) { return f.q[0] - f.q[1] - f.q[2] + f.q[3]; }

double bern(cefr::SeededRng& rng, double p) { return rng.uniform() < p ? 1.0 : 0.0; }

std::size_t n_terms(Estimand e) {
    switch (e) {
        case Estimand::IDID:
        case Estimand::TWO_SAMPLE_IDID: return 4;
        default: return 2;
    }
}

}  // namespace

std::pair<double, double> nu_zeta(Estimand e, double x1, double x2) {
    const Fns f = fns(x1, x2);
    const double dq = f.q1 - f.q0;
    switch (e) {
        case Estimand::LATE:
        case Estimand::DATA_COMB:
        case Estimand::TWO_SAMPLE_LATE: return {f.a * dq, dq};
        case Estimand::RATIO_LATE: return {(f.b + f.a) * dq, f.b * dq};
        case Estimand::ALT_RATIO_LATE: return {f.a * dq, (f.a + 2.0 * f.b) * dq};
        case Estimand::RATIO_CATE: return {f.b + f.a, f.b};
        case Estimand::ALT_RATIO_CATE: return {f.a, f.a + 2.0 * f.b};
        case Estimand::IDID:
        case Estimand::TWO_SAMPLE_IDID: return {f.a * idid_contrast(f), idid_contrast(f)};
        case Estimand::RAW: break;
    }
    return {0.0, 1.0};
}

World make_world(Estimand e, std::size_t n, cefr::SeededRng& rng) {
    World wd;
    wd.estimand = e;
    wd.x.resize(static_cast<Eigen::Index>(n), 2);
    std::vector<double> x1(n), x2(n), y(n), d(n), z(n, 0.0), w(n, 0.0), h(n, 1.0);
    const auto lay = cefr::nuisance_layout(e);
    auto& tr = wd.truth;
    tr.outcome.assign(lay.outcome_arms, std::vector<double>(n));
    tr.treatment.assign(lay.treatment_arms, std::vector<double>(n));
    tr.propensity.assign(lay.propensity_classes == 2 ? 1 : lay.propensity_classes, std::vector<double>(n));
    wd.nu.resize(n);
    wd.zeta.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        x1[i] = rng.normal();
        x2[i] = rng.normal();
        wd.x(static_cast<Eigen::Index>(i), 0) = x1[i];
        wd.x(static_cast<Eigen::Index>(i), 1) = x2[i];
        const Fns f = fns(x1[i], x2[i]);
        const double eps = rng.normal();
        auto outcome = [&](double di) { return f.b + f.a * di + f.c * eps; };
        switch (e) {
            case Estimand::LATE:
            case Estimand::RATIO_LATE:
            case Estimand::ALT_RATIO_LATE: {
                z[i] = bern(rng, f.pz);
                d[i] = bern(rng, z[i] == 1.0 ? f.q1 : f.q0);
                y[i] = outcome(d[i]);
                for (int a = 0; a < 2; ++a) {
                    const double q = a == 1 ? f.q1 : f.q0;
                    if (e == Estimand::LATE) {
                        tr.outcome[a][i] = f.b + f.a * q;
                        tr.treatment[a][i] = q;
                    } else if (e == Estimand::RATIO_LATE) {
                        tr.outcome[a][i] = q * (f.b + f.a);
                        tr.treatment[a][i] = (1.0 - q) * f.b;
                    } else {
                        tr.outcome[a][i] = f.b + f.a * q;
                        tr.treatment[a][i] = q * (f.a + 2.0 * f.b) - f.b;
                    }
                }
                tr.propensity[0][i] = f.pz;
                break;
            }
            case Estimand::RATIO_CATE:
            case Estimand::ALT_RATIO_CATE: {
                d[i] = bern(rng, f.pd);
                y[i] = outcome(d[i]);
                tr.outcome[0][i] = f.b;
                tr.outcome[1][i] = f.b + f.a;
                tr.propensity[0][i] = f.pd;
                break;
            }
            case Estimand::IDID: {
                w[i] = bern(rng, f.pw);
                z[i] = bern(rng, f.pz);
                d[i] = bern(rng, f.q[2 * static_cast<int>(w[i]) + static_cast<int>(z[i])]);
                y[i] = outcome(d[i]);
                for (int cell = 0; cell < 4; ++cell) {
                    tr.outcome[cell][i] = f.b + f.a * f.q[cell];
                    tr.treatment[cell][i] = f.q[cell];
                    tr.propensity[cell][i] = (cell / 2 ? f.pw : 1.0 - f.pw) * (cell % 2 ? f.pz : 1.0 - f.pz);
                }
                break;
            }
            case Estimand::DATA_COMB:
            case Estimand::TWO_SAMPLE_LATE: {
                h[i] = bern(rng, f.ph);
                const double p_arm = e == Estimand::DATA_COMB ? f.pw : f.pz;
                const double arm = bern(rng, p_arm);
                (e == Estimand::DATA_COMB ? w : z)[i] = arm;
                d[i] = bern(rng, arm == 1.0 ? f.q1 : f.q0);
                y[i] = h[i] == 1.0 ? outcome(d[i]) : d[i];
                for (int a = 0; a < 2; ++a) {
                    const double q = a == 1 ? f.q1 : f.q0;
                    tr.outcome[a][i] = f.b + f.a * q;
                    tr.treatment[a][i] = q;
                }
                for (int cell = 0; cell < 4; ++cell)
                    tr.propensity[cell][i] = (cell / 2 ? f.ph : 1.0 - f.ph) * (cell % 2 ? p_arm : 1.0 - p_arm);
                break;
            }
            case Estimand::TWO_SAMPLE_IDID: {
                h[i] = bern(rng, f.ph);
                w[i] = bern(rng, f.pw);
                z[i] = bern(rng, f.pz);
                d[i] = bern(rng, f.q[2 * static_cast<int>(w[i]) + static_cast<int>(z[i])]);
                y[i] = h[i] == 1.0 ? outcome(d[i]) : d[i];
                for (int cell = 0; cell < 4; ++cell) {
                    tr.outcome[cell][i] = f.b + f.a * f.q[cell];
                    tr.treatment[cell][i] = f.q[cell];
                    const double pc = (cell / 2 ? f.pw : 1.0 - f.pw) * (cell % 2 ? f.pz : 1.0 - f.pz);
                    tr.propensity[cell][i] = (1.0 - f.ph) * pc;
                    tr.propensity[4 + cell][i] = f.ph * pc;
                }
                break;
            }
            case Estimand::RAW: break;
        }
        auto [nu, zeta] = nu_zeta(e, x1[i], x2[i]);
        wd.nu[i] = nu;
        wd.zeta[i] = zeta;
    }

    wd.frame.add_column("x1", x1);
    wd.frame.add_column("x2", x2);
    wd.frame.add_column("y", y);
    wd.frame.add_column("d", d);
    wd.frame.add_column("z", z);
    wd.frame.add_column("w", w);
    wd.frame.add_column("h", h);
    wd.mapping.covariates = {"x1", "x2"};
    wd.mapping.target_covariates = {"x1", "x2"};
    for (const auto& role : cefr::required_mapping_roles(e)) {
        if (role == "outcome") wd.mapping.outcome = "y";
        if (role == "treatment") wd.mapping.treatment = "d";
        if (role == "instrument") wd.mapping.instrument = "z";
        if (role == "time") wd.mapping.time = "w";
        if (role == "dataset_indicator") wd.mapping.dataset_indicator = "h";
    }
    return wd;
}

cefr::NuisancePredictions perturb(const World& w, double s, bool regressions, bool probabilities) {
    cefr::NuisancePredictions p = w.truth;
    const std::size_t n = static_cast<std::size_t>(w.x.rows());
    for (std::size_t i = 0; i < n; ++i) {
        const double t1 = std::tanh(w.x(static_cast<Eigen::Index>(i), 0));
        const double t2 = std::tanh(w.x(static_cast<Eigen::Index>(i), 1));
        if (regressions) {
            for (std::size_t c = 0; c < p.outcome.size(); ++c) p.outcome[c][i] += s * (0.1 * (c + 1.0) + 0.2 * t1);
            for (std::size_t c = 0; c < p.treatment.size(); ++c)
                p.treatment[c][i] += s * (0.1 * (c + 1.0) + 0.2 * t1);
        }
        if (probabilities) {
            for (std::size_t c = 0; c < p.propensity.size(); ++c) {
                const double q = p.propensity[c][i];
                p.propensity[c][i] = q + (c % 2 ? -1.0 : 1.0) * s * 0.1 * t2 * q * (1.0 - q);
            }
        }
    }
    return p;
}

double second_order_bound(Estimand e) {
    const double terms = static_cast<double>(n_terms(e));
    return terms * (0.1 * terms + 0.2) * 0.1 / 0.98;
}

Rule gauss_hermite(std::size_t m) {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    for (std::size_t i = 1; i < m; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        j(k, k - 1) = j(k - 1, k) = std::sqrt(static_cast<double>(i));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
    Rule r;
    for (std::size_t i = 0; i < m; ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        r.nodes.push_back(es.eigenvalues()(k));
        r.weights.push_back(es.eigenvectors()(0, k) * es.eigenvectors()(0, k));
    }
    return r;
}

std::vector<OrthoStep> orthogonality_steps(const World& w, bool numerator, const std::vector<double>& steps) {
    const cefr::SignalSpec spec{w.estimand, 0.01};
    const auto cols = cefr::signal_columns(spec, w.frame, w.mapping);
    const auto base = cefr::signals_from_predictions(spec, cols, w.truth);
    const auto& f0 = numerator ? base.u : base.t;
    std::vector<OrthoStep> out;
    for (double s : steps) {
        const auto moved = cefr::signals_from_predictions(spec, cols, perturb(w, s, true, true));
        const auto& fs = numerator ? moved.u : moved.t;
        std::vector<double> d(fs.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = fs[i] - f0[i];
        OrthoStep st;
        st.s = s;
        st.diff = mean(d);
        st.bound = second_order_bound(w.estimand) * s * s;
        st.se = sd(d) / std::sqrt(static_cast<double>(d.size()));
        out.push_back(st);
    }
    return out;
}

RobustCheck robustness(const World& w, Corrupt which, bool numerator) {
    cefr::NuisancePredictions p = w.truth;
    const std::size_t n = static_cast<std::size_t>(w.x.rows());
    for (std::size_t i = 0; i < n; ++i) {
        const double t2 = std::tanh(w.x(static_cast<Eigen::Index>(i), 1));
        if (which == Corrupt::regressions) {
            for (auto& arm : p.outcome) arm[i] += 1.0 + t2;
            for (auto& arm : p.treatment) arm[i] -= 0.5 + t2;
        } else {
            for (auto& col : p.propensity) col[i] = 0.5 * col[i] + 0.25 * (p.propensity.size() == 1 ? 1.0 : 0.5);
        }
    }
    const cefr::SignalSpec spec{w.estimand, 0.01};
    const auto sig = cefr::signals_from_predictions(spec, cefr::signal_columns(spec, w.frame, w.mapping), p);
    const auto& v = numerator ? sig.u : sig.t;
    RobustCheck r;
    r.mean = mean(v);
    r.se = sd(v) / std::sqrt(static_cast<double>(v.size()));
    const cefr::Estimand e = w.estimand;
    r.target = expect2([&](double a, double b) {
        auto nz = nu_zeta(e, a, b);
        return numerator ? nz.first : nz.second;
    });
    return r;
}

double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sd(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace oracle
