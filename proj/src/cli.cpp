#include "cefr/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "cefr/basis.hpp"
#include "cefr/estimator.hpp"
#include "cefr/inference.hpp"
#include "cefr/modelselect.hpp"
#include "cefr/parallel.hpp"

namespace cefr::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::uint64_t kFoldStream = 1;
constexpr std::uint64_t kCrossfitStream = 2;
constexpr std::uint64_t kSelectStream = 3;
constexpr std::uint64_t kBootstrapStream = 4;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
    throw Error(ErrorKind::config, "config", "field '" + path + "': " + what);
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void expect_object(const json& j, const std::string& path) {
    if (!j.is_object()) bad(path.empty() ? "<root>" : path, "expected an object");
}

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key)) bad(join(path, key), "unknown field");
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) bad(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) bad(path, "expected a finite number");
    return v;
}

std::uint64_t count(const json& j, const std::string& path) {
    if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0))
        bad(path, "expected a non-negative integer");
    return j.get<std::uint64_t>();
}

bool boolean(const json& j, const std::string& path) {
    if (!j.is_boolean()) bad(path, "expected true or false");
    return j.get<bool>();
}

std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) bad(path, "expected a string");
    return j.get<std::string>();
}

std::vector<std::string> strings(const json& j, const std::string& path) {
    if (!j.is_array()) bad(path, "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(text(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<double> numbers(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) bad(path, "expected a non-empty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

std::vector<std::size_t> counts(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) bad(path, "expected a non-empty array of integers");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < j.size(); ++i)
        out.push_back(static_cast<std::size_t>(count(j[i], path + "[" + std::to_string(i) + "]")));
    return out;
}

const json* find(const json& j, const std::string& key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

const json& require(const json& j, const std::string& path, const std::string& key) {
    const json* v = find(j, key);
    if (!v) bad(join(path, key), "required");
    return *v;
}

std::string resolve(const std::string& base_dir, const std::string& p) {
    fs::path path(p);
    if (path.is_relative()) path = fs::path(base_dir) / path;
    return fs::absolute(path).lexically_normal().string();
}

LearnerSpec parse_learner(const json& j, const std::string& path, LearnerSpec spec) {
    expect_object(j, path);
    check_keys(j, path,
               {"kind", "lambda", "max_iter", "tol", "n_trees", "max_depth", "learning_rate", "min_leaf", "subsample"});
    if (auto v = find(j, "kind")) {
        const std::string kind = text(*v, join(path, "kind"));
        try {
            spec.kind = learner_kind_from_string(kind);
        } catch (const Error& e) {
            bad(join(path, "kind"), e.what());
        }
    }
    if (auto v = find(j, "lambda")) spec.lambda = number(*v, join(path, "lambda"));
    if (auto v = find(j, "max_iter")) spec.max_iter = static_cast<int>(count(*v, join(path, "max_iter")));
    if (auto v = find(j, "tol")) spec.tol = number(*v, join(path, "tol"));
    if (auto v = find(j, "n_trees")) spec.n_trees = static_cast<int>(count(*v, join(path, "n_trees")));
    if (auto v = find(j, "max_depth")) spec.max_depth = static_cast<int>(count(*v, join(path, "max_depth")));
    if (auto v = find(j, "learning_rate")) spec.learning_rate = number(*v, join(path, "learning_rate"));
    if (auto v = find(j, "min_leaf")) spec.min_leaf = static_cast<int>(count(*v, join(path, "min_leaf")));
    if (auto v = find(j, "subsample")) spec.subsample = number(*v, join(path, "subsample"));
    try {
        spec.validate();
    } catch (const Error& e) {
        bad(path, e.what());
    }
    return spec;
}

LearnerSet parse_learners(const json* j) {
    LearnerSpec reg, cls;
    reg.kind = LearnerKind::gbt_regression;
    cls.kind = LearnerKind::gbt_classification;
    LearnerSet out{{Role::outcome, reg}, {Role::treatment, reg}, {Role::propensity, cls}};
    if (!j) return out;
    expect_object(*j, "learners");
    check_keys(*j, "learners", {"outcome", "treatment", "propensity"});
    for (auto role : {Role::outcome, Role::treatment, Role::propensity})
        if (auto v = find(*j, to_string(role)))
            out[role] = parse_learner(*v, join("learners", to_string(role)), out[role]);
    if (!out[Role::propensity].is_classifier()) bad("learners.propensity.kind", "the propensity learner must be a classifier");
    return out;
}

void parse_data(const json& doc, const std::string& base_dir, RunConfig& cfg, json& echo) {
    const json& data = require(doc, "", "data");
    expect_object(data, "data");
    check_keys(data, "data", {"path", "mapping"});
    cfg.data_path = resolve(base_dir, text(require(data, "data", "path"), "data.path"));
    if (!fs::is_regular_file(cfg.data_path)) bad("data.path", "file not found: " + cfg.data_path);
    echo["data"]["path"] = cfg.data_path;

    const json& m = require(data, "data", "mapping");
    expect_object(m, "data.mapping");
    check_keys(m, "data.mapping",
               {"outcome", "treatment", "instrument", "time", "dataset_indicator", "covariates", "target_covariates"});
    auto opt = [&](const char* key) -> std::optional<std::string> {
        if (auto v = find(m, key)) return text(*v, join("data.mapping", key));
        return std::nullopt;
    };
    cfg.mapping.outcome = opt("outcome");
    cfg.mapping.treatment = opt("treatment");
    cfg.mapping.instrument = opt("instrument");
    cfg.mapping.time = opt("time");
    cfg.mapping.dataset_indicator = opt("dataset_indicator");
    if (auto v = find(m, "covariates")) cfg.mapping.covariates = strings(*v, "data.mapping.covariates");
    cfg.mapping.target_covariates =
        strings(require(m, "data.mapping", "target_covariates"), "data.mapping.target_covariates");
    if (cfg.mapping.target_covariates.empty()) bad("data.mapping.target_covariates", "needs at least one column");
}

void parse_estimand(const json& doc, RunConfig& cfg) {
    const json& e = require(doc, "", "estimand");
    expect_object(e, "estimand");
    check_keys(e, "estimand", {"type", "trim_eps", "denominator_positive"});
    const std::string type = text(require(e, "estimand", "type"), "estimand.type");
    try {
        cfg.signal.estimand = estimand_from_string(type);
    } catch (const Error& err) {
        bad("estimand.type", err.what());
    }
    if (auto v = find(e, "trim_eps")) {
        cfg.signal.trim_eps = number(*v, "estimand.trim_eps");
        if (!(cfg.signal.trim_eps > 0.0 && cfg.signal.trim_eps < 0.5)) bad("estimand.trim_eps", "must be in (0, 0.5)");
    }
    if (auto v = find(e, "denominator_positive")) cfg.denominator_positive = boolean(*v, "estimand.denominator_positive");

    const Estimand est = cfg.signal.estimand;
    for (const auto& role : required_mapping_roles(est)) {
        const std::optional<std::string>* slot = nullptr;
        if (role == "outcome") slot = &cfg.mapping.outcome;
        if (role == "treatment") slot = &cfg.mapping.treatment;
        if (role == "instrument") slot = &cfg.mapping.instrument;
        if (role == "time") slot = &cfg.mapping.time;
        if (role == "dataset_indicator") slot = &cfg.mapping.dataset_indicator;
        if (slot && !*slot)
            bad("data.mapping." + role, std::string("required by estimand ") + to_string(est));
    }
    if (est != Estimand::RAW && cfg.mapping.covariates.empty())
        bad("data.mapping.covariates", std::string("estimand ") + to_string(est) + " needs nuisance covariates");
}

SelectionSpec parse_selection(const json& j) {
    expect_object(j, "selection");
    check_keys(j, "selection", {"degrees", "lambdas", "folds", "interactions"});
    SelectionSpec s;
    if (auto v = find(j, "degrees")) s.degrees = counts(*v, "selection.degrees");
    if (auto v = find(j, "lambdas")) s.lambdas = numbers(*v, "selection.lambdas");
    for (double l : s.lambdas)
        if (l < 0.0) bad("selection.lambdas", "lambdas must be >= 0");
    if (auto v = find(j, "folds")) s.folds = static_cast<std::size_t>(count(*v, "selection.folds"));
    if (s.folds < 2) bad("selection.folds", "need at least 2 folds");
    if (auto v = find(j, "interactions")) s.interactions = boolean(*v, "selection.interactions");
    return s;
}

InferenceSpec parse_inference(const json* j) {
    InferenceSpec s;
    if (!j) return s;
    expect_object(*j, "inference");
    check_keys(*j, "inference", {"bootstrap_draws", "delta", "grid"});
    if (auto v = find(*j, "bootstrap_draws")) s.bootstrap_draws = static_cast<std::size_t>(count(*v, "inference.bootstrap_draws"));
    if (s.bootstrap_draws < 100) bad("inference.bootstrap_draws", "need at least 100 draws");
    if (auto v = find(*j, "delta")) s.delta = number(*v, "inference.delta");
    if (!(s.delta > 0.0 && s.delta < 1.0)) bad("inference.delta", "must be in (0, 1)");
    if (auto g = find(*j, "grid")) {
        expect_object(*g, "inference.grid");
        check_keys(*g, "inference.grid", {"points", "lower_quantile", "upper_quantile", "lower", "upper", "values"});
        if (auto v = find(*g, "points")) s.grid.points = static_cast<std::size_t>(count(*v, "inference.grid.points"));
        if (s.grid.points < 1) bad("inference.grid.points", "need at least one point");
        if (auto v = find(*g, "lower_quantile")) s.grid.lower_quantile = number(*v, "inference.grid.lower_quantile");
        if (auto v = find(*g, "upper_quantile")) s.grid.upper_quantile = number(*v, "inference.grid.upper_quantile");
        if (!(0.0 <= s.grid.lower_quantile && s.grid.lower_quantile < s.grid.upper_quantile &&
              s.grid.upper_quantile <= 1.0))
            bad("inference.grid", "need 0 <= lower_quantile < upper_quantile <= 1");
        if (auto v = find(*g, "lower")) s.grid.lower = number(*v, "inference.grid.lower");
        if (auto v = find(*g, "upper")) s.grid.upper = number(*v, "inference.grid.upper");
        if (s.grid.lower.has_value() != s.grid.upper.has_value())
            bad("inference.grid", "lower and upper must be given together");
        if (s.grid.lower && !(*s.grid.lower <= *s.grid.upper)) bad("inference.grid", "lower must not exceed upper");
        if (auto v = find(*g, "values")) {
            if (!v->is_array() || v->empty()) bad("inference.grid.values", "expected a non-empty array of rows");
            for (std::size_t i = 0; i < v->size(); ++i) {
                const std::string p = "inference.grid.values[" + std::to_string(i) + "]";
                const json& row = (*v)[i];
                s.grid.values.push_back(row.is_array() ? numbers(row, p) : std::vector<double>{number(row, p)});
                if (s.grid.values.back().size() != s.grid.values.front().size()) bad(p, "rows differ in length");
            }
        }
    }
    return s;
}

void parse_simulation(const json& j, RunConfig& cfg) {
    expect_object(j, "simulation");
    check_keys(j, "simulation",
               {"dgp", "sizes", "replications", "estimators", "cross_validate", "fixed_degree", "fixed_lambda",
                "degrees", "lambdas", "cv_folds", "inference", "trim_eps", "sweep"});
    SimulationSpec& s = cfg.simulation;
    const std::string dgp = text(require(j, "simulation", "dgp"), "simulation.dgp");
    try {
        s.dgp = sim::dgp_from_string(dgp);
    } catch (const Error& e) {
        bad("simulation.dgp", e.what());
    }
    if (auto v = find(j, "sizes")) s.sizes = counts(*v, "simulation.sizes");
    for (auto n : s.sizes)
        if (n < 10) bad("simulation.sizes", "sample sizes must be at least 10");
    if (auto v = find(j, "replications")) s.replications = static_cast<std::size_t>(count(*v, "simulation.replications"));
    if (s.replications < 1) bad("simulation.replications", "need at least one replication");
    if (auto v = find(j, "estimators")) {
        s.estimators.clear();
        for (const auto& name : strings(*v, "simulation.estimators")) {
            try {
                s.estimators.push_back(sim::estimator_from_string(name));
            } catch (const Error& e) {
                bad("simulation.estimators", e.what());
            }
        }
        if (s.estimators.empty()) bad("simulation.estimators", "need at least one estimator");
    }
    if (auto v = find(j, "cross_validate")) s.cross_validate = boolean(*v, "simulation.cross_validate");
    if (auto v = find(j, "fixed_degree")) s.fixed_degree = static_cast<std::size_t>(count(*v, "simulation.fixed_degree"));
    if (auto v = find(j, "fixed_lambda")) s.fixed_lambda = number(*v, "simulation.fixed_lambda");
    if (s.fixed_lambda < 0.0) bad("simulation.fixed_lambda", "must be >= 0");
    if (auto v = find(j, "degrees")) s.degrees = counts(*v, "simulation.degrees");
    if (auto v = find(j, "lambdas")) s.lambdas = numbers(*v, "simulation.lambdas");
    if (s.lambdas)
        for (double l : *s.lambdas)
            if (l < 0.0) bad("simulation.lambdas", "lambdas must be >= 0");
    if (auto v = find(j, "cv_folds")) s.cv_folds = static_cast<std::size_t>(count(*v, "simulation.cv_folds"));
    if (s.cv_folds < 2) bad("simulation.cv_folds", "need at least 2 folds");
    if (auto v = find(j, "inference")) s.inference = boolean(*v, "simulation.inference");
    if (auto v = find(j, "trim_eps")) s.trim_eps = number(*v, "simulation.trim_eps");
    if (!(s.trim_eps > 0.0 && s.trim_eps < 0.5)) bad("simulation.trim_eps", "must be in (0, 0.5)");
    if (auto v = find(j, "sweep")) s.sweep = boolean(*v, "simulation.sweep");
    if (s.sweep) {
        if (s.dgp == sim::DgpKind::DGP_OSR) bad("simulation.sweep", "the sweep covers DGP_L and DGP_Q only");
        for (auto e : s.estimators)
            if (e == sim::EstimatorKind::OSR) bad("simulation.sweep", "the sweep covers DSR and SEP only");
    }
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string fmt(double v) {
    if (!std::isfinite(v)) return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json to_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

json to_json(const Eigen::MatrixXd& m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(to_json(Eigen::VectorXd(m.row(i).transpose())));
    return a;
}

Eigen::VectorXd vector_from(const json& j, const std::string& what) {
    if (!j.is_array()) throw Error(ErrorKind::input, "cli", "stored fit: '" + what + "' is not an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw Error(ErrorKind::input, "cli", "stored fit: '" + what + "' has a non-number");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

Eigen::MatrixXd matrix_from(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) throw Error(ErrorKind::input, "cli", "stored fit: '" + what + "' is not a matrix");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        Eigen::VectorXd r = vector_from(j[i], what);
        if (r.size() != m.cols()) throw Error(ErrorKind::input, "cli", "stored fit: '" + what + "' is ragged");
        m.row(static_cast<Eigen::Index>(i)) = r.transpose();
    }
    return m;
}

json basis_json(const BasisSpec& b) {
    json e = json::array();
    for (const auto& ex : basis_exponents(b)) e.push_back(ex);
    return {{"n_vars", b.n_vars}, {"max_degree", b.max_degree}, {"interactions", b.include_interactions},
            {"k", basis_dim(b)}, {"exponents", e}};
}

Eigen::MatrixXd build_grid(const GridSpec& g, const Eigen::MatrixXd* v, std::size_t q) {
    if (!g.values.empty()) {
        if (g.values.front().size() != q)
            bad("inference.grid.values", "rows need " + std::to_string(q) + " entries, one per target covariate");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(g.values.size()), static_cast<Eigen::Index>(q));
        for (std::size_t i = 0; i < g.values.size(); ++i)
            for (std::size_t j = 0; j < q; ++j)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g.values[i][j];
        return m;
    }
    if (q != 1) bad("inference.grid.values", "several target covariates need explicit grid values");
    if (g.lower) {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(g.points), 1);
        for (std::size_t i = 0; i < g.points; ++i)
            m(static_cast<Eigen::Index>(i), 0) =
                g.points == 1 ? 0.5 * (*g.lower + *g.upper)
                              : *g.lower + (*g.upper - *g.lower) * static_cast<double>(i) /
                                               static_cast<double>(g.points - 1);
        return m;
    }
    if (!v) bad("inference.grid", "give values or lower/upper when no data is loaded");
    return default_grid(*v, g.points, g.lower_quantile, g.upper_quantile);
}

json inference_json(const InferenceReport& r) {
    return {{"delta", r.delta},
            {"bootstrap_draws", r.b_draws},
            {"bootstrap_seed", r.bootstrap_seed},
            {"pointwise_critical_value", r.pointwise_critical_value},
            {"uniform_critical_value", r.critical_value},
            {"grid", to_json(r.grid)},
            {"theta_hat", to_json(r.theta_grid)},
            {"sigma", to_json(r.sigma_grid)},
            {"pointwise_lo", to_json(r.pointwise_lo)},
            {"pointwise_hi", to_json(r.pointwise_hi)},
            {"uniform_lo", to_json(r.uniform_lo)},
            {"uniform_hi", to_json(r.uniform_hi)}};
}

std::string comment_line(const RunConfig& cfg) {
    return "# cefr config_hash=" + cfg.hash + " seed=" + std::to_string(cfg.seed) + "\n";
}

std::string band_csv(const RunConfig& cfg, const std::vector<std::string>& names, const InferenceReport& r) {
    std::ostringstream os;
    os << comment_line(cfg);
    for (const auto& n : names) os << n << ',';
    os << "theta_hat,sigma,pw_lo,pw_hi,unif_lo,unif_hi\n";
    for (Eigen::Index i = 0; i < r.grid.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.grid.cols(); ++j) os << fmt(r.grid(i, j)) << ',';
        os << fmt(r.theta_grid(i)) << ',' << fmt(r.sigma_grid(i)) << ',' << fmt(r.pointwise_lo(i)) << ','
           << fmt(r.pointwise_hi(i)) << ',' << fmt(r.uniform_lo(i)) << ',' << fmt(r.uniform_hi(i)) << '\n';
    }
    return os.str();
}

void write_file(const fs::path& path, const std::string& content, std::ostream& out) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::input, "cli", "cannot write '" + path.string() + "'");
    f << content;
    if (!f) throw Error(ErrorKind::input, "cli", "failed writing '" + path.string() + "'");
    out << path.string() << '\n';
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::size_t resolve_threads(const RunConfig& cfg) {
    if (const char* env = std::getenv("CEFR_THREADS")) {
        char* end = nullptr;
        const long long v = std::strtoll(env, &end, 10);
        if (end == env || *end != '\0' || v < 1)
            throw Error(ErrorKind::config, "config", "CEFR_THREADS must be a positive integer");
        return static_cast<std::size_t>(v);
    }
    return cfg.threads.value_or(default_threads());
}

struct Signals {
    ColumnFrame frame;
    Eigen::MatrixXd v;
    SignalPair pair;
};

Signals load_signals(const RunConfig& cfg, std::size_t threads) {
    Signals s;
    LoadOptions opts;
    opts.treatment_is_binary = cfg.signal.estimand != Estimand::RAW;
    s.frame = load_csv(cfg.data_path, cfg.mapping, opts);
    SeededRng root(cfg.seed);
    SeededRng plan_rng = root.derive(kFoldStream);
    FoldPlan plan = make_folds(s.frame.n_rows(), cfg.crossfit_folds, plan_rng);
    s.pair = crossfit_signals(cfg.signal, s.frame, cfg.mapping, cfg.learners, plan, root.derive(kCrossfitStream),
                              threads);
    s.v = subvector(s.frame, cfg.mapping.target_covariates);
    return s;
}

void selection_gate(const RunConfig& cfg) {
    const Estimand e = cfg.signal.estimand;
    if (e == Estimand::IDID || e == Estimand::TWO_SAMPLE_IDID)
        throw Error(ErrorKind::selection, "select",
                    std::string("model selection is refused for estimand ") + to_string(e) +
                        ": its denominator can change sign, so the cross-validation criterion does not rank models "
                        "by MSE; fix model.degree and model.lambda and run estimate instead");
}

SelectionResult run_selection(const RunConfig& cfg, const Signals& s, std::size_t threads) {
    selection_gate(cfg);
    const SelectionSpec& sel = *cfg.selection;
    SelectOptions opts;
    opts.folds = sel.folds;
    opts.denominator_positive = cfg.denominator_positive;
    opts.threads = threads;
    SeededRng rng = SeededRng(cfg.seed).derive(kSelectStream);
    return select_series_ratio(candidate_grid(static_cast<std::size_t>(s.v.cols()), sel.degrees, sel.lambdas,
                                              sel.interactions),
                               s.v, s.pair.u, s.pair.t, opts, rng);
}

json selection_json(const SelectionResult& r) {
    json scores = json::array();
    for (const auto& c : r.scores)
        scores.push_back({{"degree", c.candidate.basis.max_degree},
                          {"k", c.k},
                          {"lambda", c.candidate.lambda},
                          {"score", c.valid ? json(c.score) : json(nullptr)},
                          {"valid", c.valid}});
    return {{"chosen",
             {{"degree", r.chosen.basis.max_degree},
              {"k", basis_dim(r.chosen.basis)},
              {"lambda", r.chosen.lambda},
              {"interactions", r.chosen.basis.include_interactions}}},
            {"folds", r.folds},
            {"scores", scores},
            {"warnings", r.warnings}};
}

json seeds_json(const RunConfig& cfg) {
    const SeededRng root(cfg.seed);
    return {{"base", cfg.seed},
            {"folds", root.derive(kFoldStream).seed()},
            {"crossfit", root.derive(kCrossfitStream).seed()},
            {"selection", root.derive(kSelectStream).seed()},
            {"bootstrap", root.derive(kBootstrapStream).seed()}};
}

json header(const RunConfig& cfg, const char* artifact) {
    return {{"artifact", artifact}, {"config", cfg.echo}, {"config_hash", cfg.hash}, {"seeds", seeds_json(cfg)}};
}

void run_estimate(const RunConfig& cfg, const fs::path& dir, std::size_t threads, std::ostream& out) {
    Signals s = load_signals(cfg, threads);
    const std::size_t q = static_cast<std::size_t>(s.v.cols());
    json report = header(cfg, "fit_report");
    Candidate chosen;
    if (cfg.model_degree) {
        chosen = {BasisSpec{q, *cfg.model_degree, cfg.model_interactions}, cfg.model_lambda};
        report["selection"] = nullptr;
    } else {
        SelectionResult sel = run_selection(cfg, s, threads);
        chosen = sel.chosen;
        report["selection"] = selection_json(sel);
    }
    BasisMatrix p = build_basis(chosen.basis, s.v);
    SeriesRatioFit fit = fit_series_ratio(p, s.pair.u, s.pair.t, chosen.lambda);
    SymMatrix omega = estimate_covariance(fit, p, s.pair.u, s.pair.t);
    Eigen::MatrixXd grid = build_grid(cfg.inference.grid, &s.v, q);
    InferenceReport band = confidence_band(fit, omega, grid, cfg.inference.delta, cfg.inference.bootstrap_draws,
                                           SeededRng(cfg.seed).derive(kBootstrapStream), threads);

    report["estimand"] = to_string(cfg.signal.estimand);
    report["n"] = fit.n;
    report["target_covariates"] = cfg.mapping.target_covariates;
    report["basis"] = basis_json(chosen.basis);
    report["lambda"] = fit.lambda;
    report["beta"] = to_json(fit.beta);
    report["q_hat"] = to_json(fit.q_hat.matrix());
    report["omega_hat"] = to_json(omega.matrix());
    report["inference"] = inference_json(band);
    write_file(dir / "fit_report.json", dump(report), out);
    write_file(dir / "band.csv", band_csv(cfg, cfg.mapping.target_covariates, band), out);
}

void run_select(const RunConfig& cfg, const fs::path& dir, std::size_t threads, std::ostream& out) {
    selection_gate(cfg);
    Signals s = load_signals(cfg, threads);
    SelectionResult sel = run_selection(cfg, s, threads);
    json report = header(cfg, "selection");
    report["estimand"] = to_string(cfg.signal.estimand);
    report["n"] = s.pair.u.size();
    report["result"] = selection_json(sel);
    write_file(dir / "selection.json", dump(report), out);
    std::ostringstream csv;
    csv << comment_line(cfg) << "degree,k,lambda,score,valid\n";
    for (const auto& c : sel.scores)
        csv << c.candidate.basis.max_degree << ',' << c.k << ',' << fmt(c.candidate.lambda) << ','
            << (c.valid ? fmt(c.score) : std::string("NA")) << ',' << (c.valid ? 1 : 0) << '\n';
    write_file(dir / "scores.csv", csv.str(), out);
}

void run_simulate(const RunConfig& cfg, const fs::path& dir, std::size_t threads, std::ostream& out) {
    const SimulationSpec& s = cfg.simulation;
    std::vector<sim::McSummary> rows;
    for (auto n : s.sizes) {
        if (s.sweep) {
            sim::SweepConfig sw;
            sw.dgp = s.dgp;
            sw.n = n;
            sw.replications = s.replications;
            sw.base_seed = cfg.seed;
            if (s.degrees) sw.degrees = *s.degrees;
            if (s.lambdas) sw.lambdas = *s.lambdas;
            sw.estimators = s.estimators;
            sw.threads = threads;
            for (auto& r : sim::run_sensitivity(sw)) rows.push_back(std::move(r));
            continue;
        }
        for (auto est : s.estimators) {
            sim::McConfig mc = est == sim::EstimatorKind::OSR ? sim::osr_defaults() : sim::McConfig{};
            mc.dgp = s.dgp;
            mc.estimator = est;
            mc.n = n;
            mc.replications = s.replications;
            mc.base_seed = cfg.seed;
            mc.cross_validate = s.cross_validate;
            mc.fixed_degree = s.fixed_degree;
            mc.fixed_lambda = s.fixed_lambda;
            if (s.degrees) mc.degrees = *s.degrees;
            if (s.lambdas) mc.lambdas = *s.lambdas;
            mc.cv_folds = s.cv_folds;
            mc.learners = cfg.learners;
            mc.crossfit_folds = cfg.crossfit_folds;
            if (s.inference) mc.inference = *s.inference;
            mc.bootstrap = cfg.inference.bootstrap_draws;
            mc.delta = cfg.inference.delta;
            mc.grid_points = cfg.inference.grid.points;
            mc.trim_eps = s.trim_eps;
            mc.threads = threads;
            rows.push_back(sim::run_monte_carlo(mc));
        }
    }
    write_file(dir / "campaign.csv", comment_line(cfg) + sim::campaign_csv(rows), out);

    std::ostringstream reps;
    reps << comment_line(cfg)
         << "estimator,dgp,N,k_config,lambda_config,replication,seed,failed,estimate,truth,mse,k,lambda,width,"
            "covered,floored,error\n";
    for (const auto& row : rows)
        for (std::size_t i = 0; i < row.runs.size(); ++i) {
            const auto& r = row.runs[i];
            std::string error = r.error;
            for (auto& c : error)
                if (c == ',' || c == '\n') c = ';';
            reps << row.estimator << ',' << row.dgp << ',' << row.n << ',' << row.k_label << ',' << row.lambda_label
                 << ',' << i << ',' << r.seed << ',' << (r.failed ? 1 : 0) << ',' << fmt(r.estimate) << ','
                 << fmt(r.truth) << ',' << fmt(r.mse) << ',' << r.k << ',' << fmt(r.lambda) << ','
                 << (r.has_band ? fmt(r.width) : std::string("NA")) << ','
                 << (r.has_band ? (r.covered ? "1" : "0") : "NA") << ',' << (r.floored ? 1 : 0) << ',' << error
                 << '\n';
        }
    write_file(dir / "replications.csv", reps.str(), out);
}

void run_band(const RunConfig& cfg, const fs::path& dir, std::size_t threads, std::ostream& out) {
    std::ifstream f(cfg.fit_report_path, std::ios::binary);
    if (!f) throw Error(ErrorKind::input, "cli", "cannot open '" + cfg.fit_report_path + "'");
    json stored;
    try {
        stored = json::parse(f);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, "cli", "stored fit '" + cfg.fit_report_path + "' is not valid JSON: " + e.what());
    }
    if (!stored.is_object() || stored.value("artifact", "") != "fit_report")
        throw Error(ErrorKind::input, "cli", "'" + cfg.fit_report_path + "' is not a fit report");
    try {
        const json& b = stored.at("basis");
        SeriesRatioFit fit;
        fit.basis = BasisSpec{b.at("n_vars").get<std::size_t>(), b.at("max_degree").get<std::size_t>(),
                              b.at("interactions").get<bool>()};
        fit.beta = vector_from(stored.at("beta"), "beta");
        fit.n = stored.at("n").get<std::size_t>();
        fit.lambda = stored.at("lambda").get<double>();
        SymMatrix omega(matrix_from(stored.at("omega_hat"), "omega_hat"));
        if (static_cast<std::size_t>(fit.beta.size()) != basis_dim(fit.basis) || omega.dim() != basis_dim(fit.basis))
            throw Error(ErrorKind::input, "cli", "stored fit: beta, basis and omega_hat disagree in size");
        const auto names = stored.at("target_covariates").get<std::vector<std::string>>();
        Eigen::MatrixXd grid = build_grid(cfg.inference.grid, nullptr, fit.basis.n_vars);
        InferenceReport band = confidence_band(fit, omega, grid, cfg.inference.delta, cfg.inference.bootstrap_draws,
                                               SeededRng(cfg.seed).derive(kBootstrapStream), threads);
        json report = header(cfg, "band_report");
        report["source_config_hash"] = stored.value("config_hash", "");
        report["target_covariates"] = names;
        report["inference"] = inference_json(band);
        write_file(dir / "band_report.json", dump(report), out);
        write_file(dir / "band.csv", band_csv(cfg, names, band), out);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::input, "cli", "stored fit is missing fields: " + std::string(e.what()));
    }
}

}  // namespace

const char* to_string(Command c) {
    switch (c) {
        case Command::estimate: return "estimate";
        case Command::select: return "select";
        case Command::simulate: return "simulate";
        case Command::band: return "band";
    }
    return "?";
}

Command command_from_string(const std::string& s) {
    for (auto c : {Command::estimate, Command::select, Command::simulate, Command::band})
        if (s == to_string(c)) return c;
    throw Error(ErrorKind::config, "cli", "unknown command '" + s + "' (expected estimate, select, simulate or band)");
}

std::string config_hash(const json& doc) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : doc.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return hex64(h);
}

RunConfig parse_config(const json& doc, Command command, const std::string& base_dir,
                       std::optional<std::uint64_t> seed_override) {
    expect_object(doc, "");
    check_keys(doc, "",
               {"seed", "output_dir", "threads", "data", "estimand", "learners", "crossfit_folds", "model",
                "selection", "inference", "simulation", "band"});
    RunConfig cfg;
    cfg.command = command;
    json echo = doc;
    echo.erase("output_dir");
    echo.erase("threads");

    cfg.seed = seed_override ? *seed_override : count(require(doc, "", "seed"), "seed");
    echo["seed"] = cfg.seed;
    if (auto v = find(doc, "output_dir")) cfg.output_dir = resolve(base_dir, text(*v, "output_dir"));
    if (auto v = find(doc, "threads")) {
        cfg.threads = static_cast<std::size_t>(count(*v, "threads"));
        if (*cfg.threads < 1) bad("threads", "need at least one thread");
    }
    cfg.learners = parse_learners(find(doc, "learners"));
    if (auto v = find(doc, "crossfit_folds")) cfg.crossfit_folds = static_cast<std::size_t>(count(*v, "crossfit_folds"));
    if (cfg.crossfit_folds < 2) bad("crossfit_folds", "need at least 2 folds");
    cfg.inference = parse_inference(find(doc, "inference"));

    switch (command) {
        case Command::estimate:
        case Command::select: {
            parse_data(doc, base_dir, cfg, echo);
            parse_estimand(doc, cfg);
            if (auto v = find(doc, "selection")) cfg.selection = parse_selection(*v);
            if (auto m = find(doc, "model")) {
                expect_object(*m, "model");
                check_keys(*m, "model", {"degree", "lambda", "interactions"});
                cfg.model_degree = static_cast<std::size_t>(count(require(*m, "model", "degree"), "model.degree"));
                if (auto v = find(*m, "lambda")) cfg.model_lambda = number(*v, "model.lambda");
                if (cfg.model_lambda < 0.0) bad("model.lambda", "must be >= 0");
                if (auto v = find(*m, "interactions")) cfg.model_interactions = boolean(*v, "model.interactions");
            }
            if (command == Command::select && !cfg.selection) bad("selection", "required by the select command");
            if (command == Command::estimate && !cfg.model_degree && !cfg.selection)
                bad("model", "estimate needs model.degree (or a selection block)");
            break;
        }
        case Command::simulate:
            parse_simulation(require(doc, "", "simulation"), cfg);
            break;
        case Command::band: {
            const json& b = require(doc, "", "band");
            expect_object(b, "band");
            check_keys(b, "band", {"fit_report"});
            cfg.fit_report_path = resolve(base_dir, text(require(b, "band", "fit_report"), "band.fit_report"));
            if (!fs::is_regular_file(cfg.fit_report_path))
                bad("band.fit_report", "file not found: " + cfg.fit_report_path);
            echo["band"]["fit_report"] = cfg.fit_report_path;
            break;
        }
    }
    cfg.echo = std::move(echo);
    cfg.hash = config_hash(cfg.echo);
    return cfg;
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config:
        case ErrorKind::selection: return 2;
        case ErrorKind::schema:
        case ErrorKind::parse:
        case ErrorKind::validation:
        case ErrorKind::input:
        case ErrorKind::degenerate: return 3;
        case ErrorKind::singular:
        case ErrorKind::domain: return 4;
    }
    return 1;
}

int run(Command command, const std::string& config_path, const std::optional<std::string>& output_dir,
        std::optional<std::uint64_t> seed_override, std::ostream& out, std::ostream& err) {
    try {
        std::ifstream f(config_path, std::ios::binary);
        if (!f) throw Error(ErrorKind::config, "config", "cannot open '" + config_path + "'");
        json doc;
        try {
            doc = json::parse(f);
        } catch (const json::exception& e) {
            throw Error(ErrorKind::config, "config", "'" + config_path + "' is not valid JSON: " + e.what());
        }
        const std::string base_dir = fs::absolute(fs::path(config_path)).parent_path().string();
        RunConfig cfg = parse_config(doc, command, base_dir, seed_override);
        const fs::path dir = output_dir ? fs::path(*output_dir) : fs::path(cfg.output_dir);
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw Error(ErrorKind::input, "cli", "cannot create output directory '" + dir.string() + "'");
        const std::size_t threads = resolve_threads(cfg);
        switch (command) {
            case Command::estimate: run_estimate(cfg, dir, threads, out); break;
            case Command::select: run_select(cfg, dir, threads, out); break;
            case Command::simulate: run_simulate(cfg, dir, threads, out); break;
            case Command::band: run_band(cfg, dir, threads, out); break;
        }
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace cefr::cli
