#include "cefr/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cefr/error.hpp"

namespace cefr {

namespace {

Error input_error(const std::string& what) { return Error(ErrorKind::input, "nuisance", what); }

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// Sorting the training rows first makes every learner an exact function of
// the row multiset.
std::vector<std::size_t> canonical_order(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(x.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            double xa = x(a, j), xb = x(b, j);
            if (xa != xb) return xa < xb;
        }
        return y(a) < y(b);
    });
    return idx;
}

std::vector<std::size_t> class_labels(const Eigen::VectorXd& y, std::size_t& n_classes) {
    std::vector<std::size_t> labels(static_cast<std::size_t>(y.size()));
    std::size_t max_label = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double v = y(i);
        if (!(v >= 0.0) || v != std::floor(v))
            throw input_error("classification target " + std::to_string(v) + " is not a class label");
        labels[i] = static_cast<std::size_t>(v);
        max_label = std::max(max_label, labels[i]);
    }
    if (n_classes == 0) n_classes = std::max<std::size_t>(2, max_label + 1);
    if (max_label >= n_classes)
        throw input_error("class label " + std::to_string(max_label) + " outside [0, " +
                          std::to_string(n_classes) + ")");
    return labels;
}

FittedModel constant_regression(const LearnerSpec& spec, std::size_t q, double value) {
    FittedModel m;
    m.kind = spec.kind;
    m.link = Link::identity;
    m.feature_dim = q;
    m.degenerate = true;
    m.bias = Eigen::VectorXd::Constant(1, value);
    m.coef = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(q));
    return m;
}

FittedModel fit_ridge(const LearnerSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    const Eigen::Index q = x.cols();
    Eigen::RowVectorXd xbar = x.colwise().mean();
    double ybar = y.mean();
    Eigen::MatrixXd xc = x.rowwise() - xbar;
    Eigen::VectorXd yc = y.array() - ybar;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(q);
    if (q > 0) {
        Eigen::MatrixXd gram = xc.transpose() * xc;
        Eigen::VectorXd rhs = xc.transpose() * yc;
        if (spec.lambda > 0.0) {
            b = solve_sym(SymMatrix(gram).plus_ridge(spec.lambda), rhs);
        } else {
            // Minimum-norm least squares tolerates collinear or constant features.
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(xc);
            b = cod.solve(yc);
        }
    }
    FittedModel m;
    m.kind = spec.kind;
    m.link = Link::identity;
    m.feature_dim = static_cast<std::size_t>(q);
    m.bias = Eigen::VectorXd::Constant(1, ybar - xbar.dot(b));
    m.coef = b.transpose();
    return m;
}

// Penalized binary logistic regression by damped Newton; intercept unpenalized.
Eigen::VectorXd fit_logistic_binary(const LearnerSpec& spec, const Eigen::MatrixXd& x,
                                    const Eigen::VectorXd& y) {
    const Eigen::Index n = x.rows(), q = x.cols();
    Eigen::MatrixXd design(n, q + 1);
    design.col(0).setOnes();
    design.rightCols(q) = x;
    Eigen::VectorXd pen = Eigen::VectorXd::Constant(q + 1, spec.lambda);
    pen(0) = 0.0;

    auto objective = [&](const Eigen::VectorXd& w) {
        Eigen::VectorXd eta = design * w;
        double f = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) f += softplus(eta(i)) - y(i) * eta(i);
        return f + 0.5 * (pen.array() * w.array().square()).sum();
    };

    Eigen::VectorXd w = Eigen::VectorXd::Zero(q + 1);
    double ybar = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
    w(0) = std::log(ybar / (1.0 - ybar));
    double f = objective(w);
    for (int it = 0; it < spec.max_iter; ++it) {
        Eigen::VectorXd eta = design * w;
        Eigen::VectorXd p(n), wt(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i) = logistic(eta(i));
            wt(i) = p(i) * (1.0 - p(i));
        }
        Eigen::VectorXd grad = design.transpose() * (p - y) + pen.cwiseProduct(w);
        if (grad.norm() <= spec.tol) break;
        Eigen::MatrixXd hess = design.transpose() * wt.asDiagonal() * design;
        hess.diagonal() += pen;
        hess.diagonal().array() += 1e-12;
        Eigen::VectorXd step = Eigen::LDLT<Eigen::MatrixXd>(hess).solve(grad);
        if (!step.allFinite()) break;
        double t = 1.0;
        bool moved = false;
        for (int k = 0; k < 50; ++k) {
            Eigen::VectorXd cand = w - t * step;
            double fc = objective(cand);
            if (fc <= f - 1e-4 * t * grad.dot(step)) {
                w = cand;
                f = fc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved) break;
    }
    return w;
}

FittedModel fit_logistic(const LearnerSpec& spec, const Eigen::MatrixXd& x,
                         const std::vector<std::size_t>& labels, std::size_t n_classes) {
    const Eigen::Index q = x.cols();
    FittedModel m;
    m.kind = spec.kind;
    m.feature_dim = static_cast<std::size_t>(q);
    m.n_classes = n_classes;
    const std::size_t outputs = n_classes == 2 ? 1 : n_classes;
    m.link = n_classes == 2 ? Link::sigmoid : Link::ovr_sigmoid;
    m.bias.resize(static_cast<Eigen::Index>(outputs));
    m.coef.resize(static_cast<Eigen::Index>(outputs), q);
    for (std::size_t k = 0; k < outputs; ++k) {
        const std::size_t target = n_classes == 2 ? 1 : k;
        Eigen::VectorXd yk(x.rows());
        for (Eigen::Index i = 0; i < x.rows(); ++i) yk(i) = labels[i] == target ? 1.0 : 0.0;
        Eigen::VectorXd w;
        if (yk.sum() == 0.0) {
            // Absent class in one-vs-rest: its column is effectively zero.
            w = Eigen::VectorXd::Zero(q + 1);
            w(0) = -30.0;
        } else {
            w = fit_logistic_binary(spec, x, yk);
        }
        m.bias(k) = w(0);
        m.coef.row(k) = w.tail(q).transpose();
    }
    return m;
}

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, int max_depth, int min_leaf)
        : x_(x), max_depth_(max_depth), min_leaf_(static_cast<std::size_t>(min_leaf)) {
        const std::size_t n = static_cast<std::size_t>(x.rows());
        sorted_.resize(static_cast<std::size_t>(x.cols()));
        for (std::size_t f = 0; f < sorted_.size(); ++f) {
            auto& s = sorted_[f];
            s.resize(n);
            std::iota(s.begin(), s.end(), 0);
            std::stable_sort(s.begin(), s.end(), [&](std::size_t a, std::size_t b) {
                return x(a, f) < x(b, f);
            });
        }
    }

    // Fits one Newton tree to (g, h) on rows with in_sample set. Leaf values
    // are −G/H scaled by `scale` and clamped to ±max_step.
    Tree build(const std::vector<double>& g, const std::vector<double>& h, const std::vector<char>& in_sample,
               double scale, double max_step) const {
        const std::size_t n = g.size();
        struct Stat {
            double g = 0, h = 0;
            std::size_t n = 0;
        };
        Tree tree;
        tree.nodes.emplace_back();
        std::vector<Stat> stats(1);
        std::vector<int> node_of(n, -1);
        for (std::size_t i = 0; i < n; ++i) {
            if (!in_sample[i]) continue;
            node_of[i] = 0;
            stats[0].g += g[i];
            stats[0].h += h[i];
            stats[0].n += 1;
        }
        constexpr double eps = 1e-12;
        std::vector<int> frontier{0};
        for (int depth = 0; depth < max_depth_ && !frontier.empty(); ++depth) {
            const std::size_t nn = tree.nodes.size();
            std::vector<char> open(nn, 0);
            for (int nd : frontier) open[nd] = stats[nd].n >= 2 * min_leaf_;
            std::vector<double> best_gain(nn, 0.0), best_thr(nn, 0.0), gl(nn), hl(nn), last(nn);
            std::vector<int> best_f(nn, -1);
            std::vector<std::size_t> nl(nn);
            for (std::size_t f = 0; f < sorted_.size(); ++f) {
                for (int nd : frontier) gl[nd] = hl[nd] = 0.0, nl[nd] = 0;
                for (std::size_t i : sorted_[f]) {
                    const int nd = node_of[i];
                    if (nd < 0 || !open[nd]) continue;
                    const double xv = x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f));
                    const Stat& s = stats[nd];
                    if (nl[nd] >= min_leaf_ && xv > last[nd] && s.n - nl[nd] >= min_leaf_) {
                        const double gr = s.g - gl[nd], hr = s.h - hl[nd];
                        const double gain = gl[nd] * gl[nd] / (hl[nd] + eps) + gr * gr / (hr + eps) -
                                            s.g * s.g / (s.h + eps);
                        if (gain > best_gain[nd]) {
                            best_gain[nd] = gain;
                            best_f[nd] = static_cast<int>(f);
                            best_thr[nd] = 0.5 * (last[nd] + xv);
                        }
                    }
                    gl[nd] += g[i];
                    hl[nd] += h[i];
                    nl[nd] += 1;
                    last[nd] = xv;
                }
            }
            std::vector<int> next;
            for (int nd : frontier) {
                if (best_f[nd] < 0) continue;
                const int l = static_cast<int>(tree.nodes.size());
                tree.nodes.emplace_back();
                tree.nodes.emplace_back();
                stats.emplace_back();
                stats.emplace_back();
                tree.nodes[nd].feature = best_f[nd];
                tree.nodes[nd].threshold = best_thr[nd];
                tree.nodes[nd].left = l;
                tree.nodes[nd].right = l + 1;
                next.push_back(l);
                next.push_back(l + 1);
            }
            if (next.empty()) break;
            for (std::size_t i = 0; i < n; ++i) {
                const int nd = node_of[i];
                if (nd < 0 || tree.nodes[nd].feature < 0) continue;
                const TreeNode& node = tree.nodes[nd];
                const int child =
                    x_(static_cast<Eigen::Index>(i), node.feature) <= node.threshold ? node.left : node.right;
                node_of[i] = child;
                stats[child].g += g[i];
                stats[child].h += h[i];
                stats[child].n += 1;
            }
            frontier = std::move(next);
        }
        for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
            if (tree.nodes[k].feature >= 0) continue;
            double v = stats[k].n > 0 ? -stats[k].g / (stats[k].h + eps) : 0.0;
            tree.nodes[k].value = scale * std::clamp(v, -max_step, max_step);
        }
        return tree;
    }

private:
    const Eigen::MatrixXd& x_;
    int max_depth_;
    std::size_t min_leaf_;
    std::vector<std::vector<std::size_t>> sorted_;
};

std::vector<char> draw_subsample(std::size_t n, double frac, SeededRng& rng) {
    std::vector<char> mask(n, 1);
    if (frac >= 1.0) return mask;
    std::size_t keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(frac * static_cast<double>(n))));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < keep; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
    std::fill(mask.begin(), mask.end(), 0);
    for (std::size_t i = 0; i < keep; ++i) mask[idx[i]] = 1;
    return mask;
}

std::vector<double> tree_outputs(const Tree& tree, const Eigen::MatrixXd& x) {
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = tree.eval(x.data() + i, x.rows());
    return out;
}

void scale_tree(Tree& tree, double s) {
    for (auto& node : tree.nodes) node.value *= s;
}

// Loss of raw scores f (n×K, K=1 unless softmax).
using LossFn = double (*)(const Eigen::MatrixXd& f, const std::vector<std::size_t>& labels,
                          const Eigen::VectorXd& y);

double squared_loss(const Eigen::MatrixXd& f, const std::vector<std::size_t>&, const Eigen::VectorXd& y) {
    return 0.5 * (f.col(0) - y).squaredNorm() / static_cast<double>(y.size());
}

double binary_log_loss(const Eigen::MatrixXd& f, const std::vector<std::size_t>&, const Eigen::VectorXd& y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) s += softplus(f(i, 0)) - y(i) * f(i, 0);
    return s / static_cast<double>(y.size());
}

double softmax_loss(const Eigen::MatrixXd& f, const std::vector<std::size_t>& labels, const Eigen::VectorXd&) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        double mx = f.row(i).maxCoeff();
        double z = (f.row(i).array() - mx).exp().sum();
        s += mx + std::log(z) - f(i, static_cast<Eigen::Index>(labels[i]));
    }
    return s / static_cast<double>(f.rows());
}

FittedModel fit_gbt(const LearnerSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const std::vector<std::size_t>& labels, std::size_t n_classes, SeededRng& rng) {
    const std::size_t n = static_cast<std::size_t>(x.rows());
    const bool classify = spec.kind == LearnerKind::gbt_classification;
    const std::size_t k_out = classify && n_classes > 2 ? n_classes : 1;

    FittedModel m;
    m.kind = spec.kind;
    m.feature_dim = static_cast<std::size_t>(x.cols());
    m.n_classes = classify ? n_classes : 0;
    m.link = !classify ? Link::identity : (n_classes == 2 ? Link::sigmoid : Link::softmax);
    m.bias.resize(static_cast<Eigen::Index>(k_out));
    m.coef = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k_out), x.cols());

    LossFn loss = squared_loss;
    if (!classify) {
        m.bias(0) = y.mean();
    } else if (n_classes == 2) {
        double p = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
        m.bias(0) = std::log(p / (1.0 - p));
        loss = binary_log_loss;
    } else {
        std::vector<double> counts(n_classes, 0.0);
        for (auto l : labels) counts[l] += 1.0;
        for (std::size_t k = 0; k < n_classes; ++k)
            m.bias(k) = std::log(std::max(counts[k] / static_cast<double>(n), 1e-6));
        loss = softmax_loss;
    }

    Eigen::MatrixXd f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k_out));
    for (std::size_t k = 0; k < k_out; ++k) f.col(k).setConstant(m.bias(k));
    double current = loss(f, labels, y);
    m.stage_loss.push_back(current);

    TreeBuilder builder(x, spec.max_depth, spec.min_leaf);
    const double max_step = classify ? 10.0 : std::numeric_limits<double>::infinity();
    std::vector<double> g(n), h(n);
    for (int stage = 0; stage < spec.n_trees; ++stage) {
        std::vector<char> mask = draw_subsample(n, spec.subsample, rng);
        std::vector<Tree> round;
        Eigen::MatrixXd prob;
        if (m.link == Link::softmax) {
            prob = f;
            for (Eigen::Index i = 0; i < prob.rows(); ++i) {
                double mx = prob.row(i).maxCoeff();
                prob.row(i) = (prob.row(i).array() - mx).exp();
                prob.row(i) /= prob.row(i).sum();
            }
        }
        for (std::size_t k = 0; k < k_out; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                if (!classify) {
                    g[i] = f(i, 0) - y(i);
                    h[i] = 1.0;
                } else if (k_out == 1) {
                    double p = logistic(f(i, 0));
                    g[i] = p - y(i);
                    h[i] = p * (1.0 - p);
                } else {
                    double p = prob(i, k);
                    g[i] = p - (labels[i] == k ? 1.0 : 0.0);
                    h[i] = p * (1.0 - p);
                }
            }
            Tree t = builder.build(g, h, mask, spec.learning_rate, max_step);
            t.output = k;
            round.push_back(std::move(t));
        }
        std::vector<std::vector<double>> deltas;
        for (const auto& t : round) deltas.push_back(tree_outputs(t, x));
        // Backtrack so the training loss never increases across a stage.
        double step = 1.0;
        Eigen::MatrixXd cand = f;
        double cand_loss = current;
        bool accepted = false;
        for (int tries = 0; tries < 30; ++tries) {
            for (std::size_t k = 0; k < k_out; ++k)
                for (std::size_t i = 0; i < n; ++i) cand(i, k) = f(i, k) + step * deltas[k][i];
            cand_loss = loss(cand, labels, y);
            if (cand_loss <= current) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (accepted) {
            if (step != 1.0)
                for (auto& t : round) scale_tree(t, step);
            f = cand;
            current = cand_loss;
            for (auto& t : round) m.trees.push_back(std::move(t));
        }
        m.stage_loss.push_back(current);
    }
    return m;
}

Eigen::MatrixXd raw_scores(const FittedModel& model, const Eigen::MatrixXd& x) {
    const Eigen::Index k = static_cast<Eigen::Index>(model.n_outputs());
    Eigen::MatrixXd s = x * model.coef.transpose();
    s.rowwise() += model.bias.transpose();
    for (const auto& t : model.trees) {
        const Eigen::Index o = static_cast<Eigen::Index>(t.output);
        for (Eigen::Index i = 0; i < x.rows(); ++i) s(i, o) += t.eval(x.data() + i, x.rows());
    }
    (void)k;
    return s;
}

}  // namespace

const char* to_string(LearnerKind kind) {
    switch (kind) {
        case LearnerKind::ridge_regression: return "ridge_regression";
        case LearnerKind::ridge_logistic: return "ridge_logistic";
        case LearnerKind::gbt_regression: return "gbt_regression";
        case LearnerKind::gbt_classification: return "gbt_classification";
    }
    return "?";
}

LearnerKind learner_kind_from_string(const std::string& s) {
    for (auto k : {LearnerKind::ridge_regression, LearnerKind::ridge_logistic, LearnerKind::gbt_regression,
                   LearnerKind::gbt_classification})
        if (s == to_string(k)) return k;
    throw Error(ErrorKind::config, "nuisance", "unknown learner kind '" + s + "'");
}

void LearnerSpec::validate() const {
    auto bad = [](const std::string& what) { return Error(ErrorKind::config, "nuisance", what); };
    if (!(lambda >= 0.0)) throw bad("lambda must be >= 0");
    if (max_iter < 1) throw bad("max_iter must be >= 1");
    if (!(tol > 0.0)) throw bad("tol must be > 0");
    if (n_trees < 1) throw bad("n_trees must be >= 1");
    if (max_depth < 1) throw bad("max_depth must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw bad("learning_rate must be in (0, 1]");
    if (min_leaf < 1) throw bad("min_leaf must be >= 1");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw bad("subsample must be in (0, 1]");
}

double Tree::eval(const double* row, Eigen::Index stride) const {
    int k = 0;
    while (nodes[k].feature >= 0) k = row[nodes[k].feature * stride] <= nodes[k].threshold ? nodes[k].left : nodes[k].right;
    return nodes[k].value;
}

FittedModel fit(const LearnerSpec& spec, const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                SeededRng& rng, std::size_t n_classes) {
    spec.validate();
    if (features.rows() != targets.size()) throw input_error("features and targets differ in length");
    if (features.rows() < 2) throw input_error("need at least 2 training rows, got " + std::to_string(features.rows()));
    if (!features.allFinite() || !targets.allFinite()) throw input_error("non-finite training data");

    const auto order = canonical_order(features, targets);
    Eigen::MatrixXd x(features.rows(), features.cols());
    Eigen::VectorXd y(targets.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(order[i]));
        y(static_cast<Eigen::Index>(i)) = targets(static_cast<Eigen::Index>(order[i]));
    }
    const std::size_t q = static_cast<std::size_t>(x.cols());

    if (!spec.is_classifier()) {
        if (y.maxCoeff() == y.minCoeff()) return constant_regression(spec, q, y(0));
        if (spec.kind == LearnerKind::ridge_regression) return fit_ridge(spec, x, y);
        return fit_gbt(spec, x, y, {}, 0, rng);
    }

    std::vector<std::size_t> labels = class_labels(y, n_classes);
    if (std::all_of(labels.begin(), labels.end(), [&](std::size_t l) { return l == labels[0]; })) {
        FittedModel m;
        m.kind = spec.kind;
        m.link = Link::constant_proba;
        m.feature_dim = q;
        m.n_classes = n_classes;
        m.degenerate = true;
        m.bias = Eigen::VectorXd::Zero(1);
        m.coef = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(q));
        m.constant_proba = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_classes));
        m.constant_proba(static_cast<Eigen::Index>(labels[0])) = 1.0;
        return m;
    }
    if (spec.kind == LearnerKind::ridge_logistic) return fit_logistic(spec, x, labels, n_classes);
    return fit_gbt(spec, x, y, labels, n_classes, rng);
}

Eigen::MatrixXd predict_proba(const FittedModel& model, const Eigen::MatrixXd& features) {
    if (model.n_classes == 0) throw input_error("predict_proba on a regression model");
    if (static_cast<std::size_t>(features.cols()) != model.feature_dim)
        throw input_error("expected " + std::to_string(model.feature_dim) + " features, got " +
                          std::to_string(features.cols()));
    const Eigen::Index m = features.rows(), c = static_cast<Eigen::Index>(model.n_classes);
    Eigen::MatrixXd p(m, c);
    if (model.link == Link::constant_proba) {
        p.rowwise() = model.constant_proba.transpose();
        return p;
    }
    Eigen::MatrixXd s = raw_scores(model, features);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (model.link == Link::sigmoid) {
            double p1 = logistic(s(i, 0));
            p(i, 0) = 1.0 - p1;
            p(i, 1) = p1;
        } else if (model.link == Link::softmax) {
            double mx = s.row(i).maxCoeff();
            p.row(i) = (s.row(i).array() - mx).exp();
            p.row(i) /= p.row(i).sum();
        } else {
            for (Eigen::Index k = 0; k < c; ++k) p(i, k) = logistic(s(i, k));
            double tot = p.row(i).sum();
            if (tot > 0.0)
                p.row(i) /= tot;
            else
                p.row(i).setConstant(1.0 / static_cast<double>(c));
        }
    }
    return p;
}

Eigen::VectorXd predict(const FittedModel& model, const Eigen::MatrixXd& features) {
    if (static_cast<std::size_t>(features.cols()) != model.feature_dim)
        throw input_error("expected " + std::to_string(model.feature_dim) + " features, got " +
                          std::to_string(features.cols()));
    if (model.n_classes == 0) return raw_scores(model, features).col(0);
    if (model.n_classes != 2) throw input_error("predict on a multi-class model; use predict_proba");
    return predict_proba(model, features).col(1);
}

double clip_probability(double p, double eps) { return std::min(std::max(p, eps), 1.0 - eps); }

std::vector<double> clip_probability(const std::vector<double>& p, double eps) {
    if (!(eps > 0.0 && eps < 0.5)) throw Error(ErrorKind::domain, "nuisance", "trimming eps must be in (0, 0.5)");
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = clip_probability(p[i], eps);
    return out;
}

}  // namespace cefr
