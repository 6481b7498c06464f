#include "cefr/basis.hpp"

#include <algorithm>
#include <functional>

#include "cefr/error.hpp"

namespace cefr {

namespace {

void compositions(std::size_t q, int degree, std::vector<std::vector<int>>& out) {
    std::vector<int> e(q, 0);
    std::function<void(std::size_t, int)> rec = [&](std::size_t j, int left) {
        if (j + 1 == q) {
            e[j] = left;
            out.push_back(e);
            return;
        }
        for (int a = left; a >= 0; --a) {
            e[j] = a;
            rec(j + 1, left - a);
        }
    };
    rec(0, degree);
}

}  // namespace

std::vector<std::vector<int>> basis_exponents(const BasisSpec& spec) {
    const std::size_t q = spec.n_vars;
    std::vector<std::vector<int>> out;
    out.push_back(std::vector<int>(q, 0));
    if (q == 0) return out;
    for (int d = 1; d <= static_cast<int>(spec.max_degree); ++d) {
        for (std::size_t j = 0; j < q; ++j) {
            std::vector<int> e(q, 0);
            e[j] = d;
            out.push_back(e);
        }
        if (!spec.include_interactions || d < 2) continue;
        // compositions() already yields descending lexicographic order.
        std::vector<std::vector<int>> all;
        compositions(q, d, all);
        for (auto& e : all) {
            bool pure = std::count(e.begin(), e.end(), d) == 1;
            if (!pure) out.push_back(e);
        }
    }
    return out;
}

std::size_t basis_dim(const BasisSpec& spec) {
    const std::size_t q = spec.n_vars, d = spec.max_degree;
    if (q == 0) return 1;
    if (!spec.include_interactions) return 1 + q * d;
    // C(q + d, d)
    std::size_t c = 1;
    for (std::size_t i = 1; i <= d; ++i) c = c * (q + i) / i;
    return c;
}

Eigen::VectorXd eval_basis(const BasisSpec& spec, const Eigen::VectorXd& v) {
    Eigen::MatrixXd row(1, v.size());
    row.row(0) = v.transpose();
    return build_basis(spec, row).values.row(0).transpose();
}

BasisMatrix build_basis(const BasisSpec& spec, const Eigen::MatrixXd& v) {
    if (static_cast<std::size_t>(v.cols()) != spec.n_vars)
        throw Error(ErrorKind::input, "basis",
                    "expected " + std::to_string(spec.n_vars) + " target covariates, got " +
                        std::to_string(v.cols()));
    const auto exps = basis_exponents(spec);
    const Eigen::Index n = v.rows();
    const int dmax = static_cast<int>(spec.max_degree);

    // powers[j](i, a) = v(i, j)^a
    std::vector<Eigen::MatrixXd> powers(spec.n_vars, Eigen::MatrixXd::Ones(n, dmax + 1));
    for (std::size_t j = 0; j < spec.n_vars; ++j)
        for (int a = 1; a <= dmax; ++a) powers[j].col(a) = powers[j].col(a - 1).cwiseProduct(v.col(j));

    BasisMatrix out;
    out.spec = spec;
    out.values.resize(n, static_cast<Eigen::Index>(exps.size()));
    for (std::size_t c = 0; c < exps.size(); ++c) {
        Eigen::VectorXd col = Eigen::VectorXd::Ones(n);
        for (std::size_t j = 0; j < spec.n_vars; ++j)
            if (exps[c][j] > 0) col = col.cwiseProduct(powers[j].col(exps[c][j]));
        out.values.col(static_cast<Eigen::Index>(c)) = col;
    }
    return out;
}

}  // namespace cefr
