#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace cefr {

struct BasisSpec {
    std::size_t n_vars = 1;
    std::size_t max_degree = 1;
    bool include_interactions = true;

    bool operator==(const BasisSpec&) const = default;
};

// Exponent vectors in evaluation order: by total degree, and within a degree
// the pure powers x_j^d first, then mixed terms in descending lexicographic
// order of their exponents.
std::vector<std::vector<int>> basis_exponents(const BasisSpec& spec);

std::size_t basis_dim(const BasisSpec& spec);

Eigen::VectorXd eval_basis(const BasisSpec& spec, const Eigen::VectorXd& v);

struct BasisMatrix {
    Eigen::MatrixXd values;  // N×k
    BasisSpec spec;
};

// Rows of `v` are observations (N×q_V).
BasisMatrix build_basis(const BasisSpec& spec, const Eigen::MatrixXd& v);

}  // namespace cefr
