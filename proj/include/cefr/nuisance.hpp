#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cefr/numerics.hpp"

namespace cefr {

enum class LearnerKind { ridge_regression, ridge_logistic, gbt_regression, gbt_classification };

const char* to_string(LearnerKind kind);
LearnerKind learner_kind_from_string(const std::string& s);

struct LearnerSpec {
    LearnerKind kind = LearnerKind::gbt_regression;
    // ridge / logistic
    double lambda = 0.0;
    int max_iter = 100;
    double tol = 1e-8;
    // gbt
    int n_trees = 100;
    int max_depth = 3;
    double learning_rate = 0.1;
    int min_leaf = 5;
    double subsample = 1.0;

    bool is_classifier() const {
        return kind == LearnerKind::ridge_logistic || kind == LearnerKind::gbt_classification;
    }
    void validate() const;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct Tree {
    std::size_t output = 0;
    std::vector<TreeNode> nodes;

    double eval(const double* row, Eigen::Index stride) const;
};

enum class Link { identity, sigmoid, ovr_sigmoid, softmax, constant_proba };

struct FittedModel {
    LearnerKind kind = LearnerKind::ridge_regression;
    Link link = Link::identity;
    std::size_t feature_dim = 0;
    std::size_t n_classes = 0;  // 0 for regression
    bool degenerate = false;    // targets were constant; model predicts a constant

    // Raw score for output k: bias[k] + coef.row(k)·x + sum of trees with output k.
    Eigen::VectorXd bias;
    Eigen::MatrixXd coef;
    std::vector<Tree> trees;
    Eigen::VectorXd constant_proba;  // used when link == constant_proba

    // Per-stage training loss, recorded by gbt fits.
    std::vector<double> stage_loss;

    std::size_t n_outputs() const { return static_cast<std::size_t>(bias.size()); }
};

// n_classes = 0 infers the class count from the labels (at least 2).
FittedModel fit(const LearnerSpec& spec, const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                SeededRng& rng, std::size_t n_classes = 0);

// Regression values, or P(class 1) for binary classifiers.
Eigen::VectorXd predict(const FittedModel& model, const Eigen::MatrixXd& features);

// m×C class probabilities; rows sum to 1.
Eigen::MatrixXd predict_proba(const FittedModel& model, const Eigen::MatrixXd& features);

std::vector<double> clip_probability(const std::vector<double>& p, double eps);
double clip_probability(double p, double eps);

}  // namespace cefr
