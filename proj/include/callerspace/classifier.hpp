#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "callerspace/classifier_config.hpp"
#include "callerspace/dataset.hpp"

namespace callerspace {

enum class ScoreConvention { DecisionOvo, DecisionOvr, ProbabilityOvr };
std::string_view to_string(ScoreConvention convention);

// ---------------------------------------------------------------------------
// Linear SVM: one-vs-rest, L2-regularized squared hinge loss, bias folded in
// as a constant feature. Solved in the primal by truncated Newton.

struct LinearBinaryResult {
    std::vector<double> weights;
    double bias = 0.0;
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Minimizes 0.5*(|w|^2 + b^2) + sum_i c_i * max(0, 1 - y_i (w.x_i + b))^2
/// for y_i in {-1, +1}.
LinearBinaryResult solve_linear_svm_binary(const Matrix& x, std::span<const int> y, std::span<const double> c,
                                           int max_iter, double tolerance);

/// Primal objective of (w, b) on a binary problem; used by tests and reports.
double linear_svm_primal_objective(const Matrix& x, std::span<const int> y, std::span<const double> c,
                                   std::span<const double> weights, double bias);

struct LinearSvmModel {
    /// One row per class (OvR).
    Matrix weights;
    std::vector<double> biases;
    bool converged = true;

    bool operator==(const LinearSvmModel&) const = default;
};

// ---------------------------------------------------------------------------
// Kernel SVM: one-vs-one hinge-loss machines trained with SMO.

struct KernelSpec {
    KernelType type = KernelType::Rbf;
    double gamma = 1.0;
    int degree = 3;
    double coef0 = 0.0;

    double operator()(std::span<const double> a, std::span<const double> b) const;
    bool operator==(const KernelSpec&) const = default;
};

struct SmoResult {
    /// Dual variables, 0 <= alpha_i <= C.
    std::vector<double> alpha;
    /// Decision function f(x) = sum_i alpha_i y_i K(x_i, x) - rho.
    double rho = 0.0;
    double objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Solves min 0.5 a'Qa - e'a s.t. 0 <= a <= C, y'a = 0 with Q_ij =
/// y_i y_j K_ij, choosing the maximal-violating pair each step.
SmoResult solve_smo(const Matrix& kernel, std::span<const int> y, double c, double tolerance,
                    long max_iterations = 10'000'000);

/// Dual objective 0.5 a'Qa - e'a.
double svm_dual_objective(const Matrix& kernel, std::span<const int> y, std::span<const double> alpha);

struct PairMachine {
    /// Indices into the class list; positive decision favours `first`.
    int first = 0;
    int second = 1;
    /// Indices into KernelSvmModel::support and matching alpha_i * y_i.
    std::vector<std::uint32_t> support_index;
    std::vector<double> coefficients;
    double rho = 0.0;
    bool converged = true;

    bool operator==(const PairMachine&) const = default;
};

struct KernelSvmModel {
    KernelSpec kernel;
    Matrix support;
    std::vector<PairMachine> machines;

    bool operator==(const KernelSvmModel&) const = default;
};

/// gamma='scale' -> 1 / (n_features * var(X)), gamma='auto' -> 1 / n_features.
double resolve_gamma(GammaMode mode, const Matrix& features);

// ---------------------------------------------------------------------------
// Random forest of CART trees.

struct TreeNode {
    /// -1 marks a leaf.
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    /// Leaf only: offset into DecisionTree::leaf_distributions.
    int leaf = -1;

    bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;
    /// num_leaves x num_classes class frequencies.
    std::vector<double> leaf_distributions;

    std::span<const double> predict(std::span<const double> x, std::size_t num_classes) const;
    bool operator==(const DecisionTree&) const = default;
};

/// Gini impurity or entropy (bits) of a class-count vector.
double impurity(std::span<const double> class_counts, SplitCriterion criterion);

/// floor(sqrt|log2(n_features)), at least 1; All -> n_features.
std::size_t resolve_max_features(MaxFeatures mode, std::size_t n_features);

struct RandomForestModel {
    std::vector<DecisionTree> trees;
    /// Fraction of samples with an out-of-bag prediction that it got right.
    double oob_accuracy = 0.0;

    bool operator==(const RandomForestModel&) const = default;
};

// ---------------------------------------------------------------------------
// AdaBoost over depth-1 stumps.

struct Stump {
    int feature = 0;
    double threshold = 0.0;
    /// SAMME: predicted class index per side. SAMME.R: per-side class
    /// probability vectors (num_classes each, left then right).
    int left_class = 0;
    int right_class = 0;
    std::vector<double> probabilities;
    double weight = 1.0;
    double error = 0.0;

    bool operator==(const Stump&) const = default;
};

struct AdaBoostModel {
    BoostAlgorithm algorithm = BoostAlgorithm::Samme;
    std::vector<Stump> stumps;
    /// Training error of the ensemble after each round.
    std::vector<double> training_error;

    bool operator==(const AdaBoostModel&) const = default;
};

// ---------------------------------------------------------------------------

using ModelParameters = std::variant<RandomForestModel, AdaBoostModel, KernelSvmModel, LinearSvmModel>;

struct TrainedModel {
    ClassifierConfig config;
    std::vector<int> classes;
    /// Fitted on the training rows; empty for tree methods.
    Standardizer standardizer;
    ScoreConvention convention = ScoreConvention::DecisionOvr;
    std::size_t num_features = 0;
    ModelParameters parameters;

    Algorithm algorithm() const { return config.algorithm(); }
    bool operator==(const TrainedModel&) const = default;
};

struct ScoreMatrix {
    ScoreConvention convention = ScoreConvention::DecisionOvr;
    std::vector<int> classes;
    /// OvO only: class index pairs, one per score column.
    std::vector<std::pair<int, int>> class_pairs;
    Matrix values;
    std::vector<int> predicted;
};

TrainedModel train_linear_svm(const LabeledDataset& data, const ClassifierConfig& config);
TrainedModel train_svm(const LabeledDataset& data, const ClassifierConfig& config);
TrainedModel train_random_forest(const LabeledDataset& data, const ClassifierConfig& config);
TrainedModel train_adaboost(const LabeledDataset& data, const ClassifierConfig& config);

/// Dispatches on the config. SVM and linear SVM standardize features with
/// statistics of `data` and keep the transform inside the model.
TrainedModel train_classifier(const LabeledDataset& data, const ClassifierConfig& config);

ScoreMatrix predict_scores(const TrainedModel& model, const Matrix& features);

/// Majority vote over OvO decisions; ties go to the lowest class index.
int ovo_vote(std::span<const double> pair_scores, std::span<const std::pair<int, int>> pairs, std::size_t num_classes);

void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

} // namespace callerspace
