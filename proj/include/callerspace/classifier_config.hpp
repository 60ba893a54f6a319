#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace callerspace {

enum class Algorithm { RandomForest, AdaBoost, Svm, LinearSvm };
std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view text);

enum class MaxFeatures { Auto, Sqrt, Log2, All };
enum class SplitCriterion { Gini, Entropy };
enum class BoostAlgorithm { Samme, SammeR };
enum class KernelType { Rbf, Linear, Polynomial };
enum class GammaMode { Scale, Auto };

struct RandomForestParams {
    int n_estimators = 50;
    MaxFeatures max_features = MaxFeatures::Auto;
    SplitCriterion criterion = SplitCriterion::Gini;
    int min_samples_leaf = 1;
    /// Off only for single-tree diagnostics.
    bool bootstrap = true;

    bool operator==(const RandomForestParams&) const = default;
};

struct AdaBoostParams {
    double learning_rate = 1.0;
    BoostAlgorithm algorithm = BoostAlgorithm::Samme;
    int n_estimators = 50;

    bool operator==(const AdaBoostParams&) const = default;
};

struct SvmParams {
    double c = 1.0;
    KernelType kernel = KernelType::Rbf;
    GammaMode gamma = GammaMode::Scale;
    int degree = 3;
    double coef0 = 0.0;
    /// KKT tolerance of the SMO stopping rule.
    double tolerance = 1e-3;

    bool operator==(const SvmParams&) const = default;
};

struct LinearSvmParams {
    double c = 1.0;
    int max_iter = 10000;
    bool balanced = false;
    /// Relative duality gap at which the solver stops.
    double tolerance = 1e-6;

    bool operator==(const LinearSvmParams&) const = default;
};

using ClassifierParams = std::variant<RandomForestParams, AdaBoostParams, SvmParams, LinearSvmParams>;

struct ClassifierConfig {
    ClassifierParams params;
    std::uint64_t seed = 0;

    Algorithm algorithm() const;
    /// Throws InvalidArgument unless every value lies in the hyperparameter
    /// search domain used by the detection study.
    void validate_search_domain() const;
    /// Compact human-readable form, e.g. "svm C=0.01 kernel=rbf gamma=scale".
    std::string describe() const;
    /// Grid tie-break key: regularization strength C or ensemble size.
    double complexity() const;

    bool operator==(const ClassifierConfig&) const = default;
};

nlohmann::json to_json(const ClassifierConfig& config);
ClassifierConfig config_from_json(const nlohmann::json& j);

/// Values admitted per hyperparameter. The default-constructed space for an
/// algorithm is the full study grid; subsets may be configured.
struct SearchSpace {
    Algorithm algorithm = Algorithm::Svm;
    std::vector<int> n_estimators{50, 500, 1000, 2000};
    std::vector<MaxFeatures> max_features{MaxFeatures::Auto, MaxFeatures::Sqrt, MaxFeatures::Log2};
    std::vector<SplitCriterion> criteria{SplitCriterion::Gini, SplitCriterion::Entropy};
    std::vector<int> min_samples_leaf{1, 2, 4};
    std::vector<double> learning_rates{0.1, 0.2, 0.5, 1.0};
    std::vector<BoostAlgorithm> boost_algorithms{BoostAlgorithm::Samme, BoostAlgorithm::SammeR};
    std::vector<double> c_values{1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1e0};
    std::vector<KernelType> kernels{KernelType::Rbf, KernelType::Linear, KernelType::Polynomial};
    std::vector<GammaMode> gammas{GammaMode::Scale, GammaMode::Auto};
    std::vector<bool> class_weight_balanced{true, false};
    int linear_max_iter = 10000;

    static SearchSpace full(Algorithm algorithm);

    /// Cartesian product in lexicographic order of the lists above.
    std::vector<ClassifierConfig> expand(std::uint64_t seed) const;
};

nlohmann::json to_json(const SearchSpace& space);
/// Keys absent from j keep the full-grid values.
SearchSpace search_space_from_json(Algorithm algorithm, const nlohmann::json& j);

} // namespace callerspace
