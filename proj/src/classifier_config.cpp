#include "callerspace/classifier_config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "callerspace/error.hpp"

namespace callerspace {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string_view max_features_name(MaxFeatures m)
{
    switch (m) {
    case MaxFeatures::Auto: return "auto";
    case MaxFeatures::Sqrt: return "sqrt";
    case MaxFeatures::Log2: return "log2";
    case MaxFeatures::All: return "all";
    }
    return "?";
}

MaxFeatures parse_max_features(std::string_view s)
{
    for (auto m : {MaxFeatures::Auto, MaxFeatures::Sqrt, MaxFeatures::Log2, MaxFeatures::All}) {
        if (s == max_features_name(m)) return m;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown max_features '" + std::string(s) + "'");
}

std::string_view criterion_name(SplitCriterion c) { return c == SplitCriterion::Gini ? "gini" : "entropy"; }

SplitCriterion parse_criterion(std::string_view s)
{
    if (s == "gini") return SplitCriterion::Gini;
    if (s == "entropy") return SplitCriterion::Entropy;
    throw Error(ErrorCode::InvalidArgument, "unknown criterion '" + std::string(s) + "'");
}

std::string_view boost_name(BoostAlgorithm b) { return b == BoostAlgorithm::Samme ? "SAMME" : "SAMME.R"; }

BoostAlgorithm parse_boost(std::string_view s)
{
    if (s == "SAMME") return BoostAlgorithm::Samme;
    if (s == "SAMME.R") return BoostAlgorithm::SammeR;
    throw Error(ErrorCode::InvalidArgument, "unknown boosting algorithm '" + std::string(s) + "'");
}

std::string_view kernel_name(KernelType k)
{
    switch (k) {
    case KernelType::Rbf: return "rbf";
    case KernelType::Linear: return "linear";
    case KernelType::Polynomial: return "poly";
    }
    return "?";
}

KernelType parse_kernel(std::string_view s)
{
    if (s == "rbf") return KernelType::Rbf;
    if (s == "linear") return KernelType::Linear;
    if (s == "poly" || s == "polynomial") return KernelType::Polynomial;
    throw Error(ErrorCode::InvalidArgument, "unknown kernel '" + std::string(s) + "'");
}

std::string_view gamma_name(GammaMode g) { return g == GammaMode::Scale ? "scale" : "auto"; }

GammaMode parse_gamma(std::string_view s)
{
    if (s == "scale") return GammaMode::Scale;
    if (s == "auto") return GammaMode::Auto;
    throw Error(ErrorCode::InvalidArgument, "unknown gamma '" + std::string(s) + "'");
}

bool in_c_grid(double c)
{
    for (int e = -5; e <= 0; ++e) {
        if (std::abs(c - std::pow(10.0, e)) <= 1e-12 * std::pow(10.0, e)) return true;
    }
    return false;
}

template <class T>
bool contains(std::initializer_list<T> values, T v)
{
    return std::find(values.begin(), values.end(), v) != values.end();
}

} // namespace

std::string_view to_string(Algorithm algorithm)
{
    switch (algorithm) {
    case Algorithm::RandomForest: return "rf";
    case Algorithm::AdaBoost: return "ab";
    case Algorithm::Svm: return "svm";
    case Algorithm::LinearSvm: return "lsvm";
    }
    return "?";
}

Algorithm parse_algorithm(std::string_view text)
{
    for (auto a : {Algorithm::RandomForest, Algorithm::AdaBoost, Algorithm::Svm, Algorithm::LinearSvm}) {
        if (text == to_string(a)) return a;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown algorithm '" + std::string(text) + "'");
}

Algorithm ClassifierConfig::algorithm() const
{
    return std::visit(Overloaded{
                          [](const RandomForestParams&) { return Algorithm::RandomForest; },
                          [](const AdaBoostParams&) { return Algorithm::AdaBoost; },
                          [](const SvmParams&) { return Algorithm::Svm; },
                          [](const LinearSvmParams&) { return Algorithm::LinearSvm; },
                      },
                      params);
}

void ClassifierConfig::validate_search_domain() const
{
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what + " outside search domain"); };
    std::visit(Overloaded{
                   [&](const RandomForestParams& p) {
                       if (!contains({50, 500, 1000, 2000}, p.n_estimators)) fail("n_estimators");
                       if (p.max_features == MaxFeatures::All) fail("max_features");
                       if (!contains({1, 2, 4}, p.min_samples_leaf)) fail("min_samples_leaf");
                       if (!p.bootstrap) fail("bootstrap");
                   },
                   [&](const AdaBoostParams& p) {
                       if (!contains({0.1, 0.2, 0.5, 1.0}, p.learning_rate)) fail("learning_rate");
                       if (!contains({50, 500, 1000, 2000}, p.n_estimators)) fail("n_estimators");
                   },
                   [&](const SvmParams& p) {
                       if (!in_c_grid(p.c)) fail("C");
                       if (p.degree != 3 || p.coef0 != 0.0) fail("polynomial degree/coef0");
                   },
                   [&](const LinearSvmParams& p) {
                       if (!in_c_grid(p.c)) fail("C");
                       if (p.max_iter != 10000) fail("max_iter");
                   },
               },
               params);
}

std::string ClassifierConfig::describe() const
{
    std::ostringstream os;
    os << to_string(algorithm());
    std::visit(Overloaded{
                   [&](const RandomForestParams& p) {
                       os << " n_estimators=" << p.n_estimators << " max_features=" << max_features_name(p.max_features)
                          << " criterion=" << criterion_name(p.criterion) << " min_samples_leaf=" << p.min_samples_leaf;
                   },
                   [&](const AdaBoostParams& p) {
                       os << " learning_rate=" << p.learning_rate << " algorithm=" << boost_name(p.algorithm)
                          << " n_estimators=" << p.n_estimators;
                   },
                   [&](const SvmParams& p) {
                       os << " C=" << p.c << " kernel=" << kernel_name(p.kernel) << " gamma=" << gamma_name(p.gamma);
                   },
                   [&](const LinearSvmParams& p) {
                       os << " C=" << p.c << " max_iter=" << p.max_iter
                          << " class_weight=" << (p.balanced ? "balanced" : "none");
                   },
               },
               params);
    return os.str();
}

double ClassifierConfig::complexity() const
{
    return std::visit(Overloaded{
                          [](const RandomForestParams& p) { return static_cast<double>(p.n_estimators); },
                          [](const AdaBoostParams& p) { return static_cast<double>(p.n_estimators); },
                          [](const SvmParams& p) { return p.c; },
                          [](const LinearSvmParams& p) { return p.c; },
                      },
                      params);
}

nlohmann::json to_json(const ClassifierConfig& config)
{
    nlohmann::json j;
    j["algorithm"] = to_string(config.algorithm());
    j["seed"] = config.seed;
    std::visit(Overloaded{
                   [&](const RandomForestParams& p) {
                       j["n_estimators"] = p.n_estimators;
                       j["max_features"] = max_features_name(p.max_features);
                       j["criterion"] = criterion_name(p.criterion);
                       j["min_samples_leaf"] = p.min_samples_leaf;
                       j["bootstrap"] = p.bootstrap;
                   },
                   [&](const AdaBoostParams& p) {
                       j["learning_rate"] = p.learning_rate;
                       j["boost_algorithm"] = boost_name(p.algorithm);
                       j["n_estimators"] = p.n_estimators;
                   },
                   [&](const SvmParams& p) {
                       j["C"] = p.c;
                       j["kernel"] = kernel_name(p.kernel);
                       j["gamma"] = gamma_name(p.gamma);
                       j["degree"] = p.degree;
                       j["coef0"] = p.coef0;
                       j["tolerance"] = p.tolerance;
                   },
                   [&](const LinearSvmParams& p) {
                       j["C"] = p.c;
                       j["max_iter"] = p.max_iter;
                       j["class_weight"] = p.balanced ? "balanced" : "none";
                       j["tolerance"] = p.tolerance;
                   },
               },
               config.params);
    return j;
}

ClassifierConfig config_from_json(const nlohmann::json& j)
{
    ClassifierConfig config;
    config.seed = j.value("seed", std::uint64_t{0});
    switch (parse_algorithm(j.at("algorithm").get<std::string>())) {
    case Algorithm::RandomForest: {
        RandomForestParams p;
        p.n_estimators = j.value("n_estimators", p.n_estimators);
        p.max_features = parse_max_features(j.value("max_features", std::string("auto")));
        p.criterion = parse_criterion(j.value("criterion", std::string("gini")));
        p.min_samples_leaf = j.value("min_samples_leaf", p.min_samples_leaf);
        p.bootstrap = j.value("bootstrap", true);
        config.params = p;
        break;
    }
    case Algorithm::AdaBoost: {
        AdaBoostParams p;
        p.learning_rate = j.value("learning_rate", p.learning_rate);
        p.algorithm = parse_boost(j.value("boost_algorithm", std::string("SAMME")));
        p.n_estimators = j.value("n_estimators", p.n_estimators);
        config.params = p;
        break;
    }
    case Algorithm::Svm: {
        SvmParams p;
        p.c = j.value("C", p.c);
        p.kernel = parse_kernel(j.value("kernel", std::string("rbf")));
        p.gamma = parse_gamma(j.value("gamma", std::string("scale")));
        p.degree = j.value("degree", p.degree);
        p.coef0 = j.value("coef0", p.coef0);
        p.tolerance = j.value("tolerance", p.tolerance);
        config.params = p;
        break;
    }
    case Algorithm::LinearSvm: {
        LinearSvmParams p;
        p.c = j.value("C", p.c);
        p.max_iter = j.value("max_iter", p.max_iter);
        const auto weight = j.value("class_weight", std::string("none"));
        if (weight != "balanced" && weight != "none") {
            throw Error(ErrorCode::InvalidArgument, "unknown class_weight '" + weight + "'");
        }
        p.balanced = weight == "balanced";
        p.tolerance = j.value("tolerance", p.tolerance);
        config.params = p;
        break;
    }
    }
    return config;
}

SearchSpace SearchSpace::full(Algorithm algorithm)
{
    SearchSpace space;
    space.algorithm = algorithm;
    return space;
}

std::vector<ClassifierConfig> SearchSpace::expand(std::uint64_t seed) const
{
    std::vector<ClassifierConfig> cells;
    switch (algorithm) {
    case Algorithm::RandomForest:
        for (int n : n_estimators)
            for (auto m : max_features)
                for (auto c : criteria)
                    for (int leaf : min_samples_leaf)
                        cells.push_back({RandomForestParams{n, m, c, leaf, true}, seed});
        break;
    case Algorithm::AdaBoost:
        for (double lr : learning_rates)
            for (auto b : boost_algorithms)
                for (int n : n_estimators)
                    cells.push_back({AdaBoostParams{lr, b, n}, seed});
        break;
    case Algorithm::Svm:
        for (double c : c_values)
            for (auto k : kernels)
                for (auto g : gammas) {
                    SvmParams p;
                    p.c = c;
                    p.kernel = k;
                    p.gamma = g;
                    cells.push_back({p, seed});
                }
        break;
    case Algorithm::LinearSvm:
        for (double c : c_values)
            for (bool balanced : class_weight_balanced) {
                LinearSvmParams p;
                p.c = c;
                p.max_iter = linear_max_iter;
                p.balanced = balanced;
                cells.push_back({p, seed});
            }
        break;
    }
    return cells;
}

nlohmann::json to_json(const SearchSpace& space)
{
    nlohmann::json j;
    j["algorithm"] = to_string(space.algorithm);
    switch (space.algorithm) {
    case Algorithm::RandomForest: {
        j["n_estimators"] = space.n_estimators;
        auto& mf = j["max_features"] = nlohmann::json::array();
        for (auto m : space.max_features) mf.push_back(max_features_name(m));
        auto& cr = j["criterion"] = nlohmann::json::array();
        for (auto c : space.criteria) cr.push_back(criterion_name(c));
        j["min_samples_leaf"] = space.min_samples_leaf;
        break;
    }
    case Algorithm::AdaBoost: {
        j["learning_rate"] = space.learning_rates;
        auto& al = j["boost_algorithm"] = nlohmann::json::array();
        for (auto b : space.boost_algorithms) al.push_back(boost_name(b));
        j["n_estimators"] = space.n_estimators;
        break;
    }
    case Algorithm::Svm: {
        j["C"] = space.c_values;
        auto& ks = j["kernel"] = nlohmann::json::array();
        for (auto k : space.kernels) ks.push_back(kernel_name(k));
        auto& gs = j["gamma"] = nlohmann::json::array();
        for (auto g : space.gammas) gs.push_back(gamma_name(g));
        break;
    }
    case Algorithm::LinearSvm: {
        j["C"] = space.c_values;
        j["max_iter"] = space.linear_max_iter;
        auto& cw = j["class_weight"] = nlohmann::json::array();
        for (bool b : space.class_weight_balanced) cw.push_back(b ? "balanced" : "none");
        break;
    }
    }
    return j;
}

SearchSpace search_space_from_json(Algorithm algorithm, const nlohmann::json& j)
{
    SearchSpace space = SearchSpace::full(algorithm);
    const auto keys = to_json(space);
    for (const auto& [key, value] : j.items()) {
        if (!keys.contains(key)) {
            throw Error(ErrorCode::InvalidArgument,
                        "unknown key '" + key + "' for " + std::string(to_string(algorithm)));
        }
    }
    auto strings = [&](const char* key, auto parse, auto& out) {
        if (!j.contains(key)) return;
        out.clear();
        for (const auto& v : j.at(key)) out.push_back(parse(v.template get<std::string>()));
    };
    if (j.contains("n_estimators")) space.n_estimators = j.at("n_estimators").get<std::vector<int>>();
    if (j.contains("min_samples_leaf")) space.min_samples_leaf = j.at("min_samples_leaf").get<std::vector<int>>();
    if (j.contains("learning_rate")) space.learning_rates = j.at("learning_rate").get<std::vector<double>>();
    if (j.contains("C")) space.c_values = j.at("C").get<std::vector<double>>();
    if (j.contains("max_iter")) space.linear_max_iter = j.at("max_iter").get<int>();
    strings("max_features", parse_max_features, space.max_features);
    strings("criterion", parse_criterion, space.criteria);
    strings("boost_algorithm", parse_boost, space.boost_algorithms);
    strings("kernel", parse_kernel, space.kernels);
    strings("gamma", parse_gamma, space.gammas);
    if (j.contains("class_weight")) {
        space.class_weight_balanced.clear();
        for (const auto& v : j.at("class_weight")) {
            const auto s = v.get<std::string>();
            if (s != "balanced" && s != "none") {
                throw Error(ErrorCode::InvalidArgument, "unknown class_weight '" + s + "'");
            }
            space.class_weight_balanced.push_back(s == "balanced");
        }
    }
    for (const auto& cell : space.expand(0)) {
        cell.validate_search_domain();
    }
    if (space.expand(0).empty()) {
        throw Error(ErrorCode::InvalidArgument, "search space is empty");
    }
    return space;
}

} // namespace callerspace
