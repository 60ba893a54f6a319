#include "callerspace/classifier.hpp"

#include <algorithm>
#include <fstream>

#include "callerspace/binary_io.hpp"
#include "callerspace/error.hpp"
#include "callerspace/parallel.hpp"
#include "classifier_internal.hpp"

namespace callerspace {

std::string_view to_string(ScoreConvention convention)
{
    switch (convention) {
    case ScoreConvention::DecisionOvo: return "decision_ovo";
    case ScoreConvention::DecisionOvr: return "decision_ovr";
    case ScoreConvention::ProbabilityOvr: return "probability_ovr";
    }
    return "?";
}

TrainedModel train_classifier(const LabeledDataset& data, const ClassifierConfig& config)
{
    switch (config.algorithm()) {
    case Algorithm::RandomForest: return train_random_forest(data, config);
    case Algorithm::AdaBoost: return train_adaboost(data, config);
    case Algorithm::Svm:
    case Algorithm::LinearSvm: {
        data.validate_for_training();
        const auto standardizer = Standardizer::fit(data.features);
        LabeledDataset scaled{standardizer.transform(data.features), data.labels};
        auto model = config.algorithm() == Algorithm::Svm ? train_svm(scaled, config) : train_linear_svm(scaled, config);
        model.standardizer = standardizer;
        return model;
    }
    }
    throw Error(ErrorCode::Internal, "unhandled algorithm");
}

int ovo_vote(std::span<const double> pair_scores, std::span<const std::pair<int, int>> pairs, std::size_t num_classes)
{
    std::vector<int> votes(num_classes, 0);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        ++votes[static_cast<std::size_t>(pair_scores[p] > 0.0 ? pairs[p].first : pairs[p].second)];
    }
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

ScoreMatrix predict_scores(const TrainedModel& model, const Matrix& features)
{
    if (features.cols != model.num_features) {
        throw Error(ErrorCode::DimensionMismatch, "model expects " + std::to_string(model.num_features) +
                                                      " features, got " + std::to_string(features.cols));
    }
    const Matrix x = model.standardizer.empty() ? features : model.standardizer.transform(features);
    const std::size_t n = x.rows;
    const std::size_t k = model.classes.size();

    ScoreMatrix scores;
    scores.convention = model.convention;
    scores.classes = model.classes;
    scores.predicted.assign(n, 0);
    std::vector<int> predicted_index(n, 0);

    if (const auto* svm = std::get_if<KernelSvmModel>(&model.parameters)) {
        for (const auto& m : svm->machines) {
            scores.class_pairs.emplace_back(m.first, m.second);
        }
        scores.values = Matrix(n, svm->machines.size());
        parallel_for(n, [&](std::size_t i) {
            const auto row = x.row(i);
            std::vector<double> kernel_row(svm->support.rows);
            for (std::size_t s = 0; s < svm->support.rows; ++s) {
                kernel_row[s] = svm->kernel(svm->support.row(s), row);
            }
            auto out = scores.values.row(i);
            for (std::size_t p = 0; p < svm->machines.size(); ++p) {
                const auto& m = svm->machines[p];
                double value = -m.rho;
                for (std::size_t s = 0; s < m.support_index.size(); ++s) {
                    value += m.coefficients[s] * kernel_row[m.support_index[s]];
                }
                out[p] = value;
            }
            predicted_index[i] = ovo_vote(out, scores.class_pairs, k);
        });
    } else {
        scores.values = Matrix(n, k);
        parallel_for(n, [&](std::size_t i) {
            const auto row = x.row(i);
            auto out = scores.values.row(i);
            if (const auto* linear = std::get_if<LinearSvmModel>(&model.parameters)) {
                for (std::size_t c = 0; c < k; ++c) {
                    const auto w = linear->weights.row(c);
                    double value = linear->biases[c];
                    for (std::size_t j = 0; j < row.size(); ++j) value += w[j] * row[j];
                    out[c] = value;
                }
            } else if (const auto* forest = std::get_if<RandomForestModel>(&model.parameters)) {
                for (const auto& tree : forest->trees) {
                    const auto dist = tree.predict(row, k);
                    for (std::size_t c = 0; c < k; ++c) out[c] += dist[c];
                }
                for (double& v : out) v /= static_cast<double>(forest->trees.size());
            } else {
                detail::adaboost_scores(std::get<AdaBoostModel>(model.parameters), k, row, out);
            }
            predicted_index[i] = static_cast<int>(std::max_element(out.begin(), out.end()) - out.begin());
        });
    }
    for (std::size_t i = 0; i < n; ++i) {
        scores.predicted[i] = model.classes[static_cast<std::size_t>(predicted_index[i])];
    }
    return scores;
}

namespace {

constexpr std::array<char, 4> kModelMagic = {'C', 'S', 'M', '1'};
constexpr std::uint16_t kModelVersion = 1;

void put_doubles(binary::Writer& w, std::span<const double> values)
{
    w.put(static_cast<std::uint32_t>(values.size()));
    for (double v : values) w.put(v);
}

std::vector<double> get_doubles(binary::Reader& r)
{
    const auto n = r.get<std::uint32_t>();
    std::vector<double> out;
    out.reserve(std::min<std::uint32_t>(n, 1U << 20));
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(r.get<double>());
    return out;
}

void put_matrix(binary::Writer& w, const Matrix& m)
{
    w.put(static_cast<std::uint32_t>(m.rows));
    w.put(static_cast<std::uint32_t>(m.cols));
    for (double v : m.data) w.put(v);
}

Matrix get_matrix(binary::Reader& r)
{
    Matrix m;
    m.rows = r.get<std::uint32_t>();
    m.cols = r.get<std::uint32_t>();
    const std::size_t count = m.rows * m.cols;
    m.data.reserve(std::min<std::size_t>(count, 1U << 20));
    for (std::size_t i = 0; i < count; ++i) m.data.push_back(r.get<double>());
    return m;
}

} // namespace

void save_model(const TrainedModel& model, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    }
    binary::Writer w(out);
    w.put_bytes(kModelMagic.data(), kModelMagic.size());
    w.put(kModelVersion);
    w.put(static_cast<std::uint8_t>(model.algorithm()));
    w.put_long_string(to_json(model.config).dump());
    w.put(static_cast<std::uint32_t>(model.num_features));
    w.put(static_cast<std::uint32_t>(model.classes.size()));
    for (int c : model.classes) w.put(static_cast<std::int32_t>(c));
    put_doubles(w, model.standardizer.mean);
    put_doubles(w, model.standardizer.scale);
    w.put(static_cast<std::uint8_t>(model.convention));

    if (const auto* linear = std::get_if<LinearSvmModel>(&model.parameters)) {
        put_matrix(w, linear->weights);
        put_doubles(w, linear->biases);
        w.put(static_cast<std::uint8_t>(linear->converged));
    } else if (const auto* svm = std::get_if<KernelSvmModel>(&model.parameters)) {
        w.put(static_cast<std::uint8_t>(svm->kernel.type));
        w.put(svm->kernel.gamma);
        w.put(static_cast<std::int32_t>(svm->kernel.degree));
        w.put(svm->kernel.coef0);
        put_matrix(w, svm->support);
        w.put(static_cast<std::uint32_t>(svm->machines.size()));
        for (const auto& m : svm->machines) {
            w.put(static_cast<std::int32_t>(m.first));
            w.put(static_cast<std::int32_t>(m.second));
            w.put(m.rho);
            w.put(static_cast<std::uint8_t>(m.converged));
            w.put(static_cast<std::uint32_t>(m.support_index.size()));
            for (std::size_t s = 0; s < m.support_index.size(); ++s) {
                w.put(m.support_index[s]);
                w.put(m.coefficients[s]);
            }
        }
    } else if (const auto* forest = std::get_if<RandomForestModel>(&model.parameters)) {
        w.put(forest->oob_accuracy);
        w.put(static_cast<std::uint32_t>(forest->trees.size()));
        for (const auto& tree : forest->trees) {
            w.put(static_cast<std::uint32_t>(tree.nodes.size()));
            for (const auto& node : tree.nodes) {
                w.put(static_cast<std::int32_t>(node.feature));
                w.put(node.threshold);
                w.put(static_cast<std::int32_t>(node.left));
                w.put(static_cast<std::int32_t>(node.right));
                w.put(static_cast<std::int32_t>(node.leaf));
            }
            put_doubles(w, tree.leaf_distributions);
        }
    } else {
        const auto& boost = std::get<AdaBoostModel>(model.parameters);
        w.put(static_cast<std::uint8_t>(boost.algorithm));
        w.put(static_cast<std::uint32_t>(boost.stumps.size()));
        for (const auto& s : boost.stumps) {
            w.put(static_cast<std::int32_t>(s.feature));
            w.put(s.threshold);
            w.put(static_cast<std::int32_t>(s.left_class));
            w.put(static_cast<std::int32_t>(s.right_class));
            put_doubles(w, s.probabilities);
            w.put(s.weight);
            w.put(s.error);
        }
        put_doubles(w, boost.training_error);
    }
    out.flush();
    if (!out) {
        throw Error(ErrorCode::Io, "write failed for " + path.string());
    }
}

TrainedModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    }
    binary::Reader r(in);
    std::array<char, 4> magic{};
    r.get_bytes(magic.data(), magic.size());
    if (magic != kModelMagic) {
        throw Error(ErrorCode::BadMagic, path.string() + " is not a model file");
    }
    if (const auto version = r.get<std::uint16_t>(); version != kModelVersion) {
        throw Error(ErrorCode::UnsupportedVersion, "model version " + std::to_string(version));
    }
    const auto tag = r.get<std::uint8_t>();
    TrainedModel model;
    model.config = config_from_json(nlohmann::json::parse(r.get_long_string()));
    if (static_cast<std::uint8_t>(model.algorithm()) != tag) {
        throw Error(ErrorCode::InvalidArgument, "algorithm tag does not match the stored config");
    }
    model.num_features = r.get<std::uint32_t>();
    const auto k = r.get<std::uint32_t>();
    for (std::uint32_t c = 0; c < k; ++c) model.classes.push_back(r.get<std::int32_t>());
    model.standardizer.mean = get_doubles(r);
    model.standardizer.scale = get_doubles(r);
    model.convention = static_cast<ScoreConvention>(r.get<std::uint8_t>());

    switch (model.algorithm()) {
    case Algorithm::LinearSvm: {
        LinearSvmModel linear;
        linear.weights = get_matrix(r);
        linear.biases = get_doubles(r);
        linear.converged = r.get<std::uint8_t>() != 0;
        model.parameters = std::move(linear);
        break;
    }
    case Algorithm::Svm: {
        KernelSvmModel svm;
        svm.kernel.type = static_cast<KernelType>(r.get<std::uint8_t>());
        svm.kernel.gamma = r.get<double>();
        svm.kernel.degree = r.get<std::int32_t>();
        svm.kernel.coef0 = r.get<double>();
        svm.support = get_matrix(r);
        const auto machines = r.get<std::uint32_t>();
        for (std::uint32_t p = 0; p < machines; ++p) {
            PairMachine m;
            m.first = r.get<std::int32_t>();
            m.second = r.get<std::int32_t>();
            m.rho = r.get<double>();
            m.converged = r.get<std::uint8_t>() != 0;
            const auto count = r.get<std::uint32_t>();
            for (std::uint32_t s = 0; s < count; ++s) {
                m.support_index.push_back(r.get<std::uint32_t>());
                m.coefficients.push_back(r.get<double>());
            }
            svm.machines.push_back(std::move(m));
        }
        model.parameters = std::move(svm);
        break;
    }
    case Algorithm::RandomForest: {
        RandomForestModel forest;
        forest.oob_accuracy = r.get<double>();
        const auto trees = r.get<std::uint32_t>();
        for (std::uint32_t t = 0; t < trees; ++t) {
            DecisionTree tree;
            const auto nodes = r.get<std::uint32_t>();
            for (std::uint32_t i = 0; i < nodes; ++i) {
                TreeNode node;
                node.feature = r.get<std::int32_t>();
                node.threshold = r.get<double>();
                node.left = r.get<std::int32_t>();
                node.right = r.get<std::int32_t>();
                node.leaf = r.get<std::int32_t>();
                tree.nodes.push_back(node);
            }
            tree.leaf_distributions = get_doubles(r);
            forest.trees.push_back(std::move(tree));
        }
        model.parameters = std::move(forest);
        break;
    }
    case Algorithm::AdaBoost: {
        AdaBoostModel boost;
        boost.algorithm = static_cast<BoostAlgorithm>(r.get<std::uint8_t>());
        const auto stumps = r.get<std::uint32_t>();
        for (std::uint32_t i = 0; i < stumps; ++i) {
            Stump s;
            s.feature = r.get<std::int32_t>();
            s.threshold = r.get<double>();
            s.left_class = r.get<std::int32_t>();
            s.right_class = r.get<std::int32_t>();
            s.probabilities = get_doubles(r);
            s.weight = r.get<double>();
            s.error = r.get<double>();
            boost.stumps.push_back(std::move(s));
        }
        boost.training_error = get_doubles(r);
        model.parameters = std::move(boost);
        break;
    }
    }
    if (!r.at_end()) {
        throw Error(ErrorCode::InvalidArgument, "trailing bytes in model file");
    }
    return model;
}

} // namespace callerspace
