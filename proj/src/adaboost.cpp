#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "callerspace/classifier.hpp"
#include "classifier_internal.hpp"
#include "callerspace/error.hpp"

namespace callerspace {

namespace {

constexpr double kErrorClamp = 1e-10;
constexpr double kProbabilityFloor = std::numeric_limits<double>::epsilon();

struct StumpFit {
    int feature = 0;
    double threshold = std::numeric_limits<double>::infinity();
    std::vector<double> left;
    std::vector<double> right;
};

/// Depth-1 split minimizing weighted Gini impurity.
StumpFit fit_stump(const Matrix& x, const std::vector<std::vector<std::size_t>>& sorted,
                   const std::vector<std::size_t>& cls, const std::vector<double>& weights, std::size_t k)
{
    const std::size_t n = x.rows;
    std::vector<double> totals(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) totals[cls[i]] += weights[i];
    const double total_weight = std::accumulate(totals.begin(), totals.end(), 0.0);

    StumpFit best;
    best.left = totals;
    best.right.assign(k, 0.0);
    double best_score = std::numeric_limits<double>::infinity();

    std::vector<double> left(k);
    for (std::size_t f = 0; f < x.cols; ++f) {
        const auto& order = sorted[f];
        std::fill(left.begin(), left.end(), 0.0);
        double left_weight = 0.0;
        double left_sq = 0.0;
        double right_sq = 0.0;
        for (double t : totals) right_sq += t * t;
        for (std::size_t pos = 0; pos + 1 < n; ++pos) {
            const std::size_t i = order[pos];
            const std::size_t c = cls[i];
            const double w = weights[i];
            const double right_c = totals[c] - left[c];
            left_sq += 2.0 * left[c] * w + w * w;
            right_sq += -2.0 * right_c * w + w * w;
            left[c] += w;
            left_weight += w;
            const double lo = x(i, f);
            const double hi = x(order[pos + 1], f);
            if (!(lo < hi)) continue;
            const double right_weight = total_weight - left_weight;
            if (left_weight <= 0.0 || right_weight <= 0.0) continue;
            const double score = (left_weight - left_sq / left_weight) + (right_weight - right_sq / right_weight);
            if (score < best_score) {
                best_score = score;
                best.feature = static_cast<int>(f);
                double threshold = lo + 0.5 * (hi - lo);
                if (!(threshold < hi)) threshold = lo;
                best.threshold = threshold;
                best.left = left;
                for (std::size_t q = 0; q < k; ++q) best.right[q] = totals[q] - left[q];
            }
        }
    }
    return best;
}

std::size_t argmax(std::span<const double> v)
{
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void normalize(std::vector<double>& weights)
{
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double& w : weights) w /= sum;
}

/// Per-class contribution of one stump to the decision scores of x.
void stump_contribution(const Stump& stump, BoostAlgorithm algorithm, std::span<const double> x, std::size_t k,
                        std::span<double> out)
{
    const bool left = x[static_cast<std::size_t>(stump.feature)] <= stump.threshold;
    if (algorithm == BoostAlgorithm::Samme) {
        std::fill(out.begin(), out.end(), 0.0);
        out[static_cast<std::size_t>(left ? stump.left_class : stump.right_class)] = stump.weight;
        return;
    }
    const auto probs = std::span<const double>(stump.probabilities).subspan(left ? 0 : k, k);
    double mean_log = 0.0;
    for (double p : probs) mean_log += std::log(p);
    mean_log /= static_cast<double>(k);
    for (std::size_t c = 0; c < k; ++c) {
        out[c] = static_cast<double>(k - 1) * (std::log(probs[c]) - mean_log);
    }
}

} // namespace

TrainedModel train_adaboost(const LabeledDataset& data, const ClassifierConfig& config)
{
    data.validate_for_training();
    const auto& params = std::get<AdaBoostParams>(config.params);
    if (params.n_estimators < 1 || !(params.learning_rate > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "AdaBoost needs n_estimators >= 1 and learning_rate > 0");
    }

    TrainedModel model;
    model.config = config;
    model.classes = data.classes();
    model.convention = ScoreConvention::DecisionOvr;
    model.num_features = data.features.cols;

    const Matrix& x = data.features;
    const std::size_t n = data.size();
    const std::size_t k = model.classes.size();
    const double kd = static_cast<double>(k);
    std::vector<std::size_t> cls(n);
    for (std::size_t i = 0; i < n; ++i) {
        cls[i] = static_cast<std::size_t>(
            std::lower_bound(model.classes.begin(), model.classes.end(), data.labels[i]) - model.classes.begin());
    }
    std::vector<std::vector<std::size_t>> sorted(x.cols, std::vector<std::size_t>(n));
    for (std::size_t f = 0; f < x.cols; ++f) {
        std::iota(sorted[f].begin(), sorted[f].end(), 0);
        std::stable_sort(sorted[f].begin(), sorted[f].end(), [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
    }

    AdaBoostModel boost;
    boost.algorithm = params.algorithm;
    std::vector<double> weights(n, 1.0 / static_cast<double>(n));
    Matrix running(n, k);
    std::vector<double> contribution(k);

    for (int round = 0; round < params.n_estimators; ++round) {
        const auto fit = fit_stump(x, sorted, cls, weights, k);

        Stump stump;
        stump.feature = fit.feature;
        stump.threshold = fit.threshold;
        stump.left_class = static_cast<int>(argmax(fit.left));
        stump.right_class = static_cast<int>(argmax(fit.right));
        if (params.algorithm == BoostAlgorithm::SammeR) {
            stump.probabilities.resize(2 * k);
            const double lw = std::accumulate(fit.left.begin(), fit.left.end(), 0.0);
            const double rw = std::accumulate(fit.right.begin(), fit.right.end(), 0.0);
            for (std::size_t c = 0; c < k; ++c) {
                stump.probabilities[c] = std::max(lw > 0.0 ? fit.left[c] / lw : 1.0 / kd, kProbabilityFloor);
                stump.probabilities[k + c] = std::max(rw > 0.0 ? fit.right[c] / rw : 1.0 / kd, kProbabilityFloor);
            }
        }

        std::vector<bool> missed(n);
        double error = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool left = x(i, static_cast<std::size_t>(stump.feature)) <= stump.threshold;
            const auto predicted = static_cast<std::size_t>(left ? stump.left_class : stump.right_class);
            missed[i] = predicted != cls[i];
            if (missed[i]) error += weights[i];
        }
        stump.error = error;

        if (error >= 1.0 - 1.0 / kd) {
            if (round == 0) {
                throw Error(ErrorCode::DegenerateBoost, "first stump does not beat chance (weighted error " +
                                                            std::to_string(error) + ")");
            }
            break;
        }
        const bool perfect = error <= 0.0;
        const double clamped = std::clamp(error, kErrorClamp, 1.0 - kErrorClamp);

        if (params.algorithm == BoostAlgorithm::Samme) {
            stump.weight = params.learning_rate * (std::log((1.0 - clamped) / clamped) + std::log(kd - 1.0));
            for (std::size_t i = 0; i < n; ++i) {
                if (missed[i]) weights[i] *= std::exp(stump.weight);
            }
        } else {
            stump.weight = 1.0;
            const double scale = -params.learning_rate * (kd - 1.0) / kd;
            for (std::size_t i = 0; i < n; ++i) {
                const bool left = x(i, static_cast<std::size_t>(stump.feature)) <= stump.threshold;
                const auto probs = std::span<const double>(stump.probabilities).subspan(left ? 0 : k, k);
                double coded = 0.0;
                for (std::size_t c = 0; c < k; ++c) {
                    const double y_code = c == cls[i] ? 1.0 : -1.0 / (kd - 1.0);
                    coded += y_code * std::log(probs[c]);
                }
                weights[i] *= std::exp(scale * coded);
            }
        }
        normalize(weights);

        std::size_t wrong = 0;
        for (std::size_t i = 0; i < n; ++i) {
            stump_contribution(stump, params.algorithm, x.row(i), k, contribution);
            auto row = running.row(i);
            for (std::size_t c = 0; c < k; ++c) row[c] += contribution[c];
            wrong += argmax(row) != cls[i] ? 1 : 0;
        }
        boost.training_error.push_back(static_cast<double>(wrong) / static_cast<double>(n));
        boost.stumps.push_back(std::move(stump));
        if (perfect) {
            break;
        }
    }
    model.parameters = std::move(boost);
    return model;
}

namespace detail {

void adaboost_scores(const AdaBoostModel& boost, std::size_t k, std::span<const double> x, std::span<double> out)
{
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> contribution(k);
    double norm = 0.0;
    for (const auto& stump : boost.stumps) {
        stump_contribution(stump, boost.algorithm, x, k, contribution);
        for (std::size_t c = 0; c < k; ++c) out[c] += contribution[c];
        norm += boost.algorithm == BoostAlgorithm::Samme ? stump.weight : 1.0;
    }
    if (norm > 0.0) {
        for (double& v : out) v /= norm;
    }
}

} // namespace detail

} // namespace callerspace
