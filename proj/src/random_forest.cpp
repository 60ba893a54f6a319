#include <algorithm>
#include <cmath>
#include <numeric>

#include "callerspace/classifier.hpp"
#include "callerspace/error.hpp"
#include "callerspace/parallel.hpp"
#include "callerspace/rng.hpp"

namespace callerspace {

double impurity(std::span<const double> class_counts, SplitCriterion criterion)
{
    const double total = std::accumulate(class_counts.begin(), class_counts.end(), 0.0);
    if (total <= 0.0) {
        return 0.0;
    }
    double value = criterion == SplitCriterion::Gini ? 1.0 : 0.0;
    for (double count : class_counts) {
        const double p = count / total;
        if (criterion == SplitCriterion::Gini) {
            value -= p * p;
        } else if (p > 0.0) {
            value -= p * std::log2(p);
        }
    }
    return value;
}

std::size_t resolve_max_features(MaxFeatures mode, std::size_t n_features)
{
    double value = 0.0;
    switch (mode) {
    case MaxFeatures::Auto:
    case MaxFeatures::Sqrt: value = std::sqrt(static_cast<double>(n_features)); break;
    case MaxFeatures::Log2: value = std::log2(static_cast<double>(n_features)); break;
    case MaxFeatures::All: return n_features;
    }
    return std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(value)), 1, n_features);
}

std::span<const double> DecisionTree::predict(std::span<const double> x, std::size_t num_classes) const
{
    std::size_t node = 0;
    while (nodes[node].feature >= 0) {
        const auto& n = nodes[node];
        node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return std::span<const double>(leaf_distributions)
        .subspan(static_cast<std::size_t>(nodes[node].leaf) * num_classes, num_classes);
}

namespace {

/// Running sum of c*log2(c) or c^2 over class counts, updated one sample at a time.
struct SideStats {
    std::vector<double> counts;
    double total = 0.0;
    double accum = 0.0;
    SplitCriterion criterion;

    SideStats(std::size_t k, SplitCriterion c) : counts(k, 0.0), criterion(c) {}

    static double term(double c, SplitCriterion criterion)
    {
        if (criterion == SplitCriterion::Gini) return c * c;
        return c > 0.0 ? c * std::log2(c) : 0.0;
    }

    void add(std::size_t cls, double delta)
    {
        accum -= term(counts[cls], criterion);
        counts[cls] += delta;
        total += delta;
        accum += term(counts[cls], criterion);
    }

    /// total * impurity.
    double weighted_impurity() const
    {
        if (total <= 0.0) return 0.0;
        if (criterion == SplitCriterion::Gini) return total - accum / total;
        return total * std::log2(total) - accum;
    }
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& x, const std::vector<std::size_t>& cls, std::size_t k, const RandomForestParams& params,
                std::size_t mtry, Rng& rng)
        : x_(x), cls_(cls), k_(k), params_(params), mtry_(mtry), rng_(rng)
    {
    }

    DecisionTree build(std::vector<std::size_t> samples)
    {
        samples_ = std::move(samples);
        build_node(0, samples_.size());
        return std::move(tree_);
    }

private:
    struct SplitChoice {
        int feature = -1;
        double threshold = 0.0;
        double score = 0.0;
    };

    int make_leaf(int node, std::span<const double> counts, double total)
    {
        tree_.nodes[static_cast<std::size_t>(node)].leaf =
            static_cast<int>(tree_.leaf_distributions.size() / k_);
        for (double c : counts) {
            tree_.leaf_distributions.push_back(c / total);
        }
        return node;
    }

    int build_node(std::size_t begin, std::size_t end)
    {
        const int node = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        const std::size_t m = end - begin;
        std::vector<double> counts(k_, 0.0);
        for (std::size_t s = begin; s < end; ++s) {
            counts[cls_[samples_[s]]] += 1.0;
        }
        const auto nonzero = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; });
        const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
        if (nonzero <= 1 || m < 2 * min_leaf) {
            return make_leaf(node, counts, static_cast<double>(m));
        }

        const auto split = best_split(begin, end);
        if (split.feature < 0) {
            return make_leaf(node, counts, static_cast<double>(m));
        }
        const auto mid = std::stable_partition(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                               samples_.begin() + static_cast<std::ptrdiff_t>(end),
                                               [&](std::size_t s) {
                                                   return x_(s, static_cast<std::size_t>(split.feature)) <=
                                                          split.threshold;
                                               });
        const auto split_at = static_cast<std::size_t>(mid - samples_.begin());
        const int left = build_node(begin, split_at);
        const int right = build_node(split_at, end);
        auto& n = tree_.nodes[static_cast<std::size_t>(node)];
        n.feature = split.feature;
        n.threshold = split.threshold;
        n.left = left;
        n.right = right;
        return node;
    }

    SplitChoice best_split(std::size_t begin, std::size_t end)
    {
        const std::size_t p = x_.cols;
        const std::size_t m = end - begin;
        const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
        std::vector<std::size_t> features(p);
        std::iota(features.begin(), features.end(), 0);

        SplitChoice best;
        std::size_t visited = 0;
        std::vector<std::pair<double, std::size_t>> column(m);
        // Lazily shuffled feature order; constant features do not count
        // towards the mtry budget.
        for (std::size_t drawn = 0; drawn < p && visited < mtry_; ++drawn) {
            const std::size_t pick = drawn + static_cast<std::size_t>(rng_.below(p - drawn));
            std::swap(features[drawn], features[pick]);
            const std::size_t f = features[drawn];

            for (std::size_t s = 0; s < m; ++s) {
                const std::size_t sample = samples_[begin + s];
                column[s] = {x_(sample, f), cls_[sample]};
            }
            std::sort(column.begin(), column.end());
            if (column.front().first == column.back().first) {
                continue;
            }
            ++visited;

            SideStats left(k_, params_.criterion);
            SideStats right(k_, params_.criterion);
            for (const auto& [value, c] : column) {
                right.add(c, 1.0);
            }
            for (std::size_t t = 1; t < m; ++t) {
                left.add(column[t - 1].second, 1.0);
                right.add(column[t - 1].second, -1.0);
                if (t < min_leaf || m - t < min_leaf || !(column[t - 1].first < column[t].first)) {
                    continue;
                }
                const double score = left.weighted_impurity() + right.weighted_impurity();
                if (best.feature < 0 || score < best.score) {
                    best.feature = static_cast<int>(f);
                    best.score = score;
                    const double lo = column[t - 1].first;
                    const double hi = column[t].first;
                    double threshold = lo + 0.5 * (hi - lo);
                    if (!(threshold < hi)) threshold = lo;
                    best.threshold = threshold;
                }
            }
        }
        return best;
    }

    const Matrix& x_;
    const std::vector<std::size_t>& cls_;
    std::size_t k_;
    const RandomForestParams& params_;
    std::size_t mtry_;
    Rng& rng_;
    std::vector<std::size_t> samples_;
    DecisionTree tree_;
};

std::vector<std::size_t> draw_samples(std::size_t n, bool bootstrap, Rng& rng)
{
    std::vector<std::size_t> samples(n);
    if (bootstrap) {
        for (auto& s : samples) s = static_cast<std::size_t>(rng.below(n));
        std::sort(samples.begin(), samples.end());
    } else {
        std::iota(samples.begin(), samples.end(), 0);
    }
    return samples;
}

} // namespace

TrainedModel train_random_forest(const LabeledDataset& data, const ClassifierConfig& config)
{
    data.validate_for_training();
    const auto& params = std::get<RandomForestParams>(config.params);
    if (params.n_estimators < 1 || params.min_samples_leaf < 1) {
        throw Error(ErrorCode::InvalidArgument, "random forest needs n_estimators >= 1 and min_samples_leaf >= 1");
    }

    TrainedModel model;
    model.config = config;
    model.classes = data.classes();
    model.convention = ScoreConvention::ProbabilityOvr;
    model.num_features = data.features.cols;

    const std::size_t n = data.size();
    const std::size_t k = model.classes.size();
    std::vector<std::size_t> cls(n);
    for (std::size_t i = 0; i < n; ++i) {
        cls[i] = static_cast<std::size_t>(
            std::lower_bound(model.classes.begin(), model.classes.end(), data.labels[i]) - model.classes.begin());
    }
    const std::size_t mtry = resolve_max_features(params.max_features, data.features.cols);

    RandomForestModel forest;
    forest.trees.resize(static_cast<std::size_t>(params.n_estimators));
    parallel_for(forest.trees.size(), [&](std::size_t t) {
        Rng rng(derive_seed(config.seed, t));
        auto samples = draw_samples(n, params.bootstrap, rng);
        TreeBuilder builder(data.features, cls, k, params, mtry, rng);
        forest.trees[t] = builder.build(std::move(samples));
    });

    // Out-of-bag estimate; bootstrap draws are replayed from the tree seeds.
    if (params.bootstrap) {
        Matrix votes(n, k);
        std::vector<bool> seen(n, false);
        for (std::size_t t = 0; t < forest.trees.size(); ++t) {
            Rng rng(derive_seed(config.seed, t));
            const auto samples = draw_samples(n, true, rng);
            std::vector<bool> in_bag(n, false);
            for (std::size_t s : samples) in_bag[s] = true;
            for (std::size_t i = 0; i < n; ++i) {
                if (in_bag[i]) continue;
                const auto dist = forest.trees[t].predict(data.features.row(i), k);
                for (std::size_t c = 0; c < k; ++c) votes(i, c) += dist[c];
                seen[i] = true;
            }
        }
        std::size_t judged = 0;
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!seen[i]) continue;
            ++judged;
            const auto row = votes.row(i);
            const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
            correct += best == cls[i] ? 1 : 0;
        }
        forest.oob_accuracy = judged > 0 ? static_cast<double>(correct) / static_cast<double>(judged) : 0.0;
    }
    model.parameters = std::move(forest);
    return model;
}

} // namespace callerspace
