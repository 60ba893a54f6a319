#include "callerspace/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>

#include "callerspace/error.hpp"
#include "callerspace/parallel.hpp"
#include "callerspace/rng.hpp"

namespace callerspace {

std::vector<std::size_t> FoldPlan::members(FoldRole role) const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < roles.size(); ++i) {
        if (roles[i] == role) out.push_back(i);
    }
    return out;
}

std::vector<FoldPlan> make_folds(std::span<const std::uint16_t> group_callers, std::size_t k, std::uint64_t seed)
{
    if (k < 2) {
        throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
    }
    std::map<std::uint16_t, std::vector<std::size_t>> by_caller;
    for (std::size_t i = 0; i < group_callers.size(); ++i) {
        by_caller[group_callers[i]].push_back(i);
    }
    std::vector<FoldPlan> folds(k);
    for (std::size_t f = 0; f < k; ++f) {
        folds[f].fold_index = f;
        folds[f].seed = seed;
        folds[f].roles.assign(group_callers.size(), FoldRole::Train);
    }
    for (auto& [caller, members] : by_caller) {
        if (members.size() < k) {
            throw Error(ErrorCode::TooFewGroups, "caller " + std::to_string(caller) + " has " +
                                                     std::to_string(members.size()) + " groups for " +
                                                     std::to_string(k) + " folds");
        }
        Rng rng(derive_seed(seed, caller));
        rng.shuffle(std::span(members));
        const auto shares = partition_sizes(members.size(), k);
        std::size_t start = 0;
        for (std::size_t f = 0; f < k; ++f) {
            const std::size_t end = start + shares[f];
            std::vector<std::size_t> rest;
            for (std::size_t i = 0; i < members.size(); ++i) {
                if (i >= start && i < end) {
                    folds[f].roles[members[i]] = FoldRole::Test;
                } else {
                    rest.push_back(members[i]);
                }
            }
            std::size_t n_val = static_cast<std::size_t>(std::floor(static_cast<double>(rest.size()) * 2.0 / 9.0 + 1e-9));
            if (rest.size() >= 2) n_val = std::max<std::size_t>(n_val, 1);
            for (std::size_t i = rest.size() - n_val; i < rest.size(); ++i) {
                folds[f].roles[rest[i]] = FoldRole::Val;
            }
            start = end;
        }
    }
    return folds;
}

std::vector<FoldPlan> make_folds(std::span<const CallerGroup> groups, std::size_t k, std::uint64_t seed)
{
    std::vector<std::uint16_t> callers;
    callers.reserve(groups.size());
    for (const auto& g : groups) callers.push_back(g.caller_id());
    return make_folds(callers, k, seed);
}

RocCurve roc_auc(std::span<const double> scores, std::span<const bool> positive)
{
    if (scores.size() != positive.size()) {
        throw Error(ErrorCode::DimensionMismatch, "scores and labels differ in length");
    }
    RocCurve curve;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (std::isnan(scores[i])) {
            throw Error(ErrorCode::InvalidArgument, "NaN score");
        }
        (positive[i] ? curve.positives : curve.negatives)++;
    }
    if (curve.positives == 0 || curve.negatives == 0) {
        throw Error(ErrorCode::OneClassOnly, "ROC needs both positive and negative samples");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    const auto pos_total = static_cast<double>(curve.positives);
    const auto neg_total = static_cast<double>(curve.negatives);
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t twice_area = 0;
    curve.points.push_back({0.0, 0.0});
    for (std::size_t start = 0; start < order.size();) {
        std::size_t end = start;
        std::int64_t step_tp = 0;
        std::int64_t step_fp = 0;
        while (end < order.size() && scores[order[end]] == scores[order[start]]) {
            (positive[order[end]] ? step_tp : step_fp)++;
            ++end;
        }
        twice_area += step_fp * (2 * tp + step_tp);
        tp += step_tp;
        fp += step_fp;
        curve.points.push_back({static_cast<double>(fp) / neg_total, static_cast<double>(tp) / pos_total});
        start = end;
    }
    curve.auc = static_cast<double>(twice_area) / (2.0 * pos_total * neg_total);
    return curve;
}

double trapezoid_area(std::span<const RocPoint> points)
{
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        area += (points[i].fpr - points[i - 1].fpr) * 0.5 * (points[i].tpr + points[i - 1].tpr);
    }
    return area;
}

namespace {

void finish_macro(MacroAuc& result)
{
    double sum = 0.0;
    std::size_t used = 0;
    for (const auto& v : result.per_item) {
        if (v) {
            sum += *v;
            ++used;
        }
    }
    if (used == 0) {
        throw Error(ErrorCode::OneClassOnly, "no class could be scored");
    }
    result.value = sum / static_cast<double>(used);
}

} // namespace

MacroAuc macro_auc_ovr(const Matrix& scores, std::span<const int> labels, std::span<const int> classes)
{
    if (scores.rows != labels.size() || scores.cols != classes.size()) {
        throw Error(ErrorCode::DimensionMismatch, "score matrix does not match labels/classes");
    }
    MacroAuc result;
    std::vector<double> column(scores.rows);
    std::vector<bool> truth(scores.rows);
    for (std::size_t c = 0; c < classes.size(); ++c) {
        result.item_names.push_back(std::to_string(classes[c]));
        std::size_t present = 0;
        for (std::size_t i = 0; i < scores.rows; ++i) {
            column[i] = scores(i, c);
            truth[i] = labels[i] == classes[c];
            present += truth[i] ? 1 : 0;
        }
        if (present == 0 || present == scores.rows) {
            result.per_item.emplace_back(std::nullopt);
            result.curves.emplace_back();
            result.warnings.push_back("class " + std::to_string(classes[c]) + " skipped: only one class present");
            continue;
        }
        std::unique_ptr<bool[]> flags(new bool[truth.size()]);
        for (std::size_t i = 0; i < truth.size(); ++i) flags[i] = truth[i];
        auto curve = roc_auc(column, std::span<const bool>(flags.get(), truth.size()));
        result.per_item.emplace_back(curve.auc);
        result.curves.push_back(std::move(curve));
    }
    finish_macro(result);
    return result;
}

MacroAuc macro_auc_ovo(const Matrix& pair_scores, std::span<const std::pair<int, int>> pairs,
                       std::span<const int> labels, std::span<const int> classes)
{
    if (pair_scores.rows != labels.size() || pair_scores.cols != pairs.size()) {
        throw Error(ErrorCode::DimensionMismatch, "pair score matrix does not match labels/pairs");
    }
    MacroAuc result;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const int a = classes[static_cast<std::size_t>(pairs[p].first)];
        const int b = classes[static_cast<std::size_t>(pairs[p].second)];
        result.item_names.push_back(std::to_string(a) + "-" + std::to_string(b));
        std::vector<double> forward;
        std::vector<double> backward;
        std::vector<char> is_a;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == a || labels[i] == b) {
                forward.push_back(pair_scores(i, p));
                backward.push_back(-pair_scores(i, p));
                is_a.push_back(labels[i] == a ? 1 : 0);
            }
        }
        const auto n_a = static_cast<std::size_t>(std::count(is_a.begin(), is_a.end(), 1));
        if (n_a == 0 || n_a == is_a.size()) {
            result.per_item.emplace_back(std::nullopt);
            result.curves.emplace_back();
            result.warnings.push_back("pair " + result.item_names.back() + " skipped: a class is absent");
            continue;
        }
        std::unique_ptr<bool[]> pos_a(new bool[is_a.size()]);
        std::unique_ptr<bool[]> pos_b(new bool[is_a.size()]);
        for (std::size_t i = 0; i < is_a.size(); ++i) {
            pos_a[i] = is_a[i] != 0;
            pos_b[i] = is_a[i] == 0;
        }
        auto curve_a = roc_auc(forward, std::span<const bool>(pos_a.get(), is_a.size()));
        const auto curve_b = roc_auc(backward, std::span<const bool>(pos_b.get(), is_a.size()));
        result.per_item.emplace_back(0.5 * (curve_a.auc + curve_b.auc));
        result.curves.push_back(std::move(curve_a));
    }
    finish_macro(result);
    return result;
}

MacroAuc macro_auc(const ScoreMatrix& scores, std::span<const int> labels)
{
    if (scores.convention == ScoreConvention::DecisionOvo) {
        return macro_auc_ovo(scores.values, scores.class_pairs, labels, scores.classes);
    }
    return macro_auc_ovr(scores.values, labels, scores.classes);
}

double f1_macro(std::span<const int> predicted, std::span<const int> labels)
{
    if (predicted.size() != labels.size() || labels.empty()) {
        throw Error(ErrorCode::InvalidArgument, "f1_macro needs equal-length, non-empty inputs");
    }
    std::set<int> classes(labels.begin(), labels.end());
    classes.insert(predicted.begin(), predicted.end());
    double sum = 0.0;
    for (int c : classes) {
        double tp = 0.0;
        double fp = 0.0;
        double fn = 0.0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const bool p = predicted[i] == c;
            const bool t = labels[i] == c;
            tp += (p && t) ? 1.0 : 0.0;
            fp += (p && !t) ? 1.0 : 0.0;
            fn += (!p && t) ? 1.0 : 0.0;
        }
        const double denom = 2.0 * tp + fp + fn;
        sum += denom > 0.0 ? 2.0 * tp / denom : 0.0;
    }
    return sum / static_cast<double>(classes.size());
}

void EvalReport::recompute_summary()
{
    const double n = static_cast<double>(folds.size());
    double sum = 0.0;
    for (const auto& f : folds) sum += f.test_macro_auc;
    mean_auc = folds.empty() ? 0.0 : sum / n;
    double ss = 0.0;
    for (const auto& f : folds) ss += (f.test_macro_auc - mean_auc) * (f.test_macro_auc - mean_auc);
    std_auc = folds.empty() ? 0.0 : std::sqrt(ss / n);

    std::map<std::string, std::pair<double, std::size_t>> items;
    for (const auto& f : folds) {
        for (std::size_t i = 0; i < f.test_auc.per_item.size(); ++i) {
            if (f.test_auc.per_item[i]) {
                auto& acc = items[f.test_auc.item_names[i]];
                acc.first += *f.test_auc.per_item[i];
                acc.second++;
            }
        }
    }
    mean_item_auc.clear();
    for (const auto& [name, acc] : items) {
        mean_item_auc[name] = acc.first / static_cast<double>(acc.second);
    }
}

EvalReport grid_search(std::span<const FoldPlan> folds, const LabeledDataset& dataset, const SearchSpace& space,
                       std::uint64_t seed, const std::string& model_name, std::vector<TrainedModel>* models_out)
{
    const auto cells = space.expand(seed);
    if (cells.empty()) {
        throw Error(ErrorCode::InvalidArgument, "empty search space");
    }
    // Selection order: cheaper first, then enumeration order.
    std::vector<std::size_t> ranked(cells.size());
    std::iota(ranked.begin(), ranked.end(), 0);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&](std::size_t a, std::size_t b) { return cells[a].complexity() < cells[b].complexity(); });

    struct FoldData {
        LabeledDataset train;
        LabeledDataset val;
        LabeledDataset train_val;
        LabeledDataset test;
    };
    std::vector<FoldData> data(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        if (folds[f].roles.size() != dataset.size()) {
            throw Error(ErrorCode::DimensionMismatch, "fold plan does not match dataset size");
        }
        const auto train = folds[f].members(FoldRole::Train);
        const auto val = folds[f].members(FoldRole::Val);
        auto train_val = train;
        train_val.insert(train_val.end(), val.begin(), val.end());
        data[f] = {dataset.subset(train), dataset.subset(val), dataset.subset(train_val),
                   dataset.subset(folds[f].members(FoldRole::Test))};
    }

    std::vector<std::optional<double>> f1(folds.size() * cells.size());
    parallel_for(f1.size(), [&](std::size_t idx) {
        const std::size_t f = idx / cells.size();
        const std::size_t c = idx % cells.size();
        try {
            const auto model = train_classifier(data[f].train, cells[c]);
            const auto scores = predict_scores(model, data[f].val.features);
            f1[idx] = f1_macro(scores.predicted, data[f].val.labels);
        } catch (const Error&) {
            f1[idx] = std::nullopt;
        }
    });

    EvalReport report;
    report.model_name = model_name;
    report.algorithm = space.algorithm;
    report.folds.resize(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        auto& result = report.folds[f];
        result.fold_index = folds[f].fold_index;
        result.cells_evaluated = cells.size();
        std::optional<std::size_t> best;
        for (std::size_t c : ranked) {
            const auto& score = f1[f * cells.size() + c];
            if (!score) {
                ++result.cells_failed;
                continue;
            }
            if (!best || *score > *f1[f * cells.size() + *best]) best = c;
        }
        if (!best) {
            throw Error(ErrorCode::Internal, "every grid cell failed on fold " + std::to_string(f));
        }
        result.chosen = cells[*best];
        result.val_f1 = *f1[f * cells.size() + *best];
    }

    std::vector<ScoreConvention> conventions(folds.size());
    std::vector<TrainedModel> models(folds.size());
    parallel_for(folds.size(), [&](std::size_t f) {
        auto& result = report.folds[f];
        auto& model = models[f];
        model = train_classifier(data[f].train_val, result.chosen);
        const auto scores = predict_scores(model, data[f].test.features);
        conventions[f] = scores.convention;
        result.test_auc = macro_auc(scores, data[f].test.labels);
        result.test_macro_auc = result.test_auc.value;
    });
    report.convention = conventions.empty() ? ScoreConvention::DecisionOvr : conventions.front();
    for (const auto& fold : report.folds) {
        for (const auto& w : fold.test_auc.warnings) {
            report.warnings.push_back("fold " + std::to_string(fold.fold_index) + ": " + w);
        }
    }
    report.recompute_summary();
    if (models_out != nullptr) *models_out = std::move(models);
    return report;
}

LabeledDataset functional_dataset(std::span<const CallerGroup> groups, double variance_floor)
{
    const auto gaussians = [&] {
        std::vector<DiagonalGaussian> fitted(groups.size());
        parallel_for(groups.size(), [&](std::size_t i) { fitted[i] = fit_diag_gaussian(groups[i], variance_floor); });
        return fitted;
    }();
    LabeledDataset data;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        data.features.append_row(functional_vector(gaussians[i]).values);
        data.labels.push_back(groups[i].caller_id());
    }
    return data;
}

} // namespace callerspace
