#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "callerspace/classifier.hpp"
#include "callerspace/gaussian.hpp"

namespace callerspace {

enum class FoldRole : std::uint8_t { Train = 0, Val = 1, Test = 2 };

/// Role of every pooled group in one fold.
struct FoldPlan {
    std::size_t fold_index = 0;
    std::uint64_t seed = 0;
    std::vector<FoldRole> roles;

    std::vector<std::size_t> members(FoldRole role) const;
};

/// Stratified k-fold over caller groups: each caller's groups are shuffled
/// with the seed and cut into k near-equal test shares (larger shares
/// first); the rest of each caller's groups splits 7:2 into fold-train and
/// fold-val, val receiving floor(2/9 of the rest), at least one.
std::vector<FoldPlan> make_folds(std::span<const std::uint16_t> group_callers, std::size_t k, std::uint64_t seed);
std::vector<FoldPlan> make_folds(std::span<const CallerGroup> groups, std::size_t k, std::uint64_t seed);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.5;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

/// ROC by sweeping thresholds over distinct scores, highest first; tied
/// scores form one step. auc is the trapezoidal area, computed in integer
/// units so it equals the normalized Mann-Whitney count exactly.
RocCurve roc_auc(std::span<const double> scores, std::span<const bool> positive);

/// Trapezoidal area of an arbitrary curve.
double trapezoid_area(std::span<const RocPoint> points);

struct MacroAuc {
    double value = 0.0;
    /// OvR: one entry per class. OvO: one per class pair. nullopt = skipped.
    std::vector<std::optional<double>> per_item;
    std::vector<std::string> item_names;
    std::vector<RocCurve> curves;
    std::vector<std::string> warnings;
};

/// Unweighted mean over classes of the class-vs-rest AUC of its score column.
MacroAuc macro_auc_ovr(const Matrix& scores, std::span<const int> labels, std::span<const int> classes);

/// Unweighted mean over class pairs; each pair averages its AUC with either
/// class taken as positive, using samples of the two classes only.
MacroAuc macro_auc_ovo(const Matrix& pair_scores, std::span<const std::pair<int, int>> pairs,
                       std::span<const int> labels, std::span<const int> classes);

/// Macro AUC under the convention recorded in the scores.
MacroAuc macro_auc(const ScoreMatrix& scores, std::span<const int> labels);

/// Unweighted mean of per-class F1 over the union of true and predicted labels.
double f1_macro(std::span<const int> predicted, std::span<const int> labels);

struct FoldResult {
    std::size_t fold_index = 0;
    ClassifierConfig chosen;
    double val_f1 = 0.0;
    std::size_t cells_evaluated = 0;
    std::size_t cells_failed = 0;
    double test_macro_auc = 0.0;
    MacroAuc test_auc;
};

struct EvalReport {
    std::string model_name;
    Algorithm algorithm = Algorithm::Svm;
    ScoreConvention convention = ScoreConvention::DecisionOvr;
    std::vector<FoldResult> folds;
    double mean_auc = 0.0;
    /// Population standard deviation over folds.
    double std_auc = 0.0;
    /// Per class (OvR) or class pair (OvO), averaged over folds where present.
    std::map<std::string, double> mean_item_auc;
    std::vector<std::string> warnings;

    void recompute_summary();
};

/// Grid search on each fold: every cell trains on fold-train and is scored
/// by F1-macro on fold-val; ties prefer the smaller C / ensemble size, then
/// the earlier cell. The winner is retrained on fold-train + fold-val and
/// evaluated on fold-test. Retrained fold models are moved into
/// models_out when it is given.
EvalReport grid_search(std::span<const FoldPlan> folds, const LabeledDataset& dataset, const SearchSpace& space,
                       std::uint64_t seed, const std::string& model_name = "",
                       std::vector<TrainedModel>* models_out = nullptr);

/// Functional vectors of the given groups as a labeled dataset (label = caller id).
LabeledDataset functional_dataset(std::span<const CallerGroup> groups, double variance_floor = kDefaultVarianceFloor);

} // namespace callerspace
