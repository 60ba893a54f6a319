#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "callerspace/classifier.hpp"
#include "callerspace/error.hpp"
#include "callerspace/parallel.hpp"

namespace callerspace {

double KernelSpec::operator()(std::span<const double> a, std::span<const double> b) const
{
    switch (type) {
    case KernelType::Linear: {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    }
    case KernelType::Rbf: {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            s += d * d;
        }
        return std::exp(-gamma * s);
    }
    case KernelType::Polynomial: {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return std::pow(gamma * s + coef0, degree);
    }
    }
    return 0.0;
}

double resolve_gamma(GammaMode mode, const Matrix& features)
{
    const double n_features = static_cast<double>(features.cols);
    if (mode == GammaMode::Auto || features.data.empty()) {
        return 1.0 / n_features;
    }
    double mean = 0.0;
    for (double v : features.data) mean += v;
    mean /= static_cast<double>(features.data.size());
    double var = 0.0;
    for (double v : features.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(features.data.size());
    return var > 0.0 ? 1.0 / (n_features * var) : 1.0;
}

double svm_dual_objective(const Matrix& kernel, std::span<const int> y, std::span<const double> alpha)
{
    double quad = 0.0;
    double lin = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        lin += alpha[i];
        if (alpha[i] == 0.0) continue;
        for (std::size_t j = 0; j < alpha.size(); ++j) {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * kernel(i, j);
        }
    }
    return 0.5 * quad - lin;
}

SmoResult solve_smo(const Matrix& kernel, std::span<const int> y, double c, double tolerance, long max_iterations)
{
    const std::size_t n = y.size();
    if (kernel.rows != n || kernel.cols != n) {
        throw Error(ErrorCode::DimensionMismatch, "kernel matrix does not match labels");
    }
    if (!(c > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "C must be positive");
    }
    constexpr double kTau = 1e-12;
    SmoResult result;
    auto& alpha = result.alpha;
    alpha.assign(n, 0.0);
    // Gradient of the dual objective: G = Q alpha - e.
    std::vector<double> grad(n, -1.0);

    auto in_up = [&](std::size_t t) { return (y[t] == 1 && alpha[t] < c) || (y[t] == -1 && alpha[t] > 0.0); };
    auto in_low = [&](std::size_t t) { return (y[t] == -1 && alpha[t] < c) || (y[t] == 1 && alpha[t] > 0.0); };

    long iter = 0;
    for (; iter < max_iterations; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity();
        double gmin = std::numeric_limits<double>::infinity();
        std::size_t i = n;
        std::size_t j = n;
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -y[t] * grad[t];
            if (in_up(t) && v > gmax) {
                gmax = v;
                i = t;
            }
            if (in_low(t) && v < gmin) {
                gmin = v;
                j = t;
            }
        }
        if (i == n || j == n || gmax - gmin < tolerance) {
            result.converged = true;
            break;
        }

        const double old_i = alpha[i];
        const double old_j = alpha[j];
        if (y[i] != y[j]) {
            double quad = kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if (alpha[i] < 0.0) {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }

        const double di = alpha[i] - old_i;
        const double dj = alpha[j] - old_j;
        for (std::size_t t = 0; t < n; ++t) {
            grad[t] += y[t] * (y[i] * kernel(i, t) * di + y[j] * kernel(j, t) * dj);
        }
    }
    result.iterations = static_cast<int>(std::min<long>(iter, std::numeric_limits<int>::max()));

    // rho: average of y*G over free variables, else midpoint of the bounds.
    double upper = std::numeric_limits<double>::infinity();
    double lower = -std::numeric_limits<double>::infinity();
    double free_sum = 0.0;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (alpha[t] >= c) {
            if (y[t] == -1) upper = std::min(upper, yg);
            else lower = std::max(lower, yg);
        } else if (alpha[t] <= 0.0) {
            if (y[t] == 1) upper = std::min(upper, yg);
            else lower = std::max(lower, yg);
        } else {
            ++free_count;
            free_sum += yg;
        }
    }
    result.rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : 0.5 * (upper + lower);

    double obj = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        obj += alpha[t] * (grad[t] - 1.0);
    }
    result.objective = 0.5 * obj;
    return result;
}

TrainedModel train_svm(const LabeledDataset& data, const ClassifierConfig& config)
{
    data.validate_for_training();
    const auto& params = std::get<SvmParams>(config.params);

    TrainedModel model;
    model.config = config;
    model.classes = data.classes();
    model.convention = ScoreConvention::DecisionOvo;
    model.num_features = data.features.cols;

    KernelSvmModel svm;
    svm.kernel.type = params.kernel;
    svm.kernel.gamma = resolve_gamma(params.gamma, data.features);
    svm.kernel.degree = params.degree;
    svm.kernel.coef0 = params.coef0;

    const std::size_t k = model.classes.size();
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto cls = std::lower_bound(model.classes.begin(), model.classes.end(), data.labels[i]) -
                         model.classes.begin();
        members[static_cast<std::size_t>(cls)].push_back(i);
    }

    std::vector<std::pair<int, int>> pairs;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            pairs.emplace_back(static_cast<int>(a), static_cast<int>(b));
        }
    }

    struct PairFit {
        std::vector<std::size_t> rows;
        std::vector<double> coefficients;
        double rho = 0.0;
        bool converged = true;
    };
    std::vector<PairFit> fits(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t p) {
        const auto [a, b] = pairs[p];
        std::vector<std::size_t> rows = members[static_cast<std::size_t>(a)];
        rows.insert(rows.end(), members[static_cast<std::size_t>(b)].begin(),
                    members[static_cast<std::size_t>(b)].end());
        std::vector<int> y(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            y[i] = i < members[static_cast<std::size_t>(a)].size() ? 1 : -1;
        }
        Matrix gram(rows.size(), rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t j = i; j < rows.size(); ++j) {
                const double v = svm.kernel(data.features.row(rows[i]), data.features.row(rows[j]));
                if (!std::isfinite(v)) {
                    throw Error(ErrorCode::KernelNumericalError, "non-finite kernel value");
                }
                gram(i, j) = v;
                gram(j, i) = v;
            }
        }
        const auto smo = solve_smo(gram, y, params.c, params.tolerance);
        PairFit& fit = fits[p];
        fit.rho = smo.rho;
        fit.converged = smo.converged;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (smo.alpha[i] > 0.0) {
                fit.rows.push_back(rows[i]);
                fit.coefficients.push_back(smo.alpha[i] * y[i]);
            }
        }
    });

    std::map<std::size_t, std::uint32_t> support_slot;
    for (const auto& fit : fits) {
        for (std::size_t row : fit.rows) {
            support_slot.emplace(row, 0);
        }
    }
    svm.support = Matrix(support_slot.size(), data.features.cols);
    std::uint32_t next = 0;
    for (auto& [row, slot] : support_slot) {
        slot = next;
        const auto src = data.features.row(row);
        std::copy(src.begin(), src.end(), svm.support.row(next).begin());
        ++next;
    }
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        PairMachine machine;
        machine.first = pairs[p].first;
        machine.second = pairs[p].second;
        machine.rho = fits[p].rho;
        machine.converged = fits[p].converged;
        machine.coefficients = fits[p].coefficients;
        for (std::size_t row : fits[p].rows) {
            machine.support_index.push_back(support_slot.at(row));
        }
        svm.machines.push_back(std::move(machine));
    }
    model.parameters = std::move(svm);
    return model;
}

} // namespace callerspace
