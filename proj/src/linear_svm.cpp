#include <algorithm>
#include <cmath>
#include <numeric>

#include "callerspace/classifier.hpp"
#include "callerspace/error.hpp"
#include "callerspace/parallel.hpp"

namespace callerspace {

namespace {

double dot_augmented(std::span<const double> w, std::span<const double> x)
{
    double s = w.back();
    for (std::size_t j = 0; j < x.size(); ++j) {
        s += w[j] * x[j];
    }
    return s;
}

} // namespace

double linear_svm_primal_objective(const Matrix& x, std::span<const int> y, std::span<const double> c,
                                   std::span<const double> weights, double bias)
{
    double reg = bias * bias;
    for (double w : weights) {
        reg += w * w;
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto row = x.row(i);
        double margin = bias;
        for (std::size_t j = 0; j < row.size(); ++j) {
            margin += weights[j] * row[j];
        }
        const double slack = std::max(0.0, 1.0 - y[i] * margin);
        loss += c[i] * slack * slack;
    }
    return 0.5 * reg + loss;
}

LinearBinaryResult solve_linear_svm_binary(const Matrix& x, std::span<const int> y, std::span<const double> c,
                                           int max_iter, double tolerance)
{
    const std::size_t n = x.rows;
    const std::size_t p = x.cols;
    if (y.size() != n || c.size() != n) {
        throw Error(ErrorCode::DimensionMismatch, "labels/costs do not match rows");
    }

    // Truncated Newton on the primal, which is smooth for the squared hinge.
    // The bias is treated as one more regularized weight on a constant 1.
    std::vector<double> w(p + 1, 0.0);
    std::vector<double> slack(n);
    auto objective_at = [&](std::span<const double> v) {
        double value = 0.0;
        for (double a : v) {
            value += a * a;
        }
        value *= 0.5;
        for (std::size_t i = 0; i < n; ++i) {
            const double s = std::max(0.0, 1.0 - y[i] * dot_augmented(v, x.row(i)));
            value += c[i] * s * s;
        }
        return value;
    };
    auto add_scaled_row = [&](std::vector<double>& out, std::size_t i, double scale) {
        const auto row = x.row(i);
        for (std::size_t j = 0; j < p; ++j) {
            out[j] += scale * row[j];
        }
        out[p] += scale;
    };

    LinearBinaryResult result;
    // Dual point from the KKT relation alpha_i = 2 c_i slack_i; the gap
    // between it and the primal bounds the distance to the optimum.
    auto gap_ok = [&] {
        std::vector<double> wa(p + 1, 0.0);
        double primal = 0.0;
        double dual = 0.0;
        for (double v : w) {
            primal += v * v;
        }
        primal *= 0.5;
        for (std::size_t i = 0; i < n; ++i) {
            const double alpha = 2.0 * c[i] * slack[i];
            primal += c[i] * slack[i] * slack[i];
            dual += alpha - 0.25 * alpha * alpha / c[i];
            if (alpha > 0.0) {
                add_scaled_row(wa, i, alpha * y[i]);
            }
        }
        double norm2 = 0.0;
        for (double v : wa) {
            norm2 += v * v;
        }
        result.primal_objective = primal;
        result.dual_objective = dual - 0.5 * norm2;
        return primal - result.dual_objective <= tolerance * std::max(std::abs(primal), 1e-300);
    };

    std::vector<double> grad(p + 1), dir(p + 1), resid(p + 1), conj(p + 1), hv(p + 1), trial(p + 1);
    std::vector<std::size_t> support;
    auto hessian_times = [&](const std::vector<double>& v, std::vector<double>& out) {
        out = v;
        for (std::size_t i : support) {
            add_scaled_row(out, i, 2.0 * c[i] * dot_augmented(v, x.row(i)));
        }
    };
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
    };

    double f = objective_at(w);
    for (int iter = 0; iter < max_iter; ++iter) {
        support.clear();
        grad = w;
        for (std::size_t i = 0; i < n; ++i) {
            slack[i] = std::max(0.0, 1.0 - y[i] * dot_augmented(w, x.row(i)));
            if (slack[i] > 0.0) {
                support.push_back(i);
                add_scaled_row(grad, i, -2.0 * c[i] * slack[i] * y[i]);
            }
        }
        if (gap_ok()) {
            result.converged = true;
            break;
        }
        result.iterations = iter + 1;

        // Conjugate gradient on H d = -g with the generalized Hessian.
        std::fill(dir.begin(), dir.end(), 0.0);
        for (std::size_t j = 0; j <= p; ++j) {
            resid[j] = -grad[j];
        }
        conj = resid;
        double rr = dot(resid, resid);
        const double cg_stop = 1e-4 * rr;
        for (std::size_t k = 0; k <= p && rr > cg_stop; ++k) {
            hessian_times(conj, hv);
            const double step = rr / dot(conj, hv);
            for (std::size_t j = 0; j <= p; ++j) {
                dir[j] += step * conj[j];
                resid[j] -= step * hv[j];
            }
            const double rr_next = dot(resid, resid);
            for (std::size_t j = 0; j <= p; ++j) {
                conj[j] = resid[j] + rr_next / rr * conj[j];
            }
            rr = rr_next;
        }

        // Backtracking line search with the Armijo condition.
        const double slope = dot(grad, dir);
        double t = 1.0;
        double f_trial = f;
        for (int halvings = 0; halvings < 60; ++halvings, t *= 0.5) {
            for (std::size_t j = 0; j <= p; ++j) {
                trial[j] = w[j] + t * dir[j];
            }
            f_trial = objective_at(trial);
            if (f_trial <= f + 0.01 * t * slope) {
                break;
            }
        }
        if (!(f_trial < f)) {
            break;
        }
        w = trial;
        f = f_trial;
    }
    result.bias = w[p];
    w.pop_back();
    result.weights = std::move(w);
    return result;
}

TrainedModel train_linear_svm(const LabeledDataset& data, const ClassifierConfig& config)
{
    data.validate_for_training();
    const auto& params = std::get<LinearSvmParams>(config.params);
    if (!(params.c > 0.0) || params.max_iter < 1) {
        throw Error(ErrorCode::InvalidArgument, "linear SVM needs C > 0 and max_iter >= 1");
    }

    TrainedModel model;
    model.config = config;
    model.classes = data.classes();
    model.convention = ScoreConvention::DecisionOvr;
    model.num_features = data.features.cols;

    const std::size_t k = model.classes.size();
    const std::size_t n = data.size();
    std::vector<std::size_t> class_index(n);
    std::vector<double> class_counts(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        class_index[i] = static_cast<std::size_t>(
            std::lower_bound(model.classes.begin(), model.classes.end(), data.labels[i]) - model.classes.begin());
        class_counts[class_index[i]] += 1.0;
    }
    // balanced: each sample weighted by n / (k * n_class).
    std::vector<double> costs(n, params.c);
    if (params.balanced) {
        for (std::size_t i = 0; i < n; ++i) {
            costs[i] = params.c * static_cast<double>(n) / (static_cast<double>(k) * class_counts[class_index[i]]);
        }
    }

    LinearSvmModel linear;
    linear.weights = Matrix(k, data.features.cols);
    linear.biases.assign(k, 0.0);
    std::vector<LinearBinaryResult> results(k);
    parallel_for(k, [&](std::size_t cls) {
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = class_index[i] == cls ? 1 : -1;
        }
        results[cls] = solve_linear_svm_binary(data.features, y, costs, params.max_iter, params.tolerance);
    });
    for (std::size_t cls = 0; cls < k; ++cls) {
        std::copy(results[cls].weights.begin(), results[cls].weights.end(), linear.weights.row(cls).begin());
        linear.biases[cls] = results[cls].bias;
        linear.converged = linear.converged && results[cls].converged;
    }
    model.parameters = std::move(linear);
    return model;
}

} // namespace callerspace
