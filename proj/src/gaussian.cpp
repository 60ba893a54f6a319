#include "callerspace/gaussian.hpp"

#include <algorithm>
#include <cmath>

#include "callerspace/error.hpp"
#include "callerspace/parallel.hpp"

namespace callerspace {

DiagonalGaussian fit_diag_gaussian(std::span<const float> rows, std::size_t dim, double variance_floor)
{
    if (dim == 0 || rows.size() % dim != 0) {
        throw Error(ErrorCode::DimensionMismatch, "row block is not a multiple of the dimension");
    }
    if (!(variance_floor > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "variance floor must be positive");
    }
    const std::size_t n = rows.size() / dim;
    if (n < 2) {
        throw Error(ErrorCode::TooFewSamples, "need at least 2 samples, got " + std::to_string(n));
    }
    DiagonalGaussian g;
    g.sample_count = n;
    g.mean.assign(dim, 0.0);
    g.variance.assign(dim, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            g.mean[j] += rows[i * dim + j];
        }
    }
    for (double& m : g.mean) {
        m /= static_cast<double>(n);
    }
    // Two-pass variance.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = rows[i * dim + j] - g.mean[j];
            g.variance[j] += d * d;
        }
    }
    for (double& v : g.variance) {
        v = std::max(v / static_cast<double>(n - 1), variance_floor);
    }
    return g;
}

DiagonalGaussian fit_diag_gaussian(const CallerGroup& group, double variance_floor)
{
    return fit_diag_gaussian(group.values(), group.dim(), variance_floor);
}

namespace {

void check_dims(const DiagonalGaussian& f, const DiagonalGaussian& g)
{
    if (f.dim() != g.dim() || f.variance.size() != f.dim() || g.variance.size() != g.dim()) {
        throw Error(ErrorCode::DimensionMismatch,
                    "gaussian dimensions " + std::to_string(f.dim()) + " and " + std::to_string(g.dim()));
    }
}

} // namespace

double kl_divergence(const DiagonalGaussian& f, const DiagonalGaussian& g)
{
    check_dims(f, g);
    double sum = 0.0;
    for (std::size_t i = 0; i < f.dim(); ++i) {
        const double ratio = f.variance[i] / g.variance[i];
        const double diff = f.mean[i] - g.mean[i];
        // ratio - 1 - ln(ratio) >= 0 termwise, which keeps the total non-negative.
        sum += (ratio - 1.0 - std::log(ratio)) + diff * diff / g.variance[i];
    }
    return 0.5 * sum;
}

double bhattacharyya(const DiagonalGaussian& f, const DiagonalGaussian& g)
{
    check_dims(f, g);
    double mahalanobis = 0.0;
    double log_term = 0.0;
    for (std::size_t i = 0; i < f.dim(); ++i) {
        const double avg = 0.5 * (f.variance[i] + g.variance[i]);
        const double diff = f.mean[i] - g.mean[i];
        mahalanobis += diff * diff / avg;
        // Log space so a product of tiny variances cannot underflow.
        log_term += std::log(avg) - 0.5 * (std::log(f.variance[i]) + std::log(g.variance[i]));
    }
    return 0.125 * mahalanobis + 0.5 * log_term;
}

std::string_view to_string(DistanceMeasure measure)
{
    return measure == DistanceMeasure::Kl ? "kl" : "bc";
}

DistanceMeasure parse_measure(std::string_view text)
{
    if (text == "kl") return DistanceMeasure::Kl;
    if (text == "bc" || text == "bhattacharyya") return DistanceMeasure::Bhattacharyya;
    throw Error(ErrorCode::InvalidArgument, "unknown measure '" + std::string(text) + "'");
}

std::vector<CallerGaussians> fit_caller_gaussians(std::span<const CallerGroup> groups, double variance_floor)
{
    std::vector<DiagonalGaussian> fitted(groups.size());
    parallel_for(groups.size(), [&](std::size_t i) { fitted[i] = fit_diag_gaussian(groups[i], variance_floor); });

    std::map<std::uint16_t, std::vector<DiagonalGaussian>> by_caller;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        by_caller[groups[i].caller_id()].push_back(std::move(fitted[i]));
    }
    std::vector<CallerGaussians> out;
    for (auto& [caller, gaussians] : by_caller) {
        out.push_back({caller, std::move(gaussians)});
    }
    return out;
}

namespace {

void summarize(std::vector<double>& values, DistanceCell& cell, bool retain_raw)
{
    cell.count = values.size();
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    cell.mean = values.empty() ? 0.0 : sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) {
        ss += (v - cell.mean) * (v - cell.mean);
    }
    cell.std = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
    if (retain_raw) {
        cell.raw = std::move(values);
    }
}

} // namespace

DistanceMatrixReport distance_matrix(std::span<const CallerGaussians> callers, DistanceMeasure measure,
                                     bool retain_raw)
{
    for (const auto& c : callers) {
        if (c.gaussians.size() < 2) {
            throw Error(ErrorCode::TooFewGroups, "caller " + std::to_string(c.caller_id) + " has fewer than 2 groups");
        }
    }
    DistanceMatrixReport report;
    report.measure = measure;
    const std::size_t k = callers.size();
    for (const auto& c : callers) {
        report.callers.push_back(c.caller_id);
    }
    report.cells.resize(k * k);

    // Every cell is computed independently in a fixed order.
    parallel_for(k * k, [&](std::size_t idx) {
        const std::size_t a = idx / k;
        const std::size_t b = idx % k;
        const auto& ga = callers[a].gaussians;
        const auto& gb = callers[b].gaussians;
        std::vector<double> values;
        if (a == b) {
            values.reserve(ga.size() * (ga.size() - 1) / 2);
            for (std::size_t i = 0; i < ga.size(); ++i) {
                for (std::size_t j = i + 1; j < ga.size(); ++j) {
                    if (measure == DistanceMeasure::Kl) {
                        values.push_back(0.5 * (kl_divergence(ga[i], ga[j]) + kl_divergence(ga[j], ga[i])));
                    } else {
                        values.push_back(bhattacharyya(ga[i], ga[j]));
                    }
                }
            }
        } else {
            values.reserve(ga.size() * gb.size());
            for (const auto& f : ga) {
                for (const auto& g : gb) {
                    values.push_back(measure == DistanceMeasure::Kl ? kl_divergence(f, g) : bhattacharyya(f, g));
                }
            }
        }
        auto& cell = report.cells[idx];
        cell.caller_a = callers[a].caller_id;
        cell.caller_b = callers[b].caller_id;
        summarize(values, cell, retain_raw);
    });
    return report;
}

FunctionalVector functional_vector(const DiagonalGaussian& gauss, std::uint16_t caller_id, Split split,
                                   std::uint32_t group_index)
{
    FunctionalVector fv;
    fv.values.reserve(2 * gauss.dim());
    fv.values.insert(fv.values.end(), gauss.mean.begin(), gauss.mean.end());
    fv.values.insert(fv.values.end(), gauss.variance.begin(), gauss.variance.end());
    fv.caller_id = caller_id;
    fv.split = split;
    fv.group_index = group_index;
    return fv;
}

DiagonalGaussian gaussian_from_functional(std::span<const double> values)
{
    if (values.size() % 2 != 0) {
        throw Error(ErrorCode::DimensionMismatch, "functional vector length must be even");
    }
    const std::size_t d = values.size() / 2;
    DiagonalGaussian g;
    g.mean.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(d));
    g.variance.assign(values.begin() + static_cast<std::ptrdiff_t>(d), values.end());
    return g;
}

} // namespace callerspace
