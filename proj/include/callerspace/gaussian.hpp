#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "callerspace/grouping.hpp"

namespace callerspace {

inline constexpr double kDefaultVarianceFloor = 1e-6;

/// Normal distribution with diagonal covariance.
struct DiagonalGaussian {
    std::vector<double> mean;
    std::vector<double> variance;
    std::size_t sample_count = 0;

    std::size_t dim() const { return mean.size(); }
    bool operator==(const DiagonalGaussian&) const = default;
};

/// Per-dimension sample mean and unbiased (n-1) variance of a row-major
/// n x dim block, variance clamped below at variance_floor.
DiagonalGaussian fit_diag_gaussian(std::span<const float> rows, std::size_t dim,
                                   double variance_floor = kDefaultVarianceFloor);
DiagonalGaussian fit_diag_gaussian(const CallerGroup& group, double variance_floor = kDefaultVarianceFloor);

/// D_KL(f || g) for diagonal Gaussians. Non-negative; asymmetric.
double kl_divergence(const DiagonalGaussian& f, const DiagonalGaussian& g);

/// Bhattacharyya distance; symmetric bit-for-bit.
double bhattacharyya(const DiagonalGaussian& f, const DiagonalGaussian& g);

enum class DistanceMeasure { Kl, Bhattacharyya };
std::string_view to_string(DistanceMeasure measure);
DistanceMeasure parse_measure(std::string_view text);

struct CallerGaussians {
    std::uint16_t caller_id = 0;
    std::vector<DiagonalGaussian> gaussians;
};

/// Fits one Gaussian per group and collects them by caller (ascending id,
/// group order preserved).
std::vector<CallerGaussians> fit_caller_gaussians(std::span<const CallerGroup> groups,
                                                  double variance_floor = kDefaultVarianceFloor);

struct DistanceCell {
    std::uint16_t caller_a = 0;
    std::uint16_t caller_b = 0;
    double mean = 0.0;
    /// Sample standard deviation (n-1).
    double std = 0.0;
    std::size_t count = 0;
    /// Only filled when raw distances are retained.
    std::vector<double> raw;
};

/// Caller x caller aggregate of pairwise group distances. Diagonal cells
/// aggregate the C(G,2) unordered intra-caller pairs (KL symmetrized per
/// pair); off-diagonal cell (a, b) aggregates the G_a * G_b pairs f in a,
/// g in b, using D(f || g) for KL, so the KL matrix may be asymmetric.
struct DistanceMatrixReport {
    DistanceMeasure measure = DistanceMeasure::Kl;
    std::vector<std::uint16_t> callers;
    /// callers.size()^2 cells, row-major over (caller_a, caller_b).
    std::vector<DistanceCell> cells;

    const DistanceCell& cell(std::size_t row, std::size_t col) const { return cells[row * callers.size() + col]; }
};

DistanceMatrixReport distance_matrix(std::span<const CallerGaussians> callers, DistanceMeasure measure,
                                     bool retain_raw = false);

/// Mean followed by variance, length 2d.
struct FunctionalVector {
    std::vector<double> values;
    std::uint16_t caller_id = 0;
    Split split = Split::Train;
    std::uint32_t group_index = 0;
};

FunctionalVector functional_vector(const DiagonalGaussian& gauss, std::uint16_t caller_id = 0,
                                   Split split = Split::Train, std::uint32_t group_index = 0);

/// Inverse of functional_vector; sample_count is not recoverable and is 0.
DiagonalGaussian gaussian_from_functional(std::span<const double> values);

} // namespace callerspace
