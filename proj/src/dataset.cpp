#include "callerspace/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "callerspace/error.hpp"

namespace callerspace {

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const
{
    Matrix out(indices.size(), cols);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto src = row(indices[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

void Matrix::append_row(std::span<const double> values)
{
    if (rows == 0 && cols == 0) {
        cols = values.size();
    }
    if (values.size() != cols) {
        throw Error(ErrorCode::DimensionMismatch,
                    "row of length " + std::to_string(values.size()) + " for matrix with " + std::to_string(cols) +
                        " columns");
    }
    data.insert(data.end(), values.begin(), values.end());
    ++rows;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const
{
    LabeledDataset out;
    out.features = features.select_rows(indices);
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        out.labels.push_back(labels[i]);
    }
    return out;
}

std::vector<int> LabeledDataset::classes() const
{
    std::set<int> distinct(labels.begin(), labels.end());
    return {distinct.begin(), distinct.end()};
}

void LabeledDataset::validate_for_training() const
{
    if (features.rows != labels.size()) {
        throw Error(ErrorCode::DimensionMismatch, "feature rows and labels differ in length");
    }
    if (features.cols == 0) {
        throw Error(ErrorCode::DimensionMismatch, "dataset has no features");
    }
    for (double v : features.data) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::NonFiniteValue, "non-finite feature value");
        }
    }
    if (classes().size() < 2) {
        throw Error(ErrorCode::SingleClass, "training data contains fewer than two classes");
    }
}

Standardizer Standardizer::fit(const Matrix& features)
{
    Standardizer s;
    s.mean.assign(features.cols, 0.0);
    s.scale.assign(features.cols, 1.0);
    if (features.rows == 0) {
        return s;
    }
    const double n = static_cast<double>(features.rows);
    for (std::size_t i = 0; i < features.rows; ++i) {
        for (std::size_t j = 0; j < features.cols; ++j) {
            s.mean[j] += features(i, j);
        }
    }
    for (double& m : s.mean) {
        m /= n;
    }
    std::vector<double> ss(features.cols, 0.0);
    for (std::size_t i = 0; i < features.rows; ++i) {
        for (std::size_t j = 0; j < features.cols; ++j) {
            const double d = features(i, j) - s.mean[j];
            ss[j] += d * d;
        }
    }
    for (std::size_t j = 0; j < features.cols; ++j) {
        const double sd = std::sqrt(ss[j] / n);
        // Constant columns pass through centred but unscaled.
        s.scale[j] = sd > 0.0 ? sd : 1.0;
    }
    return s;
}

Matrix Standardizer::transform(const Matrix& features) const
{
    if (features.cols != mean.size()) {
        throw Error(ErrorCode::DimensionMismatch, "standardizer fitted on " + std::to_string(mean.size()) +
                                                      " columns, got " + std::to_string(features.cols));
    }
    Matrix out = features;
    for (std::size_t i = 0; i < out.rows; ++i) {
        for (std::size_t j = 0; j < out.cols; ++j) {
            out(i, j) = (out(i, j) - mean[j]) / scale[j];
        }
    }
    return out;
}

} // namespace callerspace
