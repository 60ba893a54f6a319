#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace callerspace {

/// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    std::span<double> row(std::size_t i) { return std::span<double>(data).subspan(i * cols, cols); }
    std::span<const double> row(std::size_t i) const { return std::span<const double>(data).subspan(i * cols, cols); }
    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    /// Rows selected by index, in the given order.
    Matrix select_rows(std::span<const std::size_t> indices) const;
    void append_row(std::span<const double> values);

    bool operator==(const Matrix&) const = default;
};

/// Feature rows with one integer class label per row.
struct LabeledDataset {
    Matrix features;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    LabeledDataset subset(std::span<const std::size_t> indices) const;
    /// Distinct labels, ascending.
    std::vector<int> classes() const;
    /// Throws unless shapes agree, values are finite and at least two
    /// classes are present.
    void validate_for_training() const;
};

/// Per-column z-scoring fitted on training rows only.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const Matrix& features);
    Matrix transform(const Matrix& features) const;
    bool empty() const { return mean.empty(); }
    bool operator==(const Standardizer&) const = default;
};

} // namespace callerspace
