#pragma once

#include <span>

#include "callerspace/classifier.hpp"

namespace callerspace::detail {

/// Normalized per-class vote margins of a boosted ensemble.
void adaboost_scores(const AdaBoostModel& boost, std::size_t k, std::span<const double> x, std::span<double> out);

} // namespace callerspace::detail
