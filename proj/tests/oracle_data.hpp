#pragma once

// Fixed problems and reference optima computed offline by generic convex
// solvers (tools/oracles/*.py). The data generators below must stay in sync
// with those scripts.

#include <cmath>
#include <vector>

#include "callerspace/classifier.hpp"

namespace oracle {

struct BinaryProblem {
    callerspace::Matrix x;
    std::vector<int> y;
};

/// 40 points in 2-D, labels from a noisy product rule (not linearly separable).
inline BinaryProblem smo_problem()
{
    BinaryProblem p;
    p.x = callerspace::Matrix(40, 2);
    for (int i = 0; i < 40; ++i) {
        const double a = std::sin(0.7 * (i + 1)) + 0.3 * std::cos(2.1 * i);
        const double b = std::cos(0.45 * (i + 1)) + 0.2 * std::sin(1.7 * i);
        p.x(i, 0) = a;
        p.x(i, 1) = b;
        p.y.push_back(a * b + 0.15 * std::sin(3.0 * i) > 0 ? 1 : -1);
    }
    return p;
}

struct SmoCase {
    callerspace::KernelType kernel;
    double gamma;
    double c;
    double objective;
};

inline const SmoCase kSmoCases[] = {
    {callerspace::KernelType::Rbf, 0.5, 1.0, -16.706871975522127},
    {callerspace::KernelType::Rbf, 2.0, 10.0, -62.82290512700007},
    {callerspace::KernelType::Linear, 0.0, 0.5, -17.999999999999353},
    {callerspace::KernelType::Polynomial, 0.5, 1.0, -35.122457931790535},
};

/// 50 x 4 design with a noisy linear labelling rule.
inline BinaryProblem lsvm_problem()
{
    BinaryProblem p;
    p.x = callerspace::Matrix(50, 4);
    for (int i = 0; i < 50; ++i) {
        for (int j = 0; j < 4; ++j) p.x(i, j) = std::sin(0.37 * (i + 1) * (j + 1)) + 0.5 * std::cos(1.3 * (i + 1) + j);
        const double s = p.x(i, 0) + 0.5 * p.x(i, 1) - 0.3 * p.x(i, 2) + 0.2 * std::sin(5.0 * i);
        p.y.push_back(s > 0 ? 1 : -1);
    }
    return p;
}

struct LsvmCase {
    double c;
    double objective;
};

inline const LsvmCase kLsvmCases[] = {
    {1.0, 6.409569371013158},
    {0.1, 1.6719092739017742},
    {10.0, 18.94563338094961},
};

} // namespace oracle
