#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "odeident/numkernel.hpp"

namespace testing {

using odeident::Mat;
using odeident::Vec;

inline Mat random_matrix(std::mt19937_64& gen, int rows, int cols, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = u(gen);
    return m;
}

inline Vec random_vector(std::mt19937_64& gen, int n, double lo = -1.0, double hi = 1.0) {
    return random_matrix(gen, n, 1, lo, hi).col(0);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

inline double max_abs(const Mat& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace testing
