#pragma once

#include <span>

#include "mtboost/kernels.hpp"

namespace mtboost {

inline double sum_squared_error(std::span<const double> y, std::span<const double> f) {
    return kernels::sum_sq_diff(y, f);
}

inline double mean_squared_error(std::span<const double> y, std::span<const double> f) {
    return y.empty() ? 0.0 : kernels::sum_sq_diff(y, f) / static_cast<double>(y.size());
}

}  // namespace mtboost
