#pragma once

#include <cmath>
#include <cstdint>

namespace stormcast {

// The target transform: unit counts are modeled on the log(x+1) scale.
inline double log1p_units(std::int64_t units) {
    return std::log1p(static_cast<double>(units));
}

// Inverse transform with the non-negativity clamp: exp(x)-1 can go below
// zero for negative log-scale predictions, but a unit count cannot.
inline double expm1_pred(double log_pred) {
    const double u = std::expm1(log_pred);
    return u < 0.0 ? 0.0 : u;
}

} // namespace stormcast
