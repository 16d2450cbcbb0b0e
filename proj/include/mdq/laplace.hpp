#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "mdq/error.hpp"

namespace mdq {

// Model probabilities never drop below the 16-bit coder resolution.
inline constexpr double kProbFloor = 1.0 / 65536.0;
inline constexpr double kScaleMin = 1e-3;
inline constexpr double kScaleMax = 1e3;

// P(lo <= Y < hi) for Y ~ Laplace(mu, b). Each branch differences
// exponentials on one side of mu, so tails keep relative precision and the
// result is exactly mirror-symmetric around mu.
inline double laplace_interval(double lo, double hi, double mu, double b) {
    const double a = lo - mu;
    const double c = hi - mu;
    if (a >= 0.0) return 0.5 * (std::exp(-a / b) - std::exp(-c / b));
    if (c <= 0.0) return 0.5 * (std::exp(c / b) - std::exp(a / b));
    return 1.0 - 0.5 * (std::exp(a / b) + std::exp(-c / b));
}

// Mass of integer bin [symbol - 0.5, symbol + 0.5), floored at kProbFloor.
inline double laplace_prob(std::int64_t symbol, double mu, double b) {
    if (!(b > 0.0)) fail(Errc::invalid_argument, "Laplace scale must be positive, got " + std::to_string(b));
    const double s = static_cast<double>(symbol);
    return std::max(laplace_interval(s - 0.5, s + 0.5, mu, b), kProbFloor);
}

// Interval mass and its partial derivatives with respect to the bin centre,
// the location and the scale; drives the training-time rate gradient.
struct LaplaceBin {
    double p;
    double dp_dcentre;
    double dp_dmu;
    double dp_db;
};

inline LaplaceBin laplace_bin(double centre, double mu, double b) {
    const double lo = centre - 0.5 - mu;
    const double hi = centre + 0.5 - mu;
    const double e_lo = std::exp(-std::abs(lo) / b);
    const double e_hi = std::exp(-std::abs(hi) / b);
    LaplaceBin r{};
    r.p = laplace_interval(centre - 0.5, centre + 0.5, mu, b);
    const double density_diff = (e_hi - e_lo) / (2.0 * b);
    r.dp_dcentre = density_diff;
    r.dp_dmu = -density_diff;
    r.dp_db = -(hi * e_hi - lo * e_lo) / (2.0 * b * b);
    return r;
}

// Positive scale from an unconstrained network output.
inline double scale_from_raw(double raw) {
    if (std::isnan(raw)) return kScaleMax;
    return std::clamp(std::exp(raw), kScaleMin, kScaleMax);
}

} // namespace mdq
