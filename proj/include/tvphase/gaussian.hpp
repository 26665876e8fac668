#pragma once

#include <cmath>
#include <numbers>

namespace tvphase {

/// Standard normal density.
inline double normal_pdf(double z)
{
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

/// Upper tail P(g > z) of the standard normal, via erfc so that large z keeps
/// full relative precision.
inline double normal_q(double z)
{
    return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

} // namespace tvphase
