#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "error.hpp"
#include "vec3.hpp"

namespace vpme {

/// Normalized spatial density n(x) used for the ion initial positions and for
/// the electron background g. A gaussian of width w is n ∝ exp(-|x-c|²/w²),
/// i.e. per-axis standard deviation w/√2.
struct SpatialProfile {
    enum class Kind { gaussian, uniform_ball };

    Kind kind = Kind::gaussian;
    Vec3 center{};
    double width = 1.0;  // gaussian width or ball radius

    void validate() const {
        if (!(width > 0.0) || !std::isfinite(width))
            throw InvalidArgument("spatial profile width/radius must be positive, got " +
                                  std::to_string(width));
    }

    /// Continuous density, integrates to 1 over R³.
    double density(const Vec3& x) const {
        const Vec3 d = x - center;
        const double r2 = dot(d, d);
        if (kind == Kind::gaussian) {
            const double w2 = width * width;
            return std::exp(-r2 / w2) / (std::pow(std::numbers::pi, 1.5) * width * w2);
        }
        return r2 <= width * width ? ball_value() : 0.0;
    }

    double ball_value() const { return 3.0 / (4.0 * std::numbers::pi * width * width * width); }

    /// Mass of the profile lying outside the box [-L, L]³.
    double mass_outside_box(double half_width) const {
        if (kind == Kind::uniform_ball) {
            for (int a = 0; a < 3; ++a)
                if (std::abs(center[a]) + width > half_width) return 1.0;  // conservative
            return 0.0;
        }
        double inside = 1.0;
        for (int a = 0; a < 3; ++a) {
            const double lo = (-half_width - center[a]) / width;
            const double hi = (half_width - center[a]) / width;
            inside *= 0.5 * (std::erf(hi) - std::erf(lo));
        }
        return 1.0 - inside;
    }
};

inline const char* to_string(SpatialProfile::Kind k) {
    return k == SpatialProfile::Kind::gaussian ? "gaussian" : "uniform_ball";
}

}  // namespace vpme
