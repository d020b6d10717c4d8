#pragma once

// Particle representation of the ion distribution f and the initial-data
// families it is sampled from.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "profile.hpp"
#include "vec3.hpp"

namespace vpme {

enum class VelocityLaw {
    maxwellian,  ///< isotropic gaussian, per-component std sigma
    power_law,   ///< radial law ∝ s²/(1+s)^r on [0, v_max], |v| = velocity_scale·s
    cold,        ///< all particles at rest
};

inline const char* to_string(VelocityLaw k) {
    switch (k) {
        case VelocityLaw::maxwellian: return "maxwellian";
        case VelocityLaw::power_law: return "power_law";
        case VelocityLaw::cold: return "cold";
    }
    return "?";
}

struct InitialDistributionSpec {
    VelocityLaw kind = VelocityLaw::maxwellian;
    SpatialProfile spatial{};
    double sigma = 1.0;
    double r = 4.0;
    double v_max = 20.0;
    double velocity_scale = 1.0;
    double m1 = 2.5;

    void validate() const {
        spatial.validate();
        if (kind == VelocityLaw::maxwellian && !(sigma > 0.0))
            throw InvalidArgument("maxwellian sigma must be > 0, got " + std::to_string(sigma));
        if (kind == VelocityLaw::power_law) {
            if (!(r > 3.0))
                throw InvalidArgument("power-law exponent r must be > 3, got " + std::to_string(r));
            if (!(v_max > 0.0) || !std::isfinite(v_max))
                throw InvalidArgument("power-law cutoff v_max must be finite and > 0");
            if (!(velocity_scale > 0.0))
                throw InvalidArgument("power-law velocity_scale must be > 0");
        }
        if (!(m1 > 2.0))
            throw InvalidArgument("moment exponent m1 must be > 2, got " + std::to_string(m1));
    }
};

/// Phase-space particles. Velocities are synchronized with positions between
/// steps; `initial_velocities` is the t=0 snapshot used for Q*.
struct ParticleEnsemble {
    std::vector<Vec3> positions;
    std::vector<Vec3> velocities;
    std::vector<double> weights;
    std::vector<Vec3> initial_velocities;
    std::vector<double> field_integral;                     // ∫₀ᵗ |E(s, X_p(s))| ds
    std::vector<std::vector<double>> checkpoint_integrals;  // one column per checkpoint
    double escaped_mass = 0.0;

    /// Builds an ensemble from explicit state. Weights must be positive.
    static ParticleEnsemble from_state(std::vector<Vec3> x, std::vector<Vec3> v, std::vector<double> w) {
        if (x.empty()) throw InvalidArgument("particle ensemble must not be empty");
        if (x.size() != v.size() || x.size() != w.size())
            throw InvalidArgument("particle arrays must have equal length");
        for (double wi : w)
            if (!(wi > 0.0)) throw InvalidArgument("particle weights must be strictly positive");
        ParticleEnsemble e;
        e.positions = std::move(x);
        e.velocities = std::move(v);
        e.weights = std::move(w);
        e.initial_velocities = e.velocities;
        e.field_integral.assign(e.positions.size(), 0.0);
        return e;
    }

    std::size_t size() const { return positions.size(); }

    double total_weight() const {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }

    /// Saves the current field integrals as a new checkpoint column.
    void checkpoint() { checkpoint_integrals.push_back(field_integral); }
};

namespace detail {

// Antiderivative of (u-1)² u^{-r}; valid for r ∉ {1, 2, 3}.
inline double power_law_primitive(double u, double r) {
    return std::pow(u, 3.0 - r) / (3.0 - r) - 2.0 * std::pow(u, 2.0 - r) / (2.0 - r) +
           std::pow(u, 1.0 - r) / (1.0 - r);
}

}  // namespace detail

/// Normalized CDF of the radial speed law ∝ s²/(1+s)^r on [0, s_max].
inline double power_law_radial_cdf(double s, double r, double s_max) {
    if (s <= 0.0) return 0.0;
    if (s >= s_max) return 1.0;
    const double g0 = detail::power_law_primitive(1.0, r);
    return (detail::power_law_primitive(1.0 + s, r) - g0) /
           (detail::power_law_primitive(1.0 + s_max, r) - g0);
}

inline double power_law_radial_inverse_cdf(double u, double r, double s_max) {
    double lo = 0.0, hi = s_max;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * s_max; ++it) {
        const double mid = 0.5 * (lo + hi);
        (power_law_radial_cdf(mid, r, s_max) < u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

namespace detail {

inline Vec3 sample_position(const SpatialProfile& p, std::mt19937_64& rng) {
    if (p.kind == SpatialProfile::Kind::gaussian) {
        std::normal_distribution<double> n(0.0, p.width / std::numbers::sqrt2);
        const double a = n(rng), b = n(rng), c = n(rng);
        return p.center + Vec3{a, b, c};
    }
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (;;) {
        Vec3 d{u(rng), u(rng), u(rng)};
        if (dot(d, d) <= 1.0) return p.center + d * p.width;
    }
}

inline Vec3 random_direction(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double cz = 2.0 * u(rng) - 1.0;
    const double phi = 2.0 * std::numbers::pi * u(rng);
    const double sz = std::sqrt(std::max(0.0, 1.0 - cz * cz));
    return {sz * std::cos(phi), sz * std::sin(phi), cz};
}

inline Vec3 sample_velocity(const InitialDistributionSpec& spec, std::mt19937_64& rng) {
    switch (spec.kind) {
        case VelocityLaw::maxwellian: {
            std::normal_distribution<double> n(0.0, spec.sigma);
            const double a = n(rng), b = n(rng), c = n(rng);
            return {a, b, c};
        }
        case VelocityLaw::power_law: {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            const double s = power_law_radial_inverse_cdf(u(rng), spec.r, spec.v_max);
            return random_direction(rng) * (spec.velocity_scale * s);
        }
        case VelocityLaw::cold: return {};
    }
    return {};
}

}  // namespace detail

/// Draws `count` equal-weight particles; a pure function of (spec, count, seed).
inline ParticleEnsemble sample_initial(const InitialDistributionSpec& spec, std::size_t count, std::uint64_t seed) {
    spec.validate();
    if (count == 0) throw InvalidArgument("particle count must be >= 1");
    std::mt19937_64 rng(seed);
    std::vector<Vec3> x(count), v(count);
    for (std::size_t p = 0; p < count; ++p) {
        x[p] = detail::sample_position(spec.spatial, rng);
        v[p] = detail::sample_velocity(spec, rng);
    }
    return ParticleEnsemble::from_state(std::move(x), std::move(v),
                                        std::vector<double>(count, 1.0 / static_cast<double>(count)));
}

/// Σ_p w_p |v_p|^k at the current time.
inline double instantaneous_moment(const ParticleEnsemble& e, double k) {
    if (k < 0.0) throw InvalidArgument("moment order must be >= 0");
    double s = 0.0;
    for (std::size_t p = 0; p < e.size(); ++p) s += e.weights[p] * std::pow(norm(e.velocities[p]), k);
    return s;
}

/// Same as instantaneous_moment but over the t=0 velocity snapshot.
inline double initial_moment(const ParticleEnsemble& e, double k) {
    double s = 0.0;
    for (std::size_t p = 0; p < e.size(); ++p) s += e.weights[p] * std::pow(norm(e.initial_velocities[p]), k);
    return s;
}

/// Realized velocity deviation max_p |v_p - v_p(0)|.
inline double q_star(const ParticleEnsemble& e) {
    double m = 0.0;
    for (std::size_t p = 0; p < e.size(); ++p) m = std::max(m, norm(e.velocities[p] - e.initial_velocities[p]));
    return m;
}

/// Q(t,t): max_p ∫₀ᵗ |E| ds.
inline double q_tt(const ParticleEnsemble& e) {
    return e.field_integral.empty() ? 0.0 : *std::max_element(e.field_integral.begin(), e.field_integral.end());
}

/// Q over the window between two checkpoints: max_p (I_p[end] - I_p[start]).
inline double q_windowed(const ParticleEnsemble& e, std::size_t start, std::size_t end) {
    const auto& cols = e.checkpoint_integrals;
    if (start > end || end >= cols.size())
        throw InvalidArgument("checkpoint window [" + std::to_string(start) + ", " + std::to_string(end) +
                              "] out of range (" + std::to_string(cols.size()) + " checkpoints)");
    double m = 0.0;
    for (std::size_t p = 0; p < e.size(); ++p) m = std::max(m, cols[end][p] - cols[start][p]);
    return m;
}

}  // namespace vpme
