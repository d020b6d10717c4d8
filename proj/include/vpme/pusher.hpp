#pragma once

// Kick-drift-kick leapfrog for the characteristics dX/ds = V, dV/ds = E(X),
// with per-particle accumulation of ∫|E| ds using the kick values.

#include <concepts>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"
#include "mesh.hpp"
#include "parallel.hpp"
#include "phase_space.hpp"

namespace vpme {

struct TimeSpec {
    double dt = 0.005;
    double t_end = 1.0;
    int checkpoint_every = 100;

    void validate() const {
        if (!(dt > 0.0)) throw InvalidArgument("dt must be > 0");
        if (!(t_end >= dt)) throw InvalidArgument("t_end must be >= dt");
        if (checkpoint_every < 1) throw InvalidArgument("checkpoint_every must be >= 1");
    }

    long steps() const { return std::lround(t_end / dt); }
};

/// v += (dt/2) E(x) and I += (dt/2) |E(x)| for every particle.
template <class Force>
void half_kick(ParticleEnsemble& e, Force&& force, double dt, const ExecutionPolicy& policy = {}) {
    const double half = 0.5 * dt;
    parallel_chunks(e.size(), policy, [&](unsigned, std::size_t b, std::size_t end) {
        for (std::size_t p = b; p < end; ++p) {
            const Vec3 f = force(e.positions[p]);
            e.velocities[p] += f * half;
            e.field_integral[p] += half * norm(f);
        }
    });
}

inline void drift(ParticleEnsemble& e, double dt, const ExecutionPolicy& policy = {}) {
    parallel_chunks(e.size(), policy, [&](unsigned, std::size_t b, std::size_t end) {
        for (std::size_t p = b; p < end; ++p) e.positions[p] += e.velocities[p] * dt;
    });
}

/// One full KDK step under a frozen force field.
template <class Force>
    requires std::invocable<Force&, const Vec3&>
void step(ParticleEnsemble& e, Force&& force, double dt, const ExecutionPolicy& policy = {}) {
    half_kick(e, force, dt, policy);
    drift(e, dt, policy);
    half_kick(e, force, dt, policy);
}

/// Force functor sampling a grid field with the CIC kernel.
inline auto grid_force(const VectorField& E) {
    return [&E](const Vec3& x) { return interpolate(E, x); };
}

inline void step(ParticleEnsemble& e, const VectorField& E, double dt, const ExecutionPolicy& policy = {}) {
    step(e, grid_force(E), dt, policy);
}

struct StabilityReport {
    bool ok = true;
    std::vector<std::string> advisories;
};

/// Advisory only: flags dt·max|v| > h/2 or dt²·max|∂E| > 0.1.
inline StabilityReport stability_check(double max_speed, double max_field_gradient, double h, double dt) {
    StabilityReport r;
    if (dt * max_speed > 0.5 * h) {
        r.ok = false;
        r.advisories.push_back("dt*max|v| = " + std::to_string(dt * max_speed) + " exceeds h/2 = " +
                               std::to_string(0.5 * h));
    }
    if (dt * dt * max_field_gradient > 0.1) {
        r.ok = false;
        r.advisories.push_back("dt^2*max|grad E| = " + std::to_string(dt * dt * max_field_gradient) +
                               " exceeds 0.1");
    }
    return r;
}

/// Largest |∂_a E_b| over interior nodes, central differences.
inline double max_field_gradient(const VectorField& E) {
    const GridSpec& g = E.grid;
    const int N = g.nodes;
    const double inv2h = 1.0 / (2.0 * g.spacing());
    double m = 0.0;
    for (int k = 1; k < N - 1; ++k)
        for (int j = 1; j < N - 1; ++j)
            for (int i = 1; i < N - 1; ++i) {
                const Vec3 d[3] = {E(i + 1, j, k) - E(i - 1, j, k), E(i, j + 1, k) - E(i, j - 1, k),
                                   E(i, j, k + 1) - E(i, j, k - 1)};
                for (const auto& v : d)
                    m = std::max({m, std::abs(v.x) * inv2h, std::abs(v.y) * inv2h, std::abs(v.z) * inv2h});
            }
    return m;
}

inline double max_speed(const ParticleEnsemble& e) {
    double m = 0.0;
    for (const auto& v : e.velocities) m = std::max(m, norm(v));
    return m;
}

inline StabilityReport stability_check(const ParticleEnsemble& e, const VectorField& E, double dt) {
    return stability_check(max_speed(e), max_field_gradient(E), E.grid.spacing(), dt);
}

}  // namespace vpme
