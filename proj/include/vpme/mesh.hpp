#pragma once

// Uniform node-centred cubic mesh on [-L, L]³ with cloud-in-cell (trilinear)
// particle/grid transfer.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"
#include "phase_space.hpp"
#include "profile.hpp"
#include "vec3.hpp"

namespace vpme {

struct GridSpec {
    double half_width = 4.0;
    int nodes = 48;

    void validate() const {
        if (!(half_width > 0.0)) throw InvalidArgument("grid half_width must be > 0");
        if (nodes < 8) throw InvalidArgument("grid needs at least 8 nodes per axis, got " + std::to_string(nodes));
    }

    double spacing() const { return 2.0 * half_width / (nodes - 1); }
    double cell_volume() const {
        const double h = spacing();
        return h * h * h;
    }
    std::size_t node_count() const {
        const auto n = static_cast<std::size_t>(nodes);
        return n * n * n;
    }
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * nodes + j) * nodes + i;
    }
    double coord(int i) const { return -half_width + i * spacing(); }
    Vec3 node_position(int i, int j, int k) const { return {coord(i), coord(j), coord(k)}; }
    bool is_boundary(int i, int j, int k) const {
        const int m = nodes - 1;
        return i == 0 || j == 0 || k == 0 || i == m || j == m || k == m;
    }
    bool contains(const Vec3& x) const {
        return std::abs(x.x) <= half_width && std::abs(x.y) <= half_width && std::abs(x.z) <= half_width;
    }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct ScalarField {
    GridSpec grid;
    std::vector<double> values;

    explicit ScalarField(const GridSpec& g, double fill = 0.0) : grid(g), values(g.node_count(), fill) {}

    double& operator()(int i, int j, int k) { return values[grid.index(i, j, k)]; }
    double operator()(int i, int j, int k) const { return values[grid.index(i, j, k)]; }

    double max_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
    double max() const { return *std::max_element(values.begin(), values.end()); }
    /// Σ values · h³ over all nodes.
    double integral() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * grid.cell_volume();
    }
};

struct VectorField {
    GridSpec grid;
    std::vector<Vec3> values;

    explicit VectorField(const GridSpec& g) : grid(g), values(g.node_count()) {}

    Vec3& operator()(int i, int j, int k) { return values[grid.index(i, j, k)]; }
    const Vec3& operator()(int i, int j, int k) const { return values[grid.index(i, j, k)]; }

    double max_norm() const {
        double m = 0.0;
        for (const auto& v : values) m = std::max(m, norm(v));
        return m;
    }
};

namespace detail {

struct CicStencil {
    int i, j, k;      // lower corner
    double w[3][2];   // per-axis weights of the lower and upper node
};

// Nullopt for positions outside the box. Offsets are taken from |x|/h about the
// box centre so that mirror-image positions get mirror-image weights bit for bit.
inline std::optional<CicStencil> cic_stencil(const GridSpec& g, const Vec3& x) {
    if (!g.contains(x)) return std::nullopt;
    const double h = g.spacing();
    const double mid = 0.5 * (g.nodes - 1);
    CicStencil s{};
    int* idx[3] = {&s.i, &s.j, &s.k};
    for (int a = 0; a < 3; ++a) {
        const double u = std::abs(x[a]) / h + mid;
        int c = std::min(static_cast<int>(std::floor(u)), g.nodes - 2);
        const double f = u - c;
        if (x[a] >= 0.0) {
            *idx[a] = c;
            s.w[a][0] = 1.0 - f;
            s.w[a][1] = f;
        } else {
            *idx[a] = g.nodes - 2 - c;
            s.w[a][0] = f;
            s.w[a][1] = 1.0 - f;
        }
    }
    return s;
}

template <class Fn>
inline void for_each_corner(const CicStencil& s, Fn&& fn) {
    for (int c = 0; c < 8; ++c) {
        const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
        fn(s.i + di, s.j + dj, s.k + dk, s.w[0][di] * s.w[1][dj] * s.w[2][dk]);
    }
}

// Deposits Σ_p q_p S(x - x_p)/h³ for a per-particle payload, chunk-parallel with
// private buffers merged in chunk order.
template <class T, class Payload>
std::vector<T> deposit(const ParticleEnsemble& e, const GridSpec& g, const ExecutionPolicy& policy,
                       Payload&& payload) {
    const double inv_vol = 1.0 / g.cell_volume();
    const unsigned chunks = policy.thread_count(e.size());
    std::vector<std::vector<T>> buffers(chunks, std::vector<T>(g.node_count(), T{}));
    parallel_chunks(e.size(), policy, [&](unsigned c, std::size_t b, std::size_t end) {
        auto& buf = buffers[c];
        for (std::size_t p = b; p < end; ++p) {
            const auto s = cic_stencil(g, e.positions[p]);
            if (!s) continue;
            const T q = payload(p);
            for_each_corner(*s, [&](int i, int j, int k, double w) { buf[g.index(i, j, k)] += q * (w * inv_vol); });
        }
    });
    for (unsigned c = 1; c < chunks; ++c)
        for (std::size_t n = 0; n < buffers[0].size(); ++n) buffers[0][n] += buffers[c][n];
    return std::move(buffers[0]);
}

}  // namespace detail

/// CIC charge density ρ. Out-of-box particles deposit nothing.
inline ScalarField deposit_density(const ParticleEnsemble& e, const GridSpec& g, const ExecutionPolicy& policy = {}) {
    ScalarField rho(g);
    rho.values = detail::deposit<double>(e, g, policy, [&](std::size_t p) { return e.weights[p]; });
    return rho;
}

/// CIC current density j = Σ w_p v_p S(x - x_p)/h³.
inline VectorField deposit_current(const ParticleEnsemble& e, const GridSpec& g, const ExecutionPolicy& policy = {}) {
    VectorField j(g);
    j.values = detail::deposit<Vec3>(e, g, policy, [&](std::size_t p) { return e.velocities[p] * e.weights[p]; });
    return j;
}

/// Total weight of particles outside [-L, L]³.
inline double out_of_box_weight(const ParticleEnsemble& e, const GridSpec& g) {
    double s = 0.0;
    for (std::size_t p = 0; p < e.size(); ++p)
        if (!g.contains(e.positions[p])) s += e.weights[p];
    return s;
}

/// Trilinear interpolation; zero outside the box.
inline Vec3 interpolate(const VectorField& f, const Vec3& x) {
    const auto s = detail::cic_stencil(f.grid, x);
    if (!s) return {};
    Vec3 out{};
    detail::for_each_corner(*s, [&](int i, int j, int k, double w) { out += f(i, j, k) * w; });
    return out;
}

inline double interpolate(const ScalarField& f, const Vec3& x) {
    const auto s = detail::cic_stencil(f.grid, x);
    if (!s) return 0.0;
    double out = 0.0;
    detail::for_each_corner(*s, [&](int i, int j, int k, double w) { out += f(i, j, k) * w; });
    return out;
}

/// Samples the background profile g on the grid and renormalizes Σ g h³ to 1.
/// Gaussians are point-sampled; balls use the volume fraction of each node's
/// control cell so that the discrete integral converges at second order.
inline ScalarField evaluate_g(const SpatialProfile& profile, const GridSpec& grid) {
    profile.validate();
    grid.validate();
    ScalarField g(grid);
    const double h = grid.spacing();
    const int n = grid.nodes;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const Vec3 x = grid.node_position(i, j, k);
                if (profile.kind == SpatialProfile::Kind::gaussian) {
                    g(i, j, k) = profile.density(x);
                    continue;
                }
                const Vec3 d = x - profile.center;
                const double half_diag = 0.5 * std::sqrt(3.0) * h;
                const double r = norm(d);
                if (r + half_diag <= profile.width) {
                    g(i, j, k) = profile.ball_value();
                } else if (r - half_diag > profile.width) {
                    g(i, j, k) = 0.0;
                } else {
                    constexpr int sub = 16;
                    int inside = 0;
                    for (int c = 0; c < sub; ++c)
                        for (int b = 0; b < sub; ++b)
                            for (int a = 0; a < sub; ++a) {
                                const Vec3 y = d + Vec3{(a + 0.5) / sub - 0.5, (b + 0.5) / sub - 0.5,
                                                        (c + 0.5) / sub - 0.5} * h;
                                inside += dot(y, y) <= profile.width * profile.width;
                            }
                    g(i, j, k) = profile.ball_value() * inside / double(sub * sub * sub);
                }
            }
    const double total = g.integral();
    if (!(total > 0.0)) throw InvalidArgument("background profile has no mass on the grid");
    for (double& v : g.values) v /= total;
    return g;
}

/// Warning text when more than 1e-6 of the profile's mass lies outside the box.
inline std::optional<std::string> background_warning(const SpatialProfile& profile, const GridSpec& grid) {
    const double out = profile.mass_outside_box(grid.half_width);
    if (out > 1e-6)
        return "background profile mass outside the box is " + std::to_string(out) + " (> 1e-6)";
    return std::nullopt;
}

}  // namespace vpme
