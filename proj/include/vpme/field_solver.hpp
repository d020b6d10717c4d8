#pragma once

// Nonlinear electrostatics ε² ΔU = g e^U - ρ, solved through the splitting
// U = Ū + Û with
//   -ε² Δ Ū = ρ            (linear, ion Coulomb part)
//    ε² Δ Û = g e^{Ū+Û}    (convex, electron correction; Û < 0)
// Both are discretized with the 7-point Laplacian on the interior nodes and
// monopole Dirichlet data on the boundary nodes.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "mesh.hpp"
#include "poisson.hpp"

namespace vpme {

struct FieldSolverOptions {
    double linear_tolerance = 1e-10;     // relative residual of each inner CG solve
    double newton_tolerance = 1e-10;     // times max(1, ‖g e^U‖∞)
    int max_newton_iterations = 200;
    int max_backtracks = 60;
    double continuation_threshold = 0.2;  // ε below which the 2ε ladder engages
};

struct FieldSolution {
    ScalarField U, Ubar, Uhat;
    VectorField E, Ebar, Ehat;
    int newton_iterations = 0;
    double final_residual_inf = 0.0;
    double residual_tolerance = 0.0;
    double gauss_imbalance = 0.0;
    double epsilon = 0.0;
    std::vector<double> residual_history;  // sup-norm residual before each accepted Newton step, then final

    explicit FieldSolution(const GridSpec& g) : U(g), Ubar(g), Uhat(g), E(g), Ebar(g), Ehat(g) {}
};

struct UhatResult {
    ScalarField uhat;
    int iterations = 0;
    double residual_inf = 0.0;
    double tolerance = 0.0;
    std::vector<double> residual_history;
};

/// Mass-weighted centre and total Σ f h³ of a nonnegative grid function.
struct Monopole {
    double mass = 0.0;
    Vec3 center{};
};

inline Monopole monopole_of(const ScalarField& f) {
    const GridSpec& g = f.grid;
    const int N = g.nodes;
    Monopole m;
    Vec3 first{};
    for (int k = 0; k < N; ++k)
        for (int j = 0; j < N; ++j)
            for (int i = 0; i < N; ++i) {
                const double v = f(i, j, k);
                m.mass += v;
                first += g.node_position(i, j, k) * v;
            }
    if (m.mass > 0.0) m.center = first * (1.0 / m.mass);
    m.mass *= g.cell_volume();
    return m;
}

/// E = -∇U: central differences inside, one-sided second order on the boundary faces.
inline VectorField negative_gradient(const ScalarField& u) {
    const GridSpec& g = u.grid;
    const int N = g.nodes;
    const double inv2h = 1.0 / (2.0 * g.spacing());
    VectorField e(g);
    for (int k = 0; k < N; ++k)
        for (int j = 0; j < N; ++j)
            for (int i = 0; i < N; ++i) {
                int idx[3] = {i, j, k};
                Vec3 grad{};
                for (int a = 0; a < 3; ++a) {
                    auto at = [&](int off) {
                        int q[3] = {idx[0], idx[1], idx[2]};
                        q[a] += off;
                        return u(q[0], q[1], q[2]);
                    };
                    if (idx[a] == 0)
                        grad[a] = (-3.0 * at(0) + 4.0 * at(1) - at(2)) * inv2h;
                    else if (idx[a] == N - 1)
                        grad[a] = (3.0 * at(0) - 4.0 * at(-1) + at(-2)) * inv2h;
                    else
                        grad[a] = (at(1) - at(-1)) * inv2h;
                }
                e(i, j, k) = -grad;
            }
    return e;
}

/// Σ_interior Δ_h U h³, evaluated as the boundary flux h Σ (U_b - U_i) over
/// interior/boundary neighbour pairs.
inline double boundary_flux(const ScalarField& u) {
    const GridSpec& g = u.grid;
    const int N = g.nodes;
    double s = 0.0;
    for (int k = 1; k < N - 1; ++k)
        for (int j = 1; j < N - 1; ++j)
            for (int i = 1; i < N - 1; ++i) {
                const int idx[3] = {i, j, k};
                for (int a = 0; a < 3; ++a)
                    for (int off : {-1, 1}) {
                        int q[3] = {idx[0], idx[1], idx[2]};
                        q[a] += off;
                        if (g.is_boundary(q[0], q[1], q[2])) s += u(q[0], q[1], q[2]) - u(i, j, k);
                    }
            }
    return s * g.spacing();
}

/// Discrete L^p norms of g e^U for p ∈ {1, 2, 3, ∞}; key 0 holds p = ∞.
inline std::map<int, double> electron_density_norms(const ScalarField& u, const ScalarField& g) {
    const double vol = g.grid.cell_volume();
    double s1 = 0.0, s2 = 0.0, s3 = 0.0, sinf = 0.0;
    for (std::size_t n = 0; n < g.values.size(); ++n) {
        const double v = std::abs(g.values[n] * std::exp(u.values[n]));
        s1 += v;
        s2 += v * v;
        s3 += v * v * v;
        sinf = std::max(sinf, v);
    }
    return {{1, s1 * vol}, {2, std::sqrt(s2 * vol)}, {3, std::cbrt(s3 * vol)}, {0, sinf}};
}

/// max over nodes of |Ê|.
inline double ehat_sup(const FieldSolution& s) { return s.Ehat.max_norm(); }

class FieldSolver {
public:
    explicit FieldSolver(const GridSpec& grid, FieldSolverOptions opts = {})
        : grid_(grid), opts_(opts), poisson_(grid) {}

    const GridSpec& grid() const { return grid_; }
    const FieldSolverOptions& options() const { return opts_; }

    /// -ε² Δ_h Ū = ρ with Ū = M/(4π ε² |x - x_c|) on the boundary.
    ScalarField solve_ubar(const ScalarField& rho, double eps) {
        check_eps(eps);
        const Monopole mono = monopole_of(rho);
        ScalarField ubar(grid_);
        if (mono.mass == 0.0) return ubar;
        set_monopole_boundary(ubar, mono.mass / (eps * eps), mono.center);
        std::vector<double> b(rho.values);
        add_boundary_coupling(ubar, eps * eps, b);
        std::vector<double> x(grid_.node_count(), 0.0);
        solve_shifted_laplacian(poisson_, eps * eps, {}, b, x, opts_.linear_tolerance);
        copy_interior(x, ubar);
        return ubar;
    }

    /// Damped Newton for ε² Δ_h Û = g e^{Ū+Û} with boundary data
    /// Û = -m̂/(4π ε² |x - x_c|), m̂ = Σ g e^{Ū+Û} h³.
    ///
    /// m̂ is refreshed from the current iterate at the start of every outer
    /// iteration. Inside an iteration the boundary moves with the linearized
    /// mass change δm, obtained from a bordered system reduced to two symmetric
    /// solves with the Jacobian ε² Δ_h - diag(g e^U).
    UhatResult solve_uhat(const ScalarField& ubar, const ScalarField& g, double eps,
                          std::optional<Vec3> center = std::nullopt,
                          const ScalarField* initial_guess = nullptr) {
        check_eps(eps);
        const Vec3 xc = center ? *center : monopole_of(g).center;
        const double eps2 = eps * eps;
        const double vol = grid_.cell_volume();
        const std::size_t n = grid_.node_count();
        UhatResult out{ScalarField(grid_)};
        ScalarField& uhat = out.uhat;
        if (initial_guess) uhat.values = initial_guess->values;

        // Boundary profile per unit m̂ and its coupling into the interior rows.
        ScalarField unit_bc(grid_);
        set_monopole_boundary(unit_bc, -1.0 / eps2, xc);
        std::vector<double> coupling(n, 0.0);
        add_boundary_coupling(unit_bc, eps2, coupling);

        std::vector<double> c(n), F(n), d0(n), d1(n, 0.0), scratch(n);
        ScalarField trial(grid_);
        for (int it = 0;; ++it) {
            double mhat = electron_mass(ubar, uhat, g);
            set_boundary(uhat, unit_bc, mhat);
            double scale = 1.0;
            const double r = residual(ubar, uhat, g, eps2, F, &scale);
            const double tol = opts_.newton_tolerance * std::max(1.0, scale);
            if (!std::isfinite(r))
                throw SolverError("Newton residual is not finite; use epsilon-continuation or a closer initial guess", r);
            out.residual_history.push_back(r);
            if (r <= tol) {
                out.iterations = it;
                out.residual_inf = r;
                out.tolerance = tol;
                return out;
            }
            if (it >= opts_.max_newton_iterations)
                throw SolverError("Newton iteration cap reached; try epsilon-continuation", r);

            // A = -J = -ε²Δ_h + diag(c). Interior step δ = d0 + δm·d1 with
            // A d0 = F, A d1 = coupling, δm = Σ c δ h³ (+ boundary terms ≈ 0).
            for (std::size_t m = 0; m < n; ++m) c[m] = g.values[m] * std::exp(ubar.values[m] + uhat.values[m]);
            std::fill(d0.begin(), d0.end(), 0.0);
            solve_shifted_laplacian(poisson_, eps2, c, F, d0, opts_.linear_tolerance);
            solve_shifted_laplacian(poisson_, eps2, c, coupling, d1, opts_.linear_tolerance);
            const double w0 = interior_dot(grid_, c, d0) * vol;
            const double w1 = interior_dot(grid_, c, d1) * vol;
            const double dm = w1 < 1.0 ? w0 / (1.0 - w1) : 0.0;
            for (std::size_t m = 0; m < n; ++m) d0[m] += dm * d1[m];

            double lambda = 1.0;
            bool accepted = false;
            trial.values = uhat.values;
            for (int bt = 0; bt <= opts_.max_backtracks; ++bt, lambda *= 0.5) {
                for (std::size_t m = 0; m < n; ++m) trial.values[m] = uhat.values[m] + lambda * d0[m];
                set_boundary(trial, unit_bc, mhat + lambda * dm);
                const double rt = residual(ubar, trial, g, eps2, scratch, nullptr);
                if (rt < r) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted)
                throw SolverError("Newton stagnated: no residual decrease under backtracking; use epsilon-continuation", r);
            std::swap(uhat.values, trial.values);
        }
    }

    /// Full solve. `u_guess` (previous total potential) seeds Newton with
    /// Û = u_guess - Ū; without it, small ε triggers the 2ε continuation ladder.
    FieldSolution solve(const ScalarField& rho, const ScalarField& g, double eps,
                        const ScalarField* u_guess = nullptr) {
        check_eps(eps);
        const Monopole mono = monopole_of(rho);
        FieldSolution sol(grid_);
        sol.epsilon = eps;
        sol.Ubar = solve_ubar(rho, eps);

        std::optional<ScalarField> guess;
        if (u_guess) {
            guess.emplace(grid_);
            for (std::size_t m = 0; m < guess->values.size(); ++m)
                guess->values[m] = u_guess->values[m] - sol.Ubar.values[m];
        } else if (eps < opts_.continuation_threshold) {
            const FieldSolution coarse = solve(rho, g, 2.0 * eps);
            guess.emplace(grid_);
            for (std::size_t m = 0; m < guess->values.size(); ++m)
                guess->values[m] = coarse.U.values[m] - sol.Ubar.values[m];
        }

        UhatResult uh = solve_uhat(sol.Ubar, g, eps, mono.center, guess ? &*guess : nullptr);
        sol.Uhat = std::move(uh.uhat);
        sol.newton_iterations = uh.iterations;
        sol.final_residual_inf = uh.residual_inf;
        sol.residual_tolerance = uh.tolerance;
        sol.residual_history = std::move(uh.residual_history);

        for (std::size_t m = 0; m < sol.U.values.size(); ++m)
            sol.U.values[m] = sol.Ubar.values[m] + sol.Uhat.values[m];
        sol.Ebar = negative_gradient(sol.Ubar);
        sol.Ehat = negative_gradient(sol.Uhat);
        sol.E = negative_gradient(sol.U);
        sol.gauss_imbalance = gauss_imbalance(sol.U, g, rho, eps);
        return sol;
    }

    /// ε² · (boundary flux of ∇U) - Σ_interior (g e^U - ρ) h³.
    static double gauss_imbalance(const ScalarField& u, const ScalarField& g, const ScalarField& rho, double eps) {
        const GridSpec& gr = u.grid;
        const int N = gr.nodes;
        double src = 0.0;
        for (int k = 1; k < N - 1; ++k)
            for (int j = 1; j < N - 1; ++j)
                for (int i = 1; i < N - 1; ++i) src += g(i, j, k) * std::exp(u(i, j, k)) - rho(i, j, k);
        return eps * eps * boundary_flux(u) - src * gr.cell_volume();
    }

private:
    static void check_eps(double eps) {
        if (!(eps > 0.0)) throw InvalidArgument("epsilon must be > 0, got " + std::to_string(eps));
    }

    // Boundary nodes get coeff/(4π|x - xc|).
    void set_monopole_boundary(ScalarField& f, double coeff, const Vec3& xc) const {
        const int N = grid_.nodes;
        for (int k = 0; k < N; ++k)
            for (int j = 0; j < N; ++j)
                for (int i = 0; i < N; ++i)
                    if (grid_.is_boundary(i, j, k))
                        f(i, j, k) = coeff / (4.0 * std::numbers::pi * norm(grid_.node_position(i, j, k) - xc));
    }

    // Boundary nodes of f get scale · unit; interior untouched.
    void set_boundary(ScalarField& f, const ScalarField& unit, double scale) const {
        const int N = grid_.nodes;
        for (int k = 0; k < N; ++k)
            for (int j = 0; j < N; ++j)
                for (int i = 0; i < N; ++i)
                    if (grid_.is_boundary(i, j, k)) f(i, j, k) = scale * unit(i, j, k);
    }

    // b += ε²/h² Σ (boundary neighbours of f) at interior nodes.
    void add_boundary_coupling(const ScalarField& f, double eps2, std::vector<double>& b) const {
        const int N = grid_.nodes;
        const double h = grid_.spacing();
        const double a = eps2 / (h * h);
        for (int k = 1; k < N - 1; ++k)
            for (int j = 1; j < N - 1; ++j)
                for (int i = 1; i < N - 1; ++i) {
                    if (i > 1 && i < N - 2 && j > 1 && j < N - 2 && k > 1 && k < N - 2) continue;
                    const int idx[3] = {i, j, k};
                    double s = 0.0;
                    for (int ax = 0; ax < 3; ++ax)
                        for (int off : {-1, 1}) {
                            int q[3] = {idx[0], idx[1], idx[2]};
                            q[ax] += off;
                            if (grid_.is_boundary(q[0], q[1], q[2])) s += f(q[0], q[1], q[2]);
                        }
                    b[grid_.index(i, j, k)] += a * s;
                }
    }

    void copy_interior(const std::vector<double>& x, ScalarField& f) const {
        const int N = grid_.nodes;
        for (int k = 1; k < N - 1; ++k)
            for (int j = 1; j < N - 1; ++j)
                for (int i = 1; i < N - 1; ++i) f(i, j, k) = x[grid_.index(i, j, k)];
    }

    double electron_mass(const ScalarField& ubar, const ScalarField& uhat, const ScalarField& g) const {
        double s = 0.0;
        for (std::size_t m = 0; m < g.values.size(); ++m) s += g.values[m] * std::exp(ubar.values[m] + uhat.values[m]);
        return s * grid_.cell_volume();
    }

    // F = ε² Δ_h Û - g e^{Ū+Û} on interior nodes (zero on the boundary);
    // returns ‖F‖∞ and optionally ‖g e^{Ū+Û}‖∞ over the interior.
    double residual(const ScalarField& ubar, const ScalarField& uhat, const ScalarField& g, double eps2,
                    std::vector<double>& F, double* electron_sup) const {
        const int N = grid_.nodes;
        const double h = grid_.spacing();
        const double a = eps2 / (h * h);
        const std::size_t sy = static_cast<std::size_t>(N), sz = sy * N;
        const auto& u = uhat.values;
        std::fill(F.begin(), F.end(), 0.0);
        double rmax = 0.0, emax = 0.0;
        for (int k = 1; k < N - 1; ++k)
            for (int j = 1; j < N - 1; ++j) {
                const std::size_t row = grid_.index(0, j, k);
                for (int i = 1; i < N - 1; ++i) {
                    const std::size_t m = row + i;
                    const double lap = u[m - 1] + u[m + 1] + u[m - sy] + u[m + sy] + u[m - sz] + u[m + sz] - 6.0 * u[m];
                    const double ne = g.values[m] * std::exp(ubar.values[m] + u[m]);
                    F[m] = a * lap - ne;
                    if (std::isnan(F[m])) return F[m];
                    rmax = std::max(rmax, std::abs(F[m]));
                    emax = std::max(emax, ne);
                }
            }
        if (electron_sup) *electron_sup = emax;
        return rmax;
    }

    GridSpec grid_;
    FieldSolverOptions opts_;
    SinePoissonSolver poisson_;
};

/// One-shot conveniences over a temporary FieldSolver.
inline ScalarField solve_ubar(const ScalarField& rho, double eps) { return FieldSolver(rho.grid).solve_ubar(rho, eps); }

inline UhatResult solve_uhat(const ScalarField& ubar, const ScalarField& g, double eps) {
    return FieldSolver(g.grid).solve_uhat(ubar, g, eps);
}

inline FieldSolution solve_field(const ScalarField& rho, const ScalarField& g, double eps) {
    return FieldSolver(rho.grid).solve(rho, g, eps);
}

}  // namespace vpme
