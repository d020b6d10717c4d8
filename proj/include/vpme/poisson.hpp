#pragma once

// Linear elliptic solves on the interior nodes of a GridSpec:
//   (-ε² Δ_h + diag(c)) u = b,  u = 0 on the boundary nodes,
// with Δ_h the 7-point Laplacian. Solved by conjugate gradients preconditioned
// with the exact inverse of -ε² Δ_h (type-I sine transforms, FFTW RODFT00).

#include <fftw3.h>

#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "mesh.hpp"

namespace vpme {

namespace detail {

// FFTW's planner is not re-entrant.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace detail

/// Exact solver for -ε² Δ_h u = r with homogeneous Dirichlet data: a 2D
/// sine transform over the (y, z) planes diagonalizes the operator up to a
/// constant-coefficient tridiagonal system along x, solved per mode.
class SinePoissonSolver {
public:
    explicit SinePoissonSolver(const GridSpec& grid) : grid_(grid), n_(grid.nodes - 2) {
        grid.validate();
        const std::size_t plane = static_cast<std::size_t>(n_) * n_;
        const std::size_t m = plane * n_;
        buffer_.reset(fftw_alloc_real(m));
        if (!buffer_) throw std::bad_alloc();
        {
            std::lock_guard lock(detail::fftw_planner_mutex());
            int dims[2] = {n_, n_};
            fftw_r2r_kind kinds[2] = {FFTW_RODFT00, FFTW_RODFT00};
            plan_ = fftw_plan_many_r2r(2, dims, n_, buffer_.get(), nullptr, 1, static_cast<int>(plane),
                                       buffer_.get(), nullptr, 1, static_cast<int>(plane), kinds, FFTW_ESTIMATE);
        }
        if (!plan_) throw std::runtime_error("FFTW failed to create a sine-transform plan");

        const double h = grid.spacing();
        std::vector<double> eig(n_);
        for (int q = 0; q < n_; ++q) {
            const double s = std::sin(std::numbers::pi * (q + 1) / (2.0 * (n_ + 1)));
            eig[q] = 4.0 * s * s / (h * h);
        }
        // Thomas factors for (2/h² + λ_k + λ_j) u_i - (u_{i-1} + u_{i+1})/h², per mode (k, j).
        const double off = -1.0 / (h * h);
        cprime_.resize(m);
        inv_den_.resize(m);
        for (std::size_t mode = 0; mode < plane; ++mode) {
            const double d = 2.0 / (h * h) + eig[mode / n_] + eig[mode % n_];
            double cp = 0.0;
            for (int i = 0; i < n_; ++i) {
                const double den = d - (i ? off * cp : 0.0);
                cp = off / den;
                cprime_[i * plane + mode] = cp;
                inv_den_[i * plane + mode] = 1.0 / den;
            }
        }
    }

    SinePoissonSolver(const SinePoissonSolver&) = delete;
    SinePoissonSolver& operator=(const SinePoissonSolver&) = delete;

    ~SinePoissonSolver() {
        if (plan_) {
            std::lock_guard lock(detail::fftw_planner_mutex());
            fftw_destroy_plan(plan_);
        }
    }

    /// out = (-ε² Δ_h)^{-1} in on interior nodes; boundary entries of out are zeroed.
    void apply(std::span<const double> in, std::span<double> out, double eps2) {
        const int N = grid_.nodes;
        const std::size_t plane = static_cast<std::size_t>(n_) * n_;
        double* buf = buffer_.get();
        // buffer layout: x slowest, then z, then y
        for (int i = 1; i < N - 1; ++i)
            for (int k = 1; k < N - 1; ++k)
                for (int j = 1; j < N - 1; ++j)
                    buf[((i - 1) * n_ + (k - 1)) * static_cast<std::size_t>(n_) + (j - 1)] = in[grid_.index(i, j, k)];
        fftw_execute(plan_);

        const double norm = 2.0 * (n_ + 1);
        const double scale = 1.0 / (eps2 * norm * norm);
        const double off = -1.0 / (grid_.spacing() * grid_.spacing());
        for (std::size_t mode = 0; mode < plane; ++mode) buf[mode] *= scale * inv_den_[mode];
        for (int i = 1; i < n_; ++i) {
            double* row = buf + i * plane;
            const double* prev = row - plane;
            const double* inv = inv_den_.data() + i * plane;
            for (std::size_t mode = 0; mode < plane; ++mode) row[mode] = (row[mode] * scale - off * prev[mode]) * inv[mode];
        }
        for (int i = n_ - 2; i >= 0; --i) {
            double* row = buf + i * plane;
            const double* next = row + plane;
            const double* cp = cprime_.data() + i * plane;
            for (std::size_t mode = 0; mode < plane; ++mode) row[mode] -= cp[mode] * next[mode];
        }

        fftw_execute(plan_);
        std::fill(out.begin(), out.end(), 0.0);
        for (int i = 1; i < N - 1; ++i)
            for (int k = 1; k < N - 1; ++k)
                for (int j = 1; j < N - 1; ++j)
                    out[grid_.index(i, j, k)] = buf[((i - 1) * n_ + (k - 1)) * static_cast<std::size_t>(n_) + (j - 1)];
    }

    const GridSpec& grid() const { return grid_; }

private:
    struct FftwFree {
        void operator()(double* p) const { fftw_free(p); }
    };

    GridSpec grid_;
    int n_;
    std::unique_ptr<double, FftwFree> buffer_;
    fftw_plan plan_ = nullptr;
    std::vector<double> cprime_, inv_den_;
};

/// y = (-ε² Δ_h + diag(c)) x on interior nodes. Boundary entries of x must be
/// zero; boundary entries of y are set to zero. `c` may be empty.
inline void apply_shifted_laplacian(const GridSpec& g, double eps2, std::span<const double> c,
                                    std::span<const double> x, std::span<double> y) {
    const int N = g.nodes;
    const double h = g.spacing();
    const double a = eps2 / (h * h);
    const std::size_t sy = static_cast<std::size_t>(N), sz = sy * N;
    std::fill(y.begin(), y.end(), 0.0);
    for (int k = 1; k < N - 1; ++k)
        for (int j = 1; j < N - 1; ++j) {
            const std::size_t row = g.index(0, j, k);
            for (int i = 1; i < N - 1; ++i) {
                const std::size_t n = row + i;
                const double nb = x[n - 1] + x[n + 1] + x[n - sy] + x[n + sy] + x[n - sz] + x[n + sz];
                y[n] = a * (6.0 * x[n] - nb) + (c.empty() ? 0.0 : c[n] * x[n]);
            }
        }
}

/// Zeroes the boundary nodes of a grid vector.
inline void zero_boundary(const GridSpec& g, std::span<double> x) {
    const int N = g.nodes;
    for (int k = 0; k < N; ++k)
        for (int j = 0; j < N; ++j)
            for (int i = 0; i < N; ++i)
                if (g.is_boundary(i, j, k)) x[g.index(i, j, k)] = 0.0;
}

/// Σ over interior nodes of x·y.
inline double interior_dot(const GridSpec& g, std::span<const double> x, std::span<const double> y) {
    const int N = g.nodes;
    double s = 0.0;
    for (int k = 1; k < N - 1; ++k)
        for (int j = 1; j < N - 1; ++j) {
            const std::size_t row = g.index(0, j, k);
            for (int i = 1; i < N - 1; ++i) s += x[row + i] * y[row + i];
        }
    return s;
}

struct CgResult {
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Preconditioned CG for (-ε² Δ_h + diag(c)) x = b on the interior. `x` holds
/// the initial guess and receives the solution; its boundary entries are zeroed.
inline CgResult solve_shifted_laplacian(SinePoissonSolver& precond, double eps2, std::span<const double> c,
                                        std::span<const double> b, std::span<double> x, double rel_tol,
                                        int max_iterations = 1000) {
    const GridSpec& g = precond.grid();
    const std::size_t n = g.node_count();
    const double bnorm = std::sqrt(interior_dot(g, b, b));
    if (bnorm == 0.0) {
        std::fill(x.begin(), x.end(), 0.0);
        return {};
    }
    std::vector<double> r(n), z(n), p(n), ap(n);
    zero_boundary(g, x);
    apply_shifted_laplacian(g, eps2, c, x, ap);
    for (std::size_t m = 0; m < n; ++m) r[m] = b[m] - ap[m];
    zero_boundary(g, r);
    double rnorm = std::sqrt(interior_dot(g, r, r));
    CgResult res;
    if (rnorm <= rel_tol * bnorm) {
        res.relative_residual = rnorm / bnorm;
        return res;
    }
    precond.apply(r, z, eps2);
    p = z;
    double rz = interior_dot(g, r, z);
    for (int it = 1; it <= max_iterations; ++it) {
        apply_shifted_laplacian(g, eps2, c, p, ap);
        const double alpha = rz / interior_dot(g, p, ap);
        for (std::size_t m = 0; m < n; ++m) {
            x[m] += alpha * p[m];
            r[m] -= alpha * ap[m];
        }
        rnorm = std::sqrt(interior_dot(g, r, r));
        if (!std::isfinite(rnorm)) throw SolverError("linear solve diverged (non-finite residual)", rnorm / bnorm);
        if (rnorm <= rel_tol * bnorm) return {it, rnorm / bnorm};
        precond.apply(r, z, eps2);
        const double rz_next = interior_dot(g, r, z);
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t m = 0; m < n; ++m) p[m] = z[m] + beta * p[m];
    }
    throw SolverError("linear solve did not reach relative residual " + std::to_string(rel_tol) + " in " +
                          std::to_string(max_iterations) + " iterations",
                      rnorm / bnorm);
}

}  // namespace vpme
