#pragma once

// Audits of the a priori inequalities on persisted time series:
//   m_k(t) ≤ 2^k (m_k(0) + Q*(t)^k)                 (exact per particle)
//   Q*(t) ≤ Q(t,t)
//   ‖ρ(t)‖∞ ≤ C (1 + Q*(t)³)                          (bounded-constant gate)
//   Q(T,T) ≤ C e^{c ε⁻²} (T^{1/2} + T^{1+ω})          (envelope fit over an ε sweep)

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "csv.hpp"
#include "error.hpp"

namespace vpme {

struct MomentVerdict {
    double k = 0.0;
    std::string column;
    double max_ratio = 0.0;
    double threshold = 1.0 + 1e-9;
    bool pass = false;
};

struct QOrderVerdict {
    double max_excess = 0.0;  // max_t (q_star - q_tt)
    double tolerance = 1e-8;
    bool pass = false;
};

struct DensityVerdict {
    bool applicable = false;  // the density bound assumes power-law decaying initial data
    double initial_ratio = 0.0;
    double fitted_C = 0.0;
    double max_ratio_over_initial = 0.0;
    double threshold_factor = 10.0;
    bool pass = false;
};

struct TimeGrowthVerdict {
    bool applicable = true;
    double omega = 0.25;
    double B = 0.0;
    double first_half_max = 0.0;
    double second_half_max = 0.0;
    double growth_factor_limit = 3.0;
    bool pass = false;
};

struct SweepPoint {
    double epsilon = 0.0;
    double T = 0.0;
    double q = 0.0;
};

struct MainBoundFit {
    bool applicable = false;
    double omega = 0.25;
    double slope = 0.0;      // stand-in for c
    double intercept = 0.0;  // log of the stand-in for C
    std::vector<double> epsilon, inv_eps2, log_q_reduced, residuals;
    double envelope_margin = std::log(1.1);
    bool pass = false;
};

struct TrendRow {
    double epsilon = 0.0;
    double ehat_sup = 0.0;
    double envelope = 0.0;  // ε⁻² exp(fitted c₀ ε⁻²) · fitted prefactor
    double ge_L1 = 0.0, ge_L2 = 0.0, ge_L3 = 0.0, ge_Linf = 0.0;
};

struct TrendReport {
    bool applicable = false;
    double fitted_c0 = 0.0;
    double fitted_log_prefactor = 0.0;
    bool envelope_pass = false;
    bool ehat_nondecreasing_as_eps_shrinks = false;
    std::vector<TrendRow> rows;
};

struct RunReport {
    std::string run;
    double epsilon = 0.0;
    std::string velocity_law;
    std::string scenario_hash;
    std::uint64_t seed = 0;
    int grid_nodes = 0;
    double half_width = 0.0;
    double dt = 0.0;
    double t_end = 0.0;
    int checkpoints = 0;
    std::vector<MomentVerdict> moments;
    QOrderVerdict q_order;
    DensityVerdict density;
    TimeGrowthVerdict time_growth;
    bool pass = false;
};

struct BoundReport {
    std::string schema = "vpme-bound-report/1";
    std::vector<RunReport> runs;
    MainBoundFit main_bound;
    TrendReport trends;
    bool pass = false;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(MomentVerdict, k, column, max_ratio, threshold, pass)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(QOrderVerdict, max_excess, tolerance, pass)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(DensityVerdict, applicable, initial_ratio, fitted_C, max_ratio_over_initial,
                                   threshold_factor, pass)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TimeGrowthVerdict, applicable, omega, B, first_half_max, second_half_max, growth_factor_limit,
                                   pass)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(MainBoundFit, applicable, omega, slope, intercept, epsilon, inv_eps2,
                                   log_q_reduced, residuals, envelope_margin, pass)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrendRow, epsilon, ehat_sup, envelope, ge_L1, ge_L2, ge_L3, ge_Linf)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrendReport, applicable, fitted_c0, fitted_log_prefactor, envelope_pass,
                                   ehat_nondecreasing_as_eps_shrinks, rows)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RunReport, run, epsilon, velocity_law, scenario_hash, seed, grid_nodes, half_width,
                                   dt, t_end, checkpoints, moments, q_order, density, time_growth, pass)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BoundReport, schema, runs, main_bound, trends, pass)

/// m_k(t) ≤ 2^k (m_k(0) + q_star(t)^k) at every row (M₀(0) = 1).
inline MomentVerdict check_moment_bound(const Table& series, const std::string& column, double k) {
    const auto mk = series.values(column);
    const auto qs = series.values("q_star");
    if (mk.empty()) throw SchemaError("time series has no rows");
    MomentVerdict v;
    v.k = k;
    v.column = column;
    const double pk = std::pow(2.0, k);
    for (std::size_t r = 0; r < mk.size(); ++r) {
        const double bound = pk * (mk[0] + std::pow(qs[r], k));
        const double ratio = bound > 0.0 ? mk[r] / bound : (mk[r] > 0.0 ? INFINITY : 0.0);
        v.max_ratio = std::max(v.max_ratio, ratio);
    }
    v.pass = v.max_ratio <= v.threshold;
    return v;
}

/// q_star ≤ q_tt + tol at every row.
inline QOrderVerdict check_q_order(const Table& series, double tol = 1e-8) {
    const auto qs = series.values("q_star");
    const auto qt = series.values("q_tt");
    QOrderVerdict v;
    v.tolerance = tol;
    v.max_excess = -INFINITY;
    for (std::size_t r = 0; r < qs.size(); ++r) v.max_excess = std::max(v.max_excess, qs[r] - qt[r]);
    if (qs.empty()) v.max_excess = 0.0;
    v.pass = v.max_excess <= tol;
    return v;
}

/// r(t) = rho_inf/(1 + q_star³); fitted C = max_t r(t); pass iff C ≤ 10 r(0).
inline DensityVerdict check_density_bound(const Table& series, bool applicable = true) {
    const auto rho = series.values("rho_inf");
    const auto qs = series.values("q_star");
    if (rho.empty()) throw SchemaError("time series has no rows");
    DensityVerdict v;
    v.applicable = applicable;
    v.initial_ratio = rho[0] / (1.0 + qs[0] * qs[0] * qs[0]);
    for (std::size_t r = 0; r < rho.size(); ++r)
        v.fitted_C = std::max(v.fitted_C, rho[r] / (1.0 + qs[r] * qs[r] * qs[r]));
    v.max_ratio_over_initial = v.initial_ratio > 0.0 ? v.fitted_C / v.initial_ratio : 0.0;
    v.pass = v.fitted_C <= v.threshold_factor * v.initial_ratio;
    return v;
}

inline double time_factor(double t, double omega) { return std::sqrt(t) + std::pow(t, 1.0 + omega); }

/// Ratio Q(t,t)/(t^{1/2} + t^{1+ω}) must not grow by more than 3× from the
/// first half of the run to the second.
inline TimeGrowthVerdict check_time_growth(const Table& series, double omega) {
    if (!(omega > 0.0 && omega < 1.0)) throw InvalidArgument("omega must lie in (0, 1)");
    const auto t = series.values("t");
    const auto q = series.values("q_tt");
    if (t.size() < 10)
        throw InvalidArgument("time-growth check needs at least 10 checkpoints, got " + std::to_string(t.size()));
    std::vector<double> ratio;
    for (std::size_t r = 0; r < t.size(); ++r)
        if (t[r] > 0.0) ratio.push_back(q[r] / time_factor(t[r], omega));
    TimeGrowthVerdict v;
    v.omega = omega;
    const std::size_t half = (ratio.size() + 1) / 2;
    for (std::size_t r = 0; r < ratio.size(); ++r) {
        v.B = std::max(v.B, ratio[r]);
        (r < half ? v.first_half_max : v.second_half_max) =
            std::max(r < half ? v.first_half_max : v.second_half_max, ratio[r]);
    }
    v.pass = v.second_half_max <= v.growth_factor_limit * v.first_half_max;
    return v;
}

namespace detail {

struct LineFit {
    double slope = 0.0, intercept = 0.0;
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxx > 0 ? sxy / sxx : 0.0;
    f.intercept = my - f.slope * mx;
    return f;
}

}  // namespace detail

/// Least-squares fit of log Q(T,T) - log(T^{1/2} + T^{1+ω}) against ε⁻²;
/// pass iff every point lies within 10% above the fitted envelope.
inline MainBoundFit fit_main_bound(const std::vector<SweepPoint>& points, double omega) {
    if (!(omega > 0.0 && omega < 1.0)) throw InvalidArgument("omega must lie in (0, 1)");
    std::vector<double> eps;
    for (const auto& p : points)
        if (std::find(eps.begin(), eps.end(), p.epsilon) == eps.end()) eps.push_back(p.epsilon);
    if (eps.size() < 3) throw InvalidArgument("main-bound fit needs at least 3 distinct epsilon values");
    MainBoundFit f;
    f.applicable = true;
    f.omega = omega;
    for (const auto& p : points) {
        if (!(p.q > 0.0)) throw InvalidArgument("main-bound fit needs Q(T,T) > 0 at every point");
        f.epsilon.push_back(p.epsilon);
        f.inv_eps2.push_back(1.0 / (p.epsilon * p.epsilon));
        f.log_q_reduced.push_back(std::log(p.q) - std::log(time_factor(p.T, omega)));
    }
    const auto lf = detail::least_squares(f.inv_eps2, f.log_q_reduced);
    f.slope = lf.slope;
    f.intercept = lf.intercept;
    f.pass = true;
    for (std::size_t i = 0; i < f.inv_eps2.size(); ++i) {
        const double res = f.log_q_reduced[i] - (f.slope * f.inv_eps2[i] + f.intercept);
        f.residuals.push_back(res);
        if (res > f.envelope_margin) f.pass = false;
    }
    return f;
}

/// ε-trend of ‖Ê‖∞ against ε⁻² exp(c₀ ε⁻²) and of the electron density norms.
/// Rows must be given in the order of the sweep. Recorded, not gated.
inline TrendReport electron_trends(std::vector<TrendRow> rows) {
    TrendReport tr;
    tr.rows = std::move(rows);
    if (tr.rows.size() < 2) return tr;
    tr.applicable = true;
    std::vector<double> x, y;
    bool positive = true;
    for (const auto& r : tr.rows) {
        const double ie2 = 1.0 / (r.epsilon * r.epsilon);
        positive = positive && r.ehat_sup > 0.0;
        x.push_back(ie2);
        y.push_back(r.ehat_sup > 0.0 ? std::log(r.ehat_sup / ie2) : 0.0);
    }
    const auto lf = detail::least_squares(x, y);
    tr.fitted_c0 = lf.slope;
    tr.fitted_log_prefactor = lf.intercept;
    tr.envelope_pass = positive;
    for (std::size_t i = 0; i < tr.rows.size(); ++i) {
        tr.rows[i].envelope = x[i] * std::exp(lf.slope * x[i] + lf.intercept);
        if (positive && y[i] - (lf.slope * x[i] + lf.intercept) > std::log(1.1)) tr.envelope_pass = false;
    }
    auto sorted = tr.rows;
    std::sort(sorted.begin(), sorted.end(), [](const TrendRow& a, const TrendRow& b) { return a.epsilon > b.epsilon; });
    tr.ehat_nondecreasing_as_eps_shrinks = true;
    for (std::size_t i = 1; i < sorted.size(); ++i)
        if (sorted[i].ehat_sup < sorted[i - 1].ehat_sup) tr.ehat_nondecreasing_as_eps_shrinks = false;
    return tr;
}

inline std::string report_to_text(const BoundReport& r) { return nlohmann::json(r).dump(2) + "\n"; }

inline BoundReport report_from_text(const std::string& text) {
    try {
        return nlohmann::json::parse(text).get<BoundReport>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed bound report: ") + e.what());
    }
}

}  // namespace vpme
