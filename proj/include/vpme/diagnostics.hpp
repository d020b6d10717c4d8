#pragma once

// Per-checkpoint scalar diagnostics: the energy functional split into its
// kinetic, field and electron parts, velocity moments with running suprema,
// Q(t,t) and Q*, density norms, solver certificates and the discrete
// continuity defect.

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "field_solver.hpp"
#include "mesh.hpp"
#include "phase_space.hpp"

namespace vpme {

struct EnergyParts {
    double kinetic = 0.0;
    double field = 0.0;
    double electron = 0.0;
    double total() const { return kinetic + field + electron; }
};

/// Σ w|v|², ε² Σ|E|² h³ and 2 Σ (U-1) g e^U h³.
inline EnergyParts energy(const ParticleEnsemble& e, const FieldSolution& s, const ScalarField& g) {
    EnergyParts out;
    out.kinetic = instantaneous_moment(e, 2.0);
    const double vol = g.grid.cell_volume();
    double fe = 0.0;
    for (const auto& v : s.E.values) fe += dot(v, v);
    out.field = s.epsilon * s.epsilon * fe * vol;
    double ee = 0.0;
    for (std::size_t m = 0; m < g.values.size(); ++m) {
        const double u = s.U.values[m];
        ee += (u - 1.0) * g.values[m] * std::exp(u);
    }
    out.electron = 2.0 * ee * vol;
    return out;
}

/// Energy with no self-consistent field (U ≡ 0, E ≡ 0).
inline EnergyParts free_energy(const ParticleEnsemble& e, const ScalarField& g) {
    return {instantaneous_moment(e, 2.0), 0.0, -2.0 * g.integral()};
}

/// L² grid norm of (ρ_next - ρ_prev)/dt + div_h j_mid over interior nodes,
/// central differences for the divergence.
inline double continuity_residual(const ScalarField& rho_prev, const ScalarField& rho_next, const VectorField& j_mid,
                                  double dt) {
    if (!(rho_prev.grid == rho_next.grid) || !(rho_prev.grid == j_mid.grid))
        throw InvalidArgument("continuity_residual: fields live on different grids");
    if (!(dt > 0.0)) throw InvalidArgument("continuity_residual: dt must be > 0");
    const GridSpec& g = rho_prev.grid;
    const int N = g.nodes;
    const double inv2h = 1.0 / (2.0 * g.spacing());
    double s = 0.0;
    for (int k = 1; k < N - 1; ++k)
        for (int j = 1; j < N - 1; ++j)
            for (int i = 1; i < N - 1; ++i) {
                const double div = (j_mid(i + 1, j, k).x - j_mid(i - 1, j, k).x + j_mid(i, j + 1, k).y -
                                    j_mid(i, j - 1, k).y + j_mid(i, j, k + 1).z - j_mid(i, j, k - 1).z) *
                                   inv2h;
                const double r = (rho_next(i, j, k) - rho_prev(i, j, k)) / dt + div;
                s += r * r;
            }
    return std::sqrt(s * g.cell_volume());
}

struct DiagnosticsRecord {
    double t = 0.0;
    EnergyParts energy;
    double m2 = 0.0, mk_m1 = 0.0, m3 = 0.0;
    double Mk2 = 0.0, Mk_m1 = 0.0, Mk3 = 0.0;
    double q_tt = 0.0, q_star = 0.0;
    double rho_inf = 0.0, rho_53 = 0.0;
    double electron_L1 = 0.0;
    double gauss_imbalance = 0.0;
    int newton_iters = 0;
    double residual_inf = 0.0;
    double continuity_res = 0.0;
    double escaped_mass = 0.0;
};

/// CSV column order of the time series.
inline const std::vector<std::string>& timeseries_columns() {
    static const std::vector<std::string> cols = {
        "t",  "kinetic", "field", "electron", "total", "m2",   "mk_m1",  "m3",          "Mk2",
        "Mk_m1", "Mk3", "q_tt",  "q_star",   "rho_inf", "rho_53", "electron_L1", "gauss_imbalance",
        "newton_iters", "residual_inf", "continuity_res", "escaped_mass"};
    return cols;
}

inline std::vector<double> to_row(const DiagnosticsRecord& r) {
    return {r.t,      r.energy.kinetic, r.energy.field, r.energy.electron, r.energy.total(), r.m2,
            r.mk_m1,  r.m3,             r.Mk2,          r.Mk_m1,           r.Mk3,            r.q_tt,
            r.q_star, r.rho_inf,        r.rho_53,       r.electron_L1,     r.gauss_imbalance,
            static_cast<double>(r.newton_iters),        r.residual_inf,    r.continuity_res, r.escaped_mass};
}

/// Density norms max ρ and (Σ ρ^{5/3} h³)^{3/5}.
inline std::pair<double, double> density_norms(const ScalarField& rho) {
    double inf = 0.0, s = 0.0;
    for (double v : rho.values) {
        inf = std::max(inf, v);
        s += std::pow(std::max(v, 0.0), 5.0 / 3.0);
    }
    return {inf, std::pow(s * rho.grid.cell_volume(), 3.0 / 5.0)};
}

/// Everything a record needs besides the ensemble itself.
struct RecordInputs {
    double t = 0.0;
    const ScalarField* rho = nullptr;
    const ScalarField* g = nullptr;
    const FieldSolution* field = nullptr;  // null when the self-consistent field is disabled
    double continuity_res = 0.0;
};

/// Builds records and keeps the running suprema M_k.
class DiagnosticsRecorder {
public:
    explicit DiagnosticsRecorder(double m1) : m1_(m1) {}

    const DiagnosticsRecord& record(const ParticleEnsemble& e, const RecordInputs& in) {
        DiagnosticsRecord r;
        r.t = in.t;
        r.energy = in.field ? energy(e, *in.field, *in.g) : free_energy(e, *in.g);
        r.m2 = instantaneous_moment(e, 2.0);
        r.mk_m1 = instantaneous_moment(e, m1_);
        r.m3 = instantaneous_moment(e, 3.0);
        const DiagnosticsRecord* prev = series_.empty() ? nullptr : &series_.back();
        r.Mk2 = std::max(r.m2, prev ? prev->Mk2 : 0.0);
        r.Mk_m1 = std::max(r.mk_m1, prev ? prev->Mk_m1 : 0.0);
        r.Mk3 = std::max(r.m3, prev ? prev->Mk3 : 0.0);
        r.q_tt = q_tt(e);
        r.q_star = q_star(e);
        std::tie(r.rho_inf, r.rho_53) = density_norms(*in.rho);
        if (in.field) {
            r.electron_L1 = electron_density_norms(in.field->U, *in.g).at(1);
            r.gauss_imbalance = in.field->gauss_imbalance;
            r.newton_iters = in.field->newton_iterations;
            r.residual_inf = in.field->final_residual_inf;
        } else {
            r.electron_L1 = in.g->integral();
        }
        r.continuity_res = in.continuity_res;
        r.escaped_mass = e.escaped_mass;
        series_.push_back(r);
        return series_.back();
    }

    const std::vector<DiagnosticsRecord>& series() const { return series_; }
    double m1() const { return m1_; }

private:
    double m1_;
    std::vector<DiagnosticsRecord> series_;
};

}  // namespace vpme
