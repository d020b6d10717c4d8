#pragma once

// Driver: the time loop, sweeps over ε, verification of persisted runs and
// plot-ready TSV export.
//
// Run directory layout:
//   timeseries.csv   one row per checkpoint (diagnostics columns)
//   field_audit.csv  t, ehat_sup, ge_L1, ge_L2, ge_L3, ge_Linf
//   q_windows.csv    t, delta, q_window  (Q(t, δ) over each checkpoint interval)
//   metadata.json    config echo, seed, hash, status, advisories, warnings, wall time
//   snapshots/       optional binary field snapshots per checkpoint
// Sweep directory: index.json plus one eps_<value>/ run directory per ε.

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bound_verifier.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "diagnostics.hpp"
#include "error.hpp"
#include "field_io.hpp"
#include "field_solver.hpp"
#include "mesh.hpp"
#include "parallel.hpp"
#include "phase_space.hpp"
#include "pusher.hpp"

namespace vpme {

namespace fs = std::filesystem;

enum class ExitCode : int { ok = 0, usage = 1, solver_failure = 2, escaped_mass = 3 };

inline const std::vector<std::string>& field_audit_columns() {
    static const std::vector<std::string> cols = {"t", "ehat_sup", "ge_L1", "ge_L2", "ge_L3", "ge_Linf"};
    return cols;
}

inline const std::vector<std::string>& q_window_columns() {
    static const std::vector<std::string> cols = {"t", "delta", "q_window"};
    return cols;
}

/// Worst-case solver certificates over every field solve of a run.
struct SolveCertificates {
    long solves = 0;
    double max_residual_ratio = 0.0;  // final residual / tolerance
    double max_uhat = -INFINITY;
    double max_gauss_relative = 0.0;  // |imbalance| / max(1, Σ ρ h³)
    double max_field = 0.0;           // max |E| at nodes
    int max_newton_iterations = 0;
};

struct RunResult {
    std::string status = "ok";
    ExitCode exit_code = ExitCode::ok;
    std::string message;
    long steps_completed = 0;
    double escaped_peak = 0.0;
    double wall_time_s = 0.0;
    std::vector<std::string> advisories;
    std::vector<std::string> warnings;
    SolveCertificates certificates;
    std::vector<DiagnosticsRecord> series;
};

namespace detail {

inline void write_csv_header(std::ofstream& os, const std::vector<std::string>& cols) {
    for (std::size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
    os << '\n';
    os.flush();
}

inline void write_csv_row(std::ofstream& os, const std::vector<double>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_double(row[c]);
    os << '\n';
    os.flush();
}

inline void note_certificates(SolveCertificates& c, const FieldSolution& s, double mass) {
    ++c.solves;
    if (s.residual_tolerance > 0.0)
        c.max_residual_ratio = std::max(c.max_residual_ratio, s.final_residual_inf / s.residual_tolerance);
    c.max_uhat = std::max(c.max_uhat, s.Uhat.max());
    c.max_gauss_relative = std::max(c.max_gauss_relative, std::abs(s.gauss_imbalance) / std::max(1.0, mass));
    c.max_field = std::max(c.max_field, s.E.max_norm());
    c.max_newton_iterations = std::max(c.max_newton_iterations, s.newton_iterations);
}

inline nlohmann::json config_json(const ScenarioConfig& c) {
    nlohmann::json j;
    j["half_width"] = c.grid.half_width;
    j["nodes"] = c.grid.nodes;
    j["epsilon"] = c.epsilon;
    j["field"] = c.self_consistent_field ? "self_consistent" : "none";
    j["dt"] = c.time.dt;
    j["t_end"] = c.time.t_end;
    j["checkpoint_every"] = c.time.checkpoint_every;
    j["particle_count"] = c.particle_count;
    j["velocity_law"] = to_string(c.particles.kind);
    j["m1"] = c.particles.m1;
    j["k_list"] = {2.0, c.particles.m1, 3.0};
    j["omega"] = c.omega;
    j["seed"] = c.seed;
    return j;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw SchemaError("cannot open " + p.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << text;
}

}  // namespace detail

/// Background profile on the grid: analytic profile or the normalized
/// deposit of the initial ensemble.
inline ScalarField make_background(const ScenarioConfig& c, const ParticleEnsemble& initial) {
    if (!c.background.from_deposit) return evaluate_g(c.background.profile, c.grid);
    ScalarField g = deposit_density(initial, c.grid, ExecutionPolicy{true});
    const double mass = g.integral();
    if (!(mass > 0.0)) throw InvalidArgument("deposit background: no particle mass inside the box");
    for (auto& v : g.values) v /= mass;
    return g;
}

/// Runs one scenario and persists its artifacts under `out`. Solver failures
/// and the escaped-mass gate end the run early with the rows written so far.
inline RunResult run(const ScenarioConfig& cfg, const fs::path& out, const ExecutionPolicy& policy = {}) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(out);
    RunResult res;

    const GridSpec& grid = cfg.grid;
    const double dt = cfg.time.dt;
    const double eps = cfg.epsilon;
    const long steps = cfg.time.steps();
    const int every = cfg.time.checkpoint_every;

    ParticleEnsemble ens = sample_initial(cfg.particles, cfg.particle_count, cfg.seed);
    const ScalarField g = make_background(cfg, ens);
    if (!cfg.background.from_deposit)
        if (auto w = background_warning(cfg.background.profile, grid)) res.warnings.push_back(*w);
    if (steps % every != 0)
        res.warnings.push_back("t_end/dt is not a multiple of checkpoint_every; the final step is not recorded");

    std::ofstream ts(out / "timeseries.csv", std::ios::binary);
    std::ofstream audit(out / "field_audit.csv", std::ios::binary);
    std::ofstream qw(out / "q_windows.csv", std::ios::binary);
    if (!ts || !audit || !qw) throw std::runtime_error("cannot create output files in " + out.string());
    detail::write_csv_header(ts, timeseries_columns());
    detail::write_csv_header(audit, field_audit_columns());
    detail::write_csv_header(qw, q_window_columns());
    if (cfg.snapshots) fs::create_directories(out / "snapshots");

    FieldSolver solver(grid);
    DiagnosticsRecorder recorder(cfg.particles.m1);
    const double total_w = ens.total_weight();
    std::map<std::string, double> advisory_first;

    auto escaped_check = [&](double t) {
        ens.escaped_mass = out_of_box_weight(ens, grid);
        res.escaped_peak = std::max(res.escaped_peak, ens.escaped_mass);
        if (ens.escaped_mass > 1e-3 * total_w) {
            res.status = "escaped_mass";
            res.exit_code = ExitCode::escaped_mass;
            res.message = "escaped mass " + format_double(ens.escaped_mass) + " exceeds 0.1% of total at t = " +
                          format_double(t);
            return false;
        }
        return true;
    };

    ScalarField rho = deposit_density(ens, grid, policy);
    std::optional<FieldSolution> sol;
    VectorField zero_field(grid);
    auto solve_at = [&](const ScalarField* guess) {
        FieldSolution s = solver.solve(rho, g, eps, guess);
        detail::note_certificates(res.certificates, s, rho.integral());
        sol.emplace(std::move(s));
    };

    auto checkpoint = [&](double t, double continuity) {
        RecordInputs in;
        in.t = t;
        in.rho = &rho;
        in.g = &g;
        in.field = sol ? &*sol : nullptr;
        in.continuity_res = continuity;
        const auto& rec = recorder.record(ens, in);
        detail::write_csv_row(ts, to_row(rec));
        const ScalarField u0(grid);
        const auto norms = electron_density_norms(sol ? sol->U : u0, g);
        detail::write_csv_row(audit, {t, sol ? ehat_sup(*sol) : 0.0, norms.at(1), norms.at(2), norms.at(3), norms.at(0)});
        if (!ens.checkpoint_integrals.empty()) {
            const std::size_t c = ens.checkpoint_integrals.size();
            ens.checkpoint();
            detail::write_csv_row(qw, {t, every * dt, q_windowed(ens, c - 1, c)});
        } else {
            ens.checkpoint();
        }
        if (cfg.snapshots) {
            char name[32];
            std::snprintf(name, sizeof name, "step_%06ld", std::lround(t / dt));
            const fs::path base = out / "snapshots" / name;
            write_snapshot(base.string() + "_rho.bin", "rho", rho);
            if (sol) {
                write_snapshot(base.string() + "_U.bin", "U", sol->U);
                write_snapshot(base.string() + "_Ubar.bin", "Ubar", sol->Ubar);
                write_snapshot(base.string() + "_Uhat.bin", "Uhat", sol->Uhat);
                write_snapshot(base.string() + "_E.bin", "E", sol->E);
            }
        }
        const auto st = stability_check(ens, sol ? sol->E : zero_field, dt);
        for (const auto& a : st.advisories) {
            const std::string key = a.substr(0, a.find(" = "));
            if (!advisory_first.count(key)) {
                advisory_first[key] = t;
                res.advisories.push_back("t = " + format_double(t) + ": " + a);
            }
        }
    };

    try {
        if (cfg.self_consistent_field) solve_at(nullptr);
        if (escaped_check(0.0)) {
            checkpoint(0.0, 0.0);
            ScalarField rho_prev(grid);
            VectorField j_mid(grid);
            for (long n = 1; n <= steps; ++n) {
                const double t = static_cast<double>(n) * dt;
                const bool is_checkpoint = n % every == 0;
                if (sol) half_kick(ens, grid_force(sol->E), dt, policy);
                drift(ens, dt, policy);
                if (is_checkpoint) {
                    // j at the mid-step positions x - dt/2 v with the half-step velocities
                    rho_prev = rho;
                    ParticleEnsemble mid = ParticleEnsemble::from_state(ens.positions, ens.velocities, ens.weights);
                    for (std::size_t p = 0; p < mid.size(); ++p) mid.positions[p] -= mid.velocities[p] * (0.5 * dt);
                    j_mid = deposit_current(mid, grid, policy);
                }
                rho = deposit_density(ens, grid, policy);
                if (!escaped_check(t)) break;
                if (cfg.self_consistent_field) {
                    const ScalarField guess = sol->U;
                    solve_at(&guess);
                    half_kick(ens, grid_force(sol->E), dt, policy);
                }
                res.steps_completed = n;
                if (is_checkpoint) checkpoint(t, continuity_residual(rho_prev, rho, j_mid, dt));
            }
        }
    } catch (const SolverError& e) {
        res.status = "solver_failure";
        res.exit_code = ExitCode::solver_failure;
        res.message = e.what();
    }

    res.series = recorder.series();
    res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    nlohmann::json meta;
    meta["schema"] = "vpme-run-metadata/1";
    meta["status"] = res.status;
    meta["exit_code"] = static_cast<int>(res.exit_code);
    meta["message"] = res.message;
    meta["config_text"] = to_text(cfg);
    meta["config"] = detail::config_json(cfg);
    meta["scenario_hash"] = scenario_hash(cfg);
    meta["seed"] = cfg.seed;
    meta["strict_reduce"] = policy.strict_reduce;
    meta["steps_planned"] = steps;
    meta["steps_completed"] = res.steps_completed;
    meta["checkpoints"] = res.series.size();
    meta["escaped_mass_peak"] = res.escaped_peak;
    meta["advisories"] = res.advisories;
    meta["warnings"] = res.warnings;
    meta["boundary_closure"] = "monopole Dirichlet data for both potential parts";
    meta["wall_time_s"] = res.wall_time_s;
    const auto& c = res.certificates;
    meta["solver"] = {{"solves", c.solves},
                      {"max_residual_over_tolerance", c.max_residual_ratio},
                      {"max_uhat", c.solves ? c.max_uhat : 0.0},
                      {"max_gauss_relative", c.max_gauss_relative},
                      {"max_field", c.max_field},
                      {"max_newton_iterations", c.max_newton_iterations}};
    detail::write_file(out / "metadata.json", meta.dump(2) + "\n");
    return res;
}

struct SweepEntry {
    double epsilon = 0.0;
    std::string dir;
    std::string status;
    int exit_code = 0;
    std::string message;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SweepEntry, epsilon, dir, status, exit_code, message)

inline std::string sweep_dir_name(double eps) { return "eps_" + format_double(eps); }

/// Runs the base scenario once per ε (same seed), in the given order.
/// A failing run is recorded in the index and the sweep continues.
inline std::vector<SweepEntry> sweep(const ScenarioConfig& base, const std::vector<double>& epsilons,
                                     const fs::path& out, const ExecutionPolicy& policy = {}) {
    if (epsilons.empty()) throw InvalidArgument("sweep needs at least one epsilon value");
    fs::create_directories(out);
    std::vector<SweepEntry> entries;
    for (double eps : epsilons) {
        SweepEntry e;
        e.epsilon = eps;
        e.dir = sweep_dir_name(eps);
        ScenarioConfig c = base;
        c.epsilon = eps;
        try {
            const RunResult r = run(c, out / e.dir, policy);
            e.status = r.status;
            e.exit_code = static_cast<int>(r.exit_code);
            e.message = r.message;
        } catch (const InvalidArgument& ex) {
            e.status = "invalid_config";
            e.exit_code = static_cast<int>(ExitCode::usage);
            e.message = ex.what();
        }
        entries.push_back(e);
    }
    nlohmann::json idx;
    idx["schema"] = "vpme-sweep-index/1";
    idx["base_scenario_hash"] = scenario_hash(base);
    idx["runs"] = entries;
    detail::write_file(out / "index.json", idx.dump(2) + "\n");
    return entries;
}

inline bool is_sweep_dir(const fs::path& p) { return fs::exists(p / "index.json"); }

/// Checks one persisted run directory.
inline RunReport verify_run(const fs::path& dir, const std::string& name, std::optional<double> omega_override) {
    if (!fs::exists(dir / "metadata.json")) throw SchemaError("not a run directory: " + dir.string());
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(detail::read_file(dir / "metadata.json"));
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("malformed metadata in " + dir.string() + ": " + e.what());
    }
    const Table series = read_table((dir / "timeseries.csv").string(), ',', timeseries_columns());
    if (series.rows.empty()) throw SchemaError((dir / "timeseries.csv").string() + ": no data rows");
    RunReport r;
    r.run = name;
    try {
        const auto& c = meta.at("config");
        r.epsilon = c.at("epsilon").get<double>();
        r.velocity_law = c.at("velocity_law").get<std::string>();
        r.grid_nodes = c.at("nodes").get<int>();
        r.half_width = c.at("half_width").get<double>();
        r.dt = c.at("dt").get<double>();
        r.t_end = c.at("t_end").get<double>();
        r.scenario_hash = meta.at("scenario_hash").get<std::string>();
        r.seed = meta.at("seed").get<std::uint64_t>();
        const double m1 = c.at("m1").get<double>();
        const double omega = omega_override ? *omega_override : c.at("omega").get<double>();
        r.checkpoints = static_cast<int>(series.rows.size());
        r.moments = {check_moment_bound(series, "m2", 2.0), check_moment_bound(series, "mk_m1", m1),
                     check_moment_bound(series, "m3", 3.0)};
        r.q_order = check_q_order(series);
        r.density = check_density_bound(series, r.velocity_law == "power_law");
        if (series.rows.size() >= 10) {
            r.time_growth = check_time_growth(series, omega);
        } else {
            r.time_growth.applicable = false;
            r.time_growth.omega = omega;
            r.time_growth.pass = true;
        }
        const bool completed = meta.at("status").get<std::string>() == "ok";
        r.pass = completed && r.q_order.pass && r.time_growth.pass && (!r.density.applicable || r.density.pass);
        for (const auto& m : r.moments) r.pass = r.pass && m.pass;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("malformed metadata in " + dir.string() + ": " + e.what());
    }
    return r;
}

/// Verifies a run or sweep directory and writes report.json into it.
inline BoundReport verify(const fs::path& path, std::optional<double> omega_override = std::nullopt) {
    if (!fs::is_directory(path)) throw SchemaError("no such run or sweep directory: " + path.string());
    BoundReport rep;
    if (!is_sweep_dir(path)) {
        rep.runs.push_back(verify_run(path, ".", omega_override));
        rep.pass = rep.runs[0].pass;
    } else {
        nlohmann::json idx;
        std::vector<SweepEntry> entries;
        try {
            idx = nlohmann::json::parse(detail::read_file(path / "index.json"));
            entries = idx.at("runs").get<std::vector<SweepEntry>>();
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("malformed sweep index: " + std::string(e.what()));
        }
        rep.pass = true;
        std::vector<SweepPoint> points;
        std::vector<TrendRow> trend;
        double omega = omega_override.value_or(0.25);
        for (const auto& e : entries) {
            if (e.status == "invalid_config") {
                rep.pass = false;
                continue;
            }
            RunReport r = verify_run(path / e.dir, e.dir, omega_override);
            omega = r.time_growth.omega;
            rep.pass = rep.pass && r.pass;
            if (e.status == "ok") {
                const Table series = read_table((path / e.dir / "timeseries.csv").string(), ',', timeseries_columns());
                const Table audit = read_table((path / e.dir / "field_audit.csv").string(), ',', field_audit_columns());
                points.push_back({r.epsilon, series.rows.back()[series.column("t")],
                                  series.rows.back()[series.column("q_tt")]});
                if (!audit.rows.empty()) {
                    const auto& a = audit.rows.back();
                    TrendRow tr;
                    tr.epsilon = r.epsilon;
                    for (const double v : audit.values("ehat_sup")) tr.ehat_sup = std::max(tr.ehat_sup, v);
                    tr.ge_L1 = a[audit.column("ge_L1")];
                    tr.ge_L2 = a[audit.column("ge_L2")];
                    tr.ge_L3 = a[audit.column("ge_L3")];
                    tr.ge_Linf = a[audit.column("ge_Linf")];
                    trend.push_back(tr);
                }
            }
            rep.runs.push_back(std::move(r));
        }
        std::vector<double> distinct;
        for (const auto& p : points)
            if (std::find(distinct.begin(), distinct.end(), p.epsilon) == distinct.end()) distinct.push_back(p.epsilon);
        if (distinct.size() >= 3) {
            rep.main_bound = fit_main_bound(points, omega);
            rep.pass = rep.pass && rep.main_bound.pass;
        } else {
            rep.main_bound.omega = omega;
        }
        rep.trends = electron_trends(trend);
    }
    detail::write_file(path / "report.json", report_to_text(rep));
    return rep;
}

namespace detail {

inline void write_tsv(const fs::path& p, const std::string& description, const Table& t) {
    write_table(p.string(), t, '\t', "# " + description + "\n");
}

inline void plot_run(const fs::path& dir) {
    const Table s = read_table((dir / "timeseries.csv").string(), ',', timeseries_columns());
    fs::create_directories(dir / "plot");
    Table energy{{"t", "kinetic", "field", "electron", "total"}, {}};
    Table q{{"t", "q_tt", "q_star"}, {}};
    Table dens{{"t", "rho_inf", "one_plus_qstar3"}, {}};
    for (const auto& r : s.rows) {
        const double t = r[s.column("t")];
        energy.rows.push_back({t, r[s.column("kinetic")], r[s.column("field")], r[s.column("electron")],
                               r[s.column("total")]});
        q.rows.push_back({t, r[s.column("q_tt")], r[s.column("q_star")]});
        const double qs = r[s.column("q_star")];
        dens.rows.push_back({t, r[s.column("rho_inf")], 1.0 + qs * qs * qs});
    }
    write_tsv(dir / "plot" / "energy.tsv", "energy functional parts against time", energy);
    write_tsv(dir / "plot" / "q.tsv", "Q(t,t) and Q*(t) against time", q);
    write_tsv(dir / "plot" / "density.tsv", "max density against 1 + Q*^3", dens);
}

}  // namespace detail

/// Writes plot/*.tsv for a run, or for every run of a sweep plus
/// plot/sweep_q.tsv (one row per ε).
inline void plot_data(const fs::path& path) {
    if (!fs::is_directory(path)) throw SchemaError("no such run or sweep directory: " + path.string());
    if (!is_sweep_dir(path)) {
        detail::plot_run(path);
        return;
    }
    std::vector<SweepEntry> entries;
    try {
        entries = nlohmann::json::parse(detail::read_file(path / "index.json")).at("runs").get<std::vector<SweepEntry>>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("malformed sweep index: " + std::string(e.what()));
    }
    Table sq{{"epsilon", "inv_eps2", "T", "q_TT"}, {}};
    for (const auto& e : entries) {
        if (e.status == "invalid_config") continue;
        detail::plot_run(path / e.dir);
        const Table s = read_table((path / e.dir / "timeseries.csv").string(), ',', timeseries_columns());
        if (s.rows.empty()) continue;
        sq.rows.push_back({e.epsilon, 1.0 / (e.epsilon * e.epsilon), s.rows.back()[s.column("t")],
                           s.rows.back()[s.column("q_tt")]});
    }
    fs::create_directories(path / "plot");
    detail::write_tsv(path / "plot" / "sweep_q.tsv", "Q(T,T) against 1/epsilon^2, one row per sweep run", sq);
}

}  // namespace vpme
