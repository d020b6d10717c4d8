// Acceptance suite: one PASS/FAIL line per criterion. Runs are written under
// the directory given as the first argument.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "vpme/simulation.hpp"

using namespace vpme;
namespace fs = std::filesystem;

namespace {

const std::string kScenarios = VPME_SCENARIO_DIR;

struct Outcome {
    bool pass = true;
    std::string detail;
    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [fail]");
    }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

int failures = 0;

void report(int id, const std::string& title, const Outcome& o) {
    std::printf("criterion %2d %s: %s  (%s)\n", id, o.pass ? "PASS" : "FAIL", title.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

Table series_of(const fs::path& dir) {
    return read_table((dir / "timeseries.csv").string(), ',', timeseries_columns());
}

nlohmann::json metadata_of(const fs::path& dir) { return nlohmann::json::parse(detail::read_file(dir / "metadata.json")); }

double max_relative_change(const std::vector<double>& v) {
    double d = 0.0;
    for (double x : v) d = std::max(d, std::abs(x - v.front()) / std::max(1.0, std::abs(v.front())));
    return d;
}

double energy_drift(const fs::path& dir) { return max_relative_change(series_of(dir).values("total")); }

// Smooth free-streaming ensemble on a lattice refined with the grid.
ParticleEnsemble quiet_lattice(const GridSpec& g, double width, Vec3 v0, double a) {
    const double dx = 0.5 * g.spacing();
    const double inner = g.half_width - 2.0 * g.spacing();
    const int n = static_cast<int>(std::floor(2.0 * inner / dx));
    std::vector<Vec3> x, v;
    std::vector<double> w;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const Vec3 p{-inner + (i + 0.5) * dx, -inner + (j + 0.5) * dx, -inner + (k + 0.5) * dx};
                const double d = std::exp(-dot(p, p) / (width * width));
                if (d < 1e-14) continue;
                x.push_back(p);
                v.push_back(v0 + p * a);
                w.push_back(d * dx * dx * dx / (std::pow(std::numbers::pi, 1.5) * width * width * width));
            }
    return ParticleEnsemble::from_state(x, v, w);
}

double streaming_residual(int N, double dt) {
    const GridSpec g{2.0, N};
    auto e = quiet_lattice(g, 0.5, {0.3, -0.2, 0.1}, 0.2);
    const auto rho0 = deposit_density(e, g);
    auto mid = e;
    drift(mid, 0.5 * dt);
    const auto j = deposit_current(mid, g);
    drift(e, dt);
    return continuity_residual(rho0, deposit_density(e, g), j, dt);
}

double harmonic_error(double dt) {
    const double T = 2.0;
    auto e = ParticleEnsemble::from_state({{1, 0, 0}}, {{0, 1, 0}}, {1.0});
    const long n = std::lround(T / dt);
    for (long s = 0; s < n; ++s) step(e, [](const Vec3& x) { return -x; }, dt);
    return norm(e.positions[0] - Vec3{std::cos(T), std::sin(T), 0});
}

bool same_bytes(const fs::path& a, const fs::path& b) { return detail::read_file(a) == detail::read_file(b); }

}  // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "vpme_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);
    const ExecutionPolicy strict{true};

    const auto baseline = load_config(kScenarios + "/baseline.ini");
    std::printf("baseline: L=%s N=%d eps=%s particles=%zu dt=%s T=%s\n", num(baseline.grid.half_width).c_str(),
                baseline.grid.nodes, num(baseline.epsilon).c_str(), baseline.particle_count,
                num(baseline.time.dt).c_str(), num(baseline.time.t_end).c_str());
    std::fflush(stdout);

    // 1. equilibrium
    {
        const auto r = run(load_config(kScenarios + "/equilibrium.ini"), work / "equilibrium");
        const Table s = series_of(work / "equilibrium");
        Outcome o;
        o.require(r.exit_code == ExitCode::ok, "status " + r.status);
        o.require(r.certificates.max_field <= 1e-9, "max|E| " + num(r.certificates.max_field));
        o.require(s.values("q_tt").back() <= 1e-9, "q_tt(T) " + num(s.values("q_tt").back()));
        const double drift = max_relative_change(s.values("total"));
        o.require(drift <= 1e-12, "energy change " + num(drift));
        report(1, "equilibrium exactness", o);
    }

    // 2. uniform-ball potential at the centre
    {
        const double eps = 0.5, R = 0.5;
        const double oracle = 3.0 / (8.0 * std::numbers::pi * eps * eps * R);
        SpatialProfile ball;
        ball.kind = SpatialProfile::Kind::uniform_ball;
        ball.width = R;
        std::vector<double> err;
        for (int N : {32, 64, 128}) {
            const GridSpec g{4.0, N};
            const auto u = solve_ubar(evaluate_g(ball, g), eps);
            err.push_back(std::abs(interpolate(u, Vec3{}) - oracle) / oracle);
        }
        Outcome o;
        o.require(err[1] <= 0.02, "error at N=64 " + num(err[1]));
        const double p1 = std::log2(err[0] / err[1]), p2 = std::log2(err[1] / err[2]);
        o.require(p1 >= 1.8 && p2 >= 1.8, "orders " + num(p1) + ", " + num(p2));
        report(2, "field-solver oracle", o);
    }

    // ε sweep on the baseline; its ε = baseline run doubles as the baseline run.
    const fs::path sweep_dir = work / "sweep";
    const auto entries = sweep(baseline, {1.0, 0.7, 0.5}, sweep_dir, strict);
    const fs::path base_dir = sweep_dir / sweep_dir_name(baseline.epsilon);

    auto half = baseline;
    half.time.dt = 0.5 * baseline.time.dt;
    half.time.checkpoint_every = 2 * baseline.time.checkpoint_every;
    run(half, work / "baseline_half_dt");
    run(baseline, work / "baseline_repeat", strict);
    run(load_config(kScenarios + "/power_law.ini"), work / "power_law");
    run(load_config(kScenarios + "/free_streaming.ini"), work / "free_streaming");

    // 3. solver certificates over every solve of the baseline run
    {
        const auto meta = metadata_of(base_dir);
        const auto& c = meta.at("solver");
        Outcome o;
        o.require(meta.at("status") == "ok", "status " + meta.at("status").get<std::string>());
        const double rr = c.at("max_residual_over_tolerance"), uh = c.at("max_uhat"), gi = c.at("max_gauss_relative");
        o.require(rr <= 1.0, "max residual/tolerance " + num(rr));
        o.require(uh <= 1e-8, "max Uhat " + num(uh));
        o.require(gi <= 1e-8, "max gauss imbalance " + num(gi));
        o.detail += "; solves " + std::to_string(c.at("solves").get<int>());
        report(3, "nonlinear solver certificates", o);
    }

    // 4. energy drift and its dt dependence
    {
        const double d1 = energy_drift(base_dir), d2 = energy_drift(work / "baseline_half_dt");
        Outcome o;
        o.require(d1 <= 0.02, "drift " + num(d1));
        o.require(d2 > 0.0 && d1 / d2 >= 2.0, "drift(dt)/drift(dt/2) = " + num(d1 / d2) + " (dt/2 drift " + num(d2) + ")");
        report(4, "energy conservation", o);
    }

    std::vector<std::pair<std::string, RunReport>> reports;
    for (const auto& [name, dir] : std::vector<std::pair<std::string, fs::path>>{
             {"equilibrium", work / "equilibrium"},
             {"baseline", base_dir},
             {"baseline_half_dt", work / "baseline_half_dt"},
             {"baseline_repeat", work / "baseline_repeat"},
             {"power_law", work / "power_law"},
             {"free_streaming", work / "free_streaming"},
             {"sweep_eps_1", sweep_dir / sweep_dir_name(1.0)},
             {"sweep_eps_0.7", sweep_dir / sweep_dir_name(0.7)}})
        reports.emplace_back(name, verify_run(dir, name, std::nullopt));
    auto report_of = [&](const std::string& name) -> const RunReport& {
        for (const auto& [n, r] : reports)
            if (n == name) return r;
        throw std::logic_error(name);
    };

    // 5. moment bound
    {
        Outcome o;
        for (const char* name : {"baseline", "power_law"})
            for (const auto& m : report_of(name).moments)
                o.require(m.pass, std::string(name) + " " + m.column + " ratio " + num(m.max_ratio));
        report(5, "moment bound", o);
    }

    // 6. q_star ≤ q_tt
    {
        Outcome o;
        for (const auto& [name, r] : reports) o.require(r.q_order.pass, name + " " + num(r.q_order.max_excess));
        report(6, "order relation q_star <= q_tt", o);
    }

    // 7. density gate
    {
        const auto& d = report_of("power_law").density;
        Outcome o;
        o.require(d.pass, "max ratio / initial " + num(d.max_ratio_over_initial));
        report(7, "density bound gate", o);
    }

    // 8. free streaming
    {
        const Table s = series_of(work / "free_streaming");
        Outcome o;
        o.require(metadata_of(work / "free_streaming").at("status") == "ok", "run completed");
        for (const char* col : {"m2", "mk_m1", "m3"}) {
            const double d = max_relative_change(s.values(col));
            o.require(d <= 1e-12, std::string(col) + " change " + num(d));
        }
        double qmax = 0.0;
        for (const char* col : {"q_star", "q_tt"})
            for (double v : s.values(col)) qmax = std::max(qmax, std::abs(v));
        o.require(qmax == 0.0, "max q " + num(qmax));
        const double r1 = streaming_residual(17, 0.04), r2 = streaming_residual(33, 0.02),
                     r3 = streaming_residual(65, 0.01);
        const double p1 = std::log2(r1 / r2), p2 = std::log2(r2 / r3);
        o.require(p1 >= 1.0 && p2 >= 1.0, "continuity orders " + num(p1) + ", " + num(p2));
        report(8, "free-streaming suite", o);
    }

    // 9. pusher order
    {
        const double e1 = harmonic_error(0.02), e2 = harmonic_error(0.01), e3 = harmonic_error(0.005);
        const double p1 = std::log2(e1 / e2), p2 = std::log2(e2 / e3);
        Outcome o;
        o.require(std::abs(p1 - 2.0) <= 0.2 && std::abs(p2 - 2.0) <= 0.2, "orders " + num(p1) + ", " + num(p2));
        report(9, "pusher order", o);
    }

    // 10. sweep envelope
    {
        Outcome o;
        for (const auto& e : entries) o.require(e.status == "ok", "eps " + num(e.epsilon) + " " + e.status);
        const auto rep = verify(sweep_dir, 0.25);
        o.require(rep.main_bound.applicable && rep.main_bound.pass,
                  "fit slope " + num(rep.main_bound.slope) + " intercept " + num(rep.main_bound.intercept));
        for (const auto& r : rep.runs)
            o.require(r.time_growth.applicable && r.time_growth.pass,
                      r.run + " growth " + num(r.time_growth.second_half_max / r.time_growth.first_half_max));
        const std::string first = detail::read_file(sweep_dir / "report.json");
        fs::remove(sweep_dir / "report.json");
        verify(sweep_dir, 0.25);
        o.require(detail::read_file(sweep_dir / "report.json") == first, "report reproducible");
        report(10, "epsilon-sweep envelope", o);
    }

    // 11. determinism
    {
        Outcome o;
        for (const char* f : {"timeseries.csv", "field_audit.csv", "q_windows.csv"})
            o.require(same_bytes(base_dir / f, work / "baseline_repeat" / f), f);
        report(11, "determinism under strict reduce", o);
    }

    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
