#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "vpme/bound_verifier.hpp"
#include "vpme/diagnostics.hpp"
#include "vpme/pusher.hpp"

using namespace vpme;

namespace {

Table series_with(const std::vector<std::string>& cols, const std::vector<std::vector<double>>& rows) {
    return Table{cols, rows};
}

// Runs a frozen force through the pusher and returns the recorded series.
template <class Force>
Table pushed_series(ParticleEnsemble e, Force&& force, double dt, int steps, int every) {
    const GridSpec g{8.0, 8};
    const auto bg = evaluate_g(SpatialProfile{}, g);
    DiagnosticsRecorder rec(2.5);
    auto rho = deposit_density(e, g);
    rec.record(e, {0.0, &rho, &bg, nullptr, 0.0});
    for (int s = 1; s <= steps; ++s) {
        step(e, force, dt);
        if (s % every == 0) rec.record(e, {s * dt, &rho, &bg, nullptr, 0.0});
    }
    Table t{timeseries_columns(), {}};
    for (const auto& r : rec.series()) t.rows.push_back(to_row(r));
    return t;
}

}  // namespace

TEST(MomentBound, FreeStreamingRatioIsTwoToMinusK) {
    InitialDistributionSpec spec;
    const auto e = sample_initial(spec, 1000, 5);
    const auto t = pushed_series(e, [](const Vec3&) { return Vec3{}; }, 0.01, 50, 10);
    for (auto [col, k] : {std::pair{"m2", 2.0}, std::pair{"m3", 3.0}}) {
        const auto v = check_moment_bound(t, col, k);
        EXPECT_NEAR(v.max_ratio, std::pow(2.0, -k), 1e-12);
        EXPECT_TRUE(v.pass);
    }
}

TEST(MomentBound, ConstantForceHoldsPerParticle) {
    // |v0 + a t|^k ≤ 2^{k-1}(|v0|^k + |a t|^k) pointwise, so the ratio stays ≤ 1/2.
    InitialDistributionSpec spec;
    const auto e = sample_initial(spec, 1000, 6);
    const Vec3 a{0.0, 3.0, -4.0};
    const auto t = pushed_series(e, [&](const Vec3&) { return a; }, 0.01, 200, 10);
    const auto qs = t.values("q_star");
    EXPECT_NEAR(qs.back(), 5.0 * 2.0, 1e-9);
    for (auto [col, k] : {std::pair{"m2", 2.0}, std::pair{"m3", 3.0}}) {
        const auto v = check_moment_bound(t, col, k);
        EXPECT_LE(v.max_ratio, 0.5 + 1e-12);
        EXPECT_TRUE(v.pass);
    }
    EXPECT_TRUE(check_q_order(t).pass);
}

TEST(MomentBound, ViolationDetected) {
    const auto t = series_with({"m2", "q_star"}, {{1.0, 0.0}, {5.0, 0.0}});
    const auto v = check_moment_bound(t, "m2", 2.0);
    EXPECT_DOUBLE_EQ(v.max_ratio, 1.25);
    EXPECT_FALSE(v.pass);
}

TEST(MomentBound, MissingColumnThrows) {
    const auto t = series_with({"m2"}, {{1.0}});
    EXPECT_THROW(check_moment_bound(t, "m2", 2.0), SchemaError);
    EXPECT_THROW(check_moment_bound(t, "m3", 3.0), SchemaError);
}

TEST(QOrder, ToleranceBoundary) {
    auto t = series_with({"q_star", "q_tt"}, {{0.0, 0.0}, {1.0, 1.0 - 5e-9}});
    EXPECT_TRUE(check_q_order(t).pass);
    t.rows[1][1] = 1.0 - 2e-8;
    EXPECT_FALSE(check_q_order(t).pass);
}

TEST(Density, GateOnFittedConstant) {
    auto t = series_with({"rho_inf", "q_star"}, {{1.0, 0.0}, {9.0, 1.0}, {20.0, 2.0}});
    auto v = check_density_bound(t);
    EXPECT_DOUBLE_EQ(v.initial_ratio, 1.0);
    EXPECT_DOUBLE_EQ(v.fitted_C, 4.5);
    EXPECT_TRUE(v.pass);
    t.rows[1][0] = 25.0;
    EXPECT_FALSE(check_density_bound(t).pass);
}

TEST(TimeGrowth, LinearQPasses) {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i <= 20; ++i) rows.push_back({0.05 * i, 0.05 * i});
    const auto v = check_time_growth(series_with({"t", "q_tt"}, rows), 0.25);
    EXPECT_TRUE(v.pass);
    // t/(√t + t^{5/4}) still rises on [0,1]; maxima at t = 0.5 and t = 1
    EXPECT_NEAR(v.first_half_max, 0.5 / (std::sqrt(0.5) + std::pow(0.5, 1.25)), 1e-12);
    EXPECT_NEAR(v.B, 0.5, 1e-12);
}

TEST(TimeGrowth, ZeroQPasses) {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i <= 20; ++i) rows.push_back({0.05 * i, 0.0});
    const auto v = check_time_growth(series_with({"t", "q_tt"}, rows), 0.25);
    EXPECT_TRUE(v.pass);
    EXPECT_EQ(v.B, 0.0);
}

TEST(TimeGrowth, ExponentialGrowthFails) {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i <= 20; ++i) rows.push_back({0.5 * i, std::exp(0.5 * i)});
    EXPECT_FALSE(check_time_growth(series_with({"t", "q_tt"}, rows), 0.25).pass);
}

TEST(TimeGrowth, Errors) {
    std::vector<std::vector<double>> rows(5, {1.0, 1.0});
    EXPECT_THROW(check_time_growth(series_with({"t", "q_tt"}, rows), 0.25), InvalidArgument);
    rows.assign(12, {1.0, 1.0});
    EXPECT_THROW(check_time_growth(series_with({"t", "q_tt"}, rows), 1.0), InvalidArgument);
    EXPECT_THROW(check_time_growth(series_with({"t", "q_tt"}, rows), 0.0), InvalidArgument);
}

TEST(MainBound, RecoversExponent) {
    std::vector<SweepPoint> pts;
    const double omega = 0.25, T = 1.3;
    for (double eps : {1.0, 0.8, 0.6, 0.5})
        pts.push_back({eps, T, 0.7 * std::exp(2.0 / (eps * eps)) * time_factor(T, omega)});
    const auto f = fit_main_bound(pts, omega);
    EXPECT_TRUE(f.applicable);
    EXPECT_NEAR(f.slope, 2.0, 1e-6);
    EXPECT_NEAR(f.intercept, std::log(0.7), 1e-6);
    EXPECT_TRUE(f.pass);
}

TEST(MainBound, ConstantQPasses) {
    std::vector<SweepPoint> pts = {{1.0, 1.0, 1.0}, {0.7, 1.0, 1.0}, {0.5, 1.0, 1.0}};
    const auto f = fit_main_bound(pts, 0.25);
    EXPECT_NEAR(f.slope, 0.0, 1e-12);
    EXPECT_TRUE(f.pass);
}

TEST(MainBound, OutlierAboveEnvelopeFails) {
    std::vector<SweepPoint> pts = {{1.0, 1.0, 1.0}, {0.7, 1.0, 2.0}, {0.5, 1.0, 1.0}};
    EXPECT_FALSE(fit_main_bound(pts, 0.25).pass);
}

TEST(MainBound, Errors) {
    std::vector<SweepPoint> two = {{1.0, 1.0, 1.0}, {0.5, 1.0, 1.0}, {0.5, 1.0, 2.0}};
    EXPECT_THROW(fit_main_bound(two, 0.25), InvalidArgument);
    std::vector<SweepPoint> zero = {{1.0, 1.0, 1.0}, {0.7, 1.0, 0.0}, {0.5, 1.0, 1.0}};
    EXPECT_THROW(fit_main_bound(zero, 0.25), InvalidArgument);
}

TEST(Trends, ExponentialEnvelope) {
    std::vector<TrendRow> rows;
    for (double eps : {1.0, 0.7, 0.5}) {
        TrendRow r;
        r.epsilon = eps;
        r.ehat_sup = 0.3 / (eps * eps) * std::exp(0.1 / (eps * eps));
        rows.push_back(r);
    }
    const auto tr = electron_trends(rows);
    EXPECT_NEAR(tr.fitted_c0, 0.1, 1e-9);
    EXPECT_TRUE(tr.envelope_pass);
    EXPECT_TRUE(tr.ehat_nondecreasing_as_eps_shrinks);
    EXPECT_NEAR(tr.rows[2].envelope, rows[2].ehat_sup, 1e-9);
}

TEST(Report, RoundTripAndDeterministicText) {
    BoundReport r;
    RunReport run;
    run.run = "eps_0.5";
    run.epsilon = 0.5;
    run.seed = 7;
    run.moments.push_back({2.0, "m2", 0.25, 1.0 + 1e-9, true});
    r.runs.push_back(run);
    std::vector<SweepPoint> pts = {{1.0, 1.0, 1.0}, {0.7, 1.0, 1.5}, {0.5, 1.0, 3.0}};
    r.main_bound = fit_main_bound(pts, 0.25);
    const auto text = report_to_text(r);
    EXPECT_EQ(text, report_to_text(report_from_text(text)));
    EXPECT_EQ(report_from_text(text).runs[0].moments[0].column, "m2");
    EXPECT_THROW(report_from_text("{\"schema\": 3"), SchemaError);
}

TEST(Report, TruncatedCsvRejected) {
    const auto dir = std::filesystem::temp_directory_path() / "vpme_bv_trunc";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "ts.csv").string();
    {
        std::ofstream os(path);
        os << "t,q_tt\n0,0\n0.1\n";
    }
    EXPECT_THROW(read_table(path), SchemaError);
    {
        std::ofstream os(path);
        os << "t,q\n0,0\n";
    }
    EXPECT_THROW(read_table(path, ',', {"t", "q_tt"}), SchemaError);
    std::filesystem::remove_all(dir);
}
