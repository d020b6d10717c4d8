#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "vpme/field_io.hpp"
#include "vpme/mesh.hpp"

using namespace vpme;

namespace {

GridSpec small_grid() { return GridSpec{2.0, 9}; }  // h = 0.5

ParticleEnsemble random_ensemble(std::size_t n, double spread, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-spread, spread), w(0.1, 1.0);
    std::vector<Vec3> x, v;
    std::vector<double> ws;
    for (std::size_t p = 0; p < n; ++p) {
        x.push_back({u(rng), u(rng), u(rng)});
        v.push_back({u(rng), u(rng), u(rng)});
        ws.push_back(w(rng));
    }
    return ParticleEnsemble::from_state(x, v, ws);
}

}  // namespace

TEST(Grid, Geometry) {
    const GridSpec g{4.0, 48};
    EXPECT_DOUBLE_EQ(g.spacing(), 8.0 / 47.0);
    EXPECT_EQ(g.node_count(), 48u * 48u * 48u);
    EXPECT_EQ(g.index(1, 0, 0), 1u);
    EXPECT_EQ(g.index(0, 1, 0), 48u);
    EXPECT_EQ(g.index(0, 0, 1), 48u * 48u);
    EXPECT_DOUBLE_EQ(g.coord(0), -4.0);
    EXPECT_NEAR(g.coord(47), 4.0, 1e-14);
    EXPECT_TRUE(g.is_boundary(0, 5, 5));
    EXPECT_FALSE(g.is_boundary(1, 5, 46));
    EXPECT_THROW((GridSpec{4.0, 7}).validate(), InvalidArgument);
    EXPECT_THROW((GridSpec{0.0, 16}).validate(), InvalidArgument);
}

TEST(Deposit, ParticleOnNode) {
    const GridSpec g = small_grid();
    const auto e = ParticleEnsemble::from_state({g.node_position(3, 4, 5)}, {{1, 0, 0}}, {1.0});
    const auto rho = deposit_density(e, g);
    const auto j = deposit_current(e, g);
    const double inv_vol = 1.0 / g.cell_volume();
    for (int k = 0; k < g.nodes; ++k)
        for (int jj = 0; jj < g.nodes; ++jj)
            for (int i = 0; i < g.nodes; ++i) {
                const bool here = i == 3 && jj == 4 && k == 5;
                EXPECT_DOUBLE_EQ(rho(i, jj, k), here ? inv_vol : 0.0);
                EXPECT_EQ(j(i, jj, k), (here ? Vec3{inv_vol, 0, 0} : Vec3{}));
            }
}

TEST(Deposit, MassIdentity) {
    const GridSpec g{3.0, 20};
    const auto e = random_ensemble(5000, 2.9, 1);
    const auto rho = deposit_density(e, g);
    EXPECT_NEAR(rho.integral(), e.total_weight(), 1e-12 * e.total_weight());
}

TEST(Deposit, OutOfBoxParticlesAreEscapedMass) {
    const GridSpec g = small_grid();
    const auto e = ParticleEnsemble::from_state({{0.1, 0.2, 0.3}, {2.5, 0, 0}, {0, 0, -3}}, {{}, {}, {}}, {0.5, 0.3, 0.2});
    const auto rho = deposit_density(e, g);
    EXPECT_NEAR(rho.integral(), 0.5, 1e-15);
    EXPECT_NEAR(out_of_box_weight(e, g), 0.5, 1e-15);
    EXPECT_NEAR(rho.integral() + out_of_box_weight(e, g), e.total_weight(), 1e-15);
}

TEST(Deposit, MirrorSymmetry) {
    const GridSpec g = small_grid();
    const auto e = ParticleEnsemble::from_state({{0.3, -0.7, 1.1}, {-0.3, 0.7, -1.1}}, {{}, {}}, {0.5, 0.5});
    const auto rho = deposit_density(e, g);
    const int m = g.nodes - 1;
    for (int k = 0; k <= m; ++k)
        for (int j = 0; j <= m; ++j)
            for (int i = 0; i <= m; ++i) EXPECT_EQ(rho(i, j, k), rho(m - i, m - j, m - k));
}

TEST(Deposit, CurrentLinearity) {
    const GridSpec g{2.0, 12};
    auto e = random_ensemble(500, 1.9, 2);
    EXPECT_EQ(deposit_current(ParticleEnsemble::from_state(e.positions, std::vector<Vec3>(e.size()), e.weights), g)
                  .max_norm(),
              0.0);
    const auto j = deposit_current(e, g);
    for (auto& v : e.velocities) v = -v;
    const auto jn = deposit_current(e, g);
    for (std::size_t m = 0; m < j.values.size(); ++m) EXPECT_EQ(jn.values[m], -j.values[m]);
    Vec3 total{}, expect{};
    for (const auto& v : jn.values) total += v * g.cell_volume();
    for (std::size_t p = 0; p < e.size(); ++p) expect += e.velocities[p] * e.weights[p];
    EXPECT_NEAR(norm(total - expect), 0.0, 1e-12);
}

TEST(Deposit, DensityLinearInWeights) {
    const GridSpec g{2.0, 12};
    auto e = random_ensemble(300, 1.5, 3);
    const auto rho = deposit_density(e, g);
    for (auto& w : e.weights) w *= 3.0;
    const auto rho3 = deposit_density(e, g);
    for (std::size_t m = 0; m < rho.values.size(); ++m) EXPECT_NEAR(rho3.values[m], 3.0 * rho.values[m], 1e-12);
}

TEST(Deposit, ParallelMatchesStrict) {
    const GridSpec g{3.0, 16};
    const auto e = random_ensemble(60000, 2.9, 4);
    const auto a = deposit_density(e, g, ExecutionPolicy{true});
    const auto b = deposit_density(e, g, ExecutionPolicy{false, 4});
    for (std::size_t m = 0; m < a.values.size(); ++m) EXPECT_NEAR(a.values[m], b.values[m], 1e-12);
}

TEST(Interpolate, ConstantAndNodalValues) {
    const GridSpec g = small_grid();
    VectorField f(g);
    for (auto& v : f.values) v = {1.5, -2.0, 0.25};
    EXPECT_EQ(interpolate(f, {0.123, -1.7, 1.99}), (Vec3{1.5, -2.0, 0.25}));
    EXPECT_EQ(interpolate(f, {2.5, 0, 0}), Vec3{});
    ScalarField s(g);
    for (std::size_t m = 0; m < s.values.size(); ++m) s.values[m] = static_cast<double>(m);
    EXPECT_DOUBLE_EQ(interpolate(s, g.node_position(2, 7, 4)), s(2, 7, 4));
    EXPECT_EQ(interpolate(s, {0, 0, 2.01}), 0.0);
}

TEST(Interpolate, ExactForLinearFields) {
    const GridSpec g{2.0, 11};
    ScalarField s(g);
    for (int k = 0; k < g.nodes; ++k)
        for (int j = 0; j < g.nodes; ++j)
            for (int i = 0; i < g.nodes; ++i) {
                const Vec3 x = g.node_position(i, j, k);
                s(i, j, k) = 1.0 + 2.0 * x.x - 0.5 * x.y + 3.0 * x.z;
            }
    for (const Vec3 x : {Vec3{0.31, -1.2, 0.77}, Vec3{-1.99, 1.99, 0.0}, Vec3{2.0, 2.0, 2.0}})
        EXPECT_NEAR(interpolate(s, x), 1.0 + 2.0 * x.x - 0.5 * x.y + 3.0 * x.z, 1e-13);
}

TEST(Interpolate, AdjointPairingWithDeposit) {
    const GridSpec g{2.0, 13};
    const auto e = random_ensemble(2000, 2.3, 5);  // some particles outside
    std::mt19937_64 rng(6);
    std::normal_distribution<double> n;
    VectorField F(g);
    for (auto& v : F.values) v = {n(rng), n(rng), n(rng)};
    ScalarField S(g);
    for (auto& v : S.values) v = n(rng);
    const auto rho = deposit_density(e, g);
    Vec3 lhs{}, rhs{};
    double ls = 0.0, rs = 0.0;
    for (std::size_t p = 0; p < e.size(); ++p) {
        lhs += interpolate(F, e.positions[p]) * e.weights[p];
        ls += interpolate(S, e.positions[p]) * e.weights[p];
    }
    for (std::size_t m = 0; m < rho.values.size(); ++m) {
        rhs += F.values[m] * (rho.values[m] * g.cell_volume());
        rs += S.values[m] * rho.values[m] * g.cell_volume();
    }
    EXPECT_NEAR(norm(lhs - rhs), 0.0, 1e-10);
    EXPECT_NEAR(ls, rs, 1e-10);
}

TEST(Background, GaussianNormalized) {
    const GridSpec g{4.0, 32};
    SpatialProfile p;
    const auto a = evaluate_g(p, g);
    const auto b = evaluate_g(p, g);
    EXPECT_NEAR(a.integral(), 1.0, 1e-12);
    EXPECT_EQ(a.values, b.values);
    for (double v : a.values) EXPECT_GE(v, 0.0);
    EXPECT_FALSE(background_warning(p, g).has_value());
}

TEST(Background, UniformBallValue) {
    const GridSpec g{4.0, 48};
    SpatialProfile p;
    p.kind = SpatialProfile::Kind::uniform_ball;
    p.width = 1.5;
    const auto f = evaluate_g(p, g);
    EXPECT_NEAR(f.integral(), 1.0, 1e-12);
    const double expect = 3.0 / (4.0 * std::numbers::pi * 1.5 * 1.5 * 1.5);
    EXPECT_NEAR(f(24, 24, 24), expect, 1e-3 * expect);
    EXPECT_EQ(f(2, 2, 2), 0.0);
}

TEST(Background, WarnsWhenProfileLeavesBox) {
    SpatialProfile p;
    p.width = 2.0;
    EXPECT_TRUE(background_warning(p, GridSpec{4.0, 16}).has_value());
    p.kind = SpatialProfile::Kind::uniform_ball;
    p.center = {3.5, 0, 0};
    p.width = 1.0;
    EXPECT_TRUE(background_warning(p, GridSpec{4.0, 16}).has_value());
}

TEST(Profile, MassOutsideBoxMatchesQuadrature) {
    SpatialProfile p;
    p.width = 1.0;
    p.center = {0.5, 0, 0};
    // 1 - Π_a ∫_{-L}^{L} exp(-(x-c)²/w²)/(√π w) dx, by Simpson
    const double L = 2.0;
    double inside = 1.0;
    for (int a = 0; a < 3; ++a) {
        const int n = 20000;
        const double hh = 2 * L / n;
        auto f = [&](double x) {
            const double d = x - p.center[a];
            return std::exp(-d * d) / std::sqrt(std::numbers::pi);
        };
        double s = f(-L) + f(L);
        for (int i = 1; i < n; ++i) s += f(-L + i * hh) * (i % 2 ? 4 : 2);
        inside *= s * hh / 3;
    }
    EXPECT_NEAR(p.mass_outside_box(L), 1.0 - inside, 1e-10);
}

TEST(Snapshot, RoundTrip) {
    const GridSpec g{1.5, 9};
    ScalarField s(g);
    VectorField v(g);
    for (std::size_t m = 0; m < s.values.size(); ++m) {
        s.values[m] = std::sin(0.1 * m);
        v.values[m] = {double(m), -double(m), 0.5 * m};
    }
    const auto dir = std::filesystem::temp_directory_path() / "vpme_snapshot_test";
    std::filesystem::create_directories(dir);
    write_snapshot((dir / "s.bin").string(), "U", s);
    write_snapshot((dir / "v.bin").string(), "E", v);
    const auto rs = read_snapshot((dir / "s.bin").string());
    EXPECT_EQ(rs.name, "U");
    EXPECT_EQ(rs.components, 1u);
    EXPECT_EQ(rs.grid, g);
    EXPECT_EQ(rs.data, s.values);
    const auto rv = read_snapshot((dir / "v.bin").string());
    EXPECT_EQ(rv.components, 3u);
    ASSERT_EQ(rv.data.size(), 3 * v.values.size());
    EXPECT_EQ(rv.data[3 * 7 + 1], -7.0);
    // size: 8 magic + 4 + 4 + 8 + 8 + 4 + name + payload
    EXPECT_EQ(std::filesystem::file_size(dir / "s.bin"), 8u + 4 + 4 + 8 + 8 + 4 + 1 + 8 * s.values.size());

    std::ofstream bad(dir / "bad.bin", std::ios::binary);
    bad << "NOTAFILE";
    bad.close();
    EXPECT_THROW(read_snapshot((dir / "bad.bin").string()), SchemaError);
    std::filesystem::remove_all(dir);
}
