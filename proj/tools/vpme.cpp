// vpme command-line driver.
//
//   vpme run --config F --out DIR [--seed N] [--strict-reduce]
//   vpme sweep --config F --epsilon a,b,c --out DIR [--strict-reduce]
//   vpme verify --path DIR [--omega W]
//   vpme plot-data --path DIR
//
// Exit codes: 0 ok, 1 usage, 2 solver failure, 3 escaped-mass gate.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "vpme/simulation.hpp"

namespace {

int report_run(const vpme::RunResult& r, const std::string& out) {
    std::printf("%s: %s, %ld steps, %zu checkpoints, %.1f s\n", out.c_str(), r.status.c_str(), r.steps_completed,
                r.series.size(), r.wall_time_s);
    for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    for (const auto& a : r.advisories) std::fprintf(stderr, "advisory: %s\n", a.c_str());
    if (!r.message.empty()) std::fprintf(stderr, "error: %s\n", r.message.c_str());
    return static_cast<int>(r.exit_code);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Particle-mesh simulator for ions with Boltzmann electrons"};
    app.require_subcommand(1);

    std::string config, out, path;
    std::optional<std::uint64_t> seed;
    std::optional<double> omega;
    bool strict = false;
    std::vector<double> epsilons;

    auto* run = app.add_subcommand("run", "Run one scenario");
    run->add_option("--config", config, "Scenario file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "Output directory")->required();
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_flag("--strict-reduce", strict, "Serial fixed-order reductions (bitwise reproducible)");

    auto* sw = app.add_subcommand("sweep", "Run the scenario once per epsilon");
    sw->add_option("--config", config, "Scenario file")->required()->check(CLI::ExistingFile);
    sw->add_option("--epsilon", epsilons, "Comma-separated epsilon values")->required()->delimiter(',');
    sw->add_option("--out", out, "Output directory")->required();
    sw->add_flag("--strict-reduce", strict, "Serial fixed-order reductions (bitwise reproducible)");

    auto* ver = app.add_subcommand("verify", "Audit the bounds on a run or sweep directory");
    ver->add_option("--path", path, "Run or sweep directory")->required();
    ver->add_option("--omega", omega, "Time exponent in (0, 1)");

    auto* plot = app.add_subcommand("plot-data", "Write plot-ready TSV files");
    plot->add_option("--path", path, "Run or sweep directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    const vpme::ExecutionPolicy policy{strict};
    try {
        if (*run) {
            auto cfg = vpme::load_config(config);
            if (seed) cfg.seed = *seed;
            return report_run(vpme::run(cfg, out, policy), out);
        }
        if (*sw) {
            const auto cfg = vpme::load_config(config);
            const auto entries = vpme::sweep(cfg, epsilons, out, policy);
            int worst = 0;
            for (const auto& e : entries) {
                std::printf("eps = %s: %s\n", vpme::format_double(e.epsilon).c_str(), e.status.c_str());
                if (!e.message.empty()) std::fprintf(stderr, "%s: %s\n", e.dir.c_str(), e.message.c_str());
                worst = std::max(worst, e.exit_code);
            }
            return worst;
        }
        if (*ver) {
            const auto rep = vpme::verify(path, omega);
            std::printf("%s/report.json: %s\n", path.c_str(), rep.pass ? "pass" : "FAIL");
            return rep.pass ? 0 : 1;
        }
        if (*plot) {
            vpme::plot_data(path);
            return 0;
        }
    } catch (const vpme::InvalidArgument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const vpme::SchemaError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const vpme::SolverError& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
