// oma-va: experiment runner for the guaranteed-withdrawal annuity library.
//
//   oma-va run --config cfg.json [--seed N] [--out dir]
//   oma-va validate --config cfg.json
//
// Exit codes: 0 ok, 2 invalid config, 3 numerical failure.

#include "oma/errors.hpp"
#include "oma/parallel.hpp"
#include "oma/run_config.hpp"

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cstdio>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"out-of-model adjustments for variable annuities"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;

    auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--seed", seed, "override the config seed")
        ->each([&](const std::string&) { seed_given = true; });
    run->add_option("--out", out_dir, "override the output directory");

    auto* validate = app.add_subcommand("validate", "validate a JSON config");
    validate->add_option("--config", config_path, "config file")->required();

    CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
    omp_set_num_threads(oma::par::max_threads());
#endif

    try {
        oma::RunConfig cfg = oma::parse_config_file(config_path);
        if (seed_given) {
            cfg.seed = seed;
            cfg.seed_set = true;
        }
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (validate->parsed()) {
            oma::validate_config(cfg);
            std::cout << "config OK: " << cfg.experiment << "\n";
            return 0;
        }
        const auto files = oma::run_experiment(cfg);
        for (const auto& f : files) std::cout << "wrote " << f << "\n";
        return 0;
    } catch (const oma::InvalidInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const oma::NumericFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
