// bellsim run <config> [--seed N] [--out-dir DIR] [--ensemble-size N] [--checkpoints t1,t2] [--engine E]
// bellsim dump-basis <config>
// bellsim dump-spectrum <config>
//
// Worker threads: BELLSIM_THREADS (default: hardware concurrency).

#include "bellsim/config.hpp"
#include "bellsim/errors.hpp"
#include "bellsim/run.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <thread>

namespace {

unsigned thread_count()
{
    if (const char* env = std::getenv("BELLSIM_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) {
            return static_cast<unsigned>(v);
        }
        std::cerr << "ignoring BELLSIM_THREADS=" << env << '\n';
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Stochastic and deterministic beable dynamics for lattice and continuum Dirac fermions"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::size_t> ensemble_size;
    std::optional<std::string> checkpoints;
    std::optional<std::string> engine;

    CLI::App* run = app.add_subcommand("run", "run an engine and write its artifacts");
    run->add_option("config", config_path, "config file")->required();
    run->add_option("--seed", seed, "master seed of the ensemble");
    run->add_option("--out-dir", out_dir, "output directory");
    run->add_option("--ensemble-size", ensemble_size, "number of trajectories");
    run->add_option("--checkpoints", checkpoints, "comma-separated checkpoint times");
    run->add_option("--engine", engine, "verify | lattice-stochastic | continuum-deterministic");

    std::string dump_path;
    CLI::App* basis = app.add_subcommand("dump-basis", "print the sector basis as JSON");
    basis->add_option("config", dump_path, "config file")->required();
    CLI::App* spectrum = app.add_subcommand("dump-spectrum", "print the sector Hamiltonian and its spectrum as JSON");
    spectrum->add_option("config", dump_path, "config file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : bellsim::kExitConfig;
    }

    try {
        if (*basis || *spectrum) {
            const bellsim::RunConfig config = bellsim::load_config(dump_path);
            std::cout << (*basis ? bellsim::dump_basis_json(config) : bellsim::dump_spectrum_json(config)) << '\n';
            return bellsim::kExitPass;
        }

        bellsim::RunConfig config = bellsim::load_config(config_path);
        if (seed) {
            config.seed = *seed;
        }
        if (out_dir) {
            config.out_dir = *out_dir;
        }
        if (ensemble_size) {
            config.ensemble_size = *ensemble_size;
        }
        if (checkpoints) {
            config.checkpoints = bellsim::parse_real_list(*checkpoints);
        }
        if (engine) {
            config.engine = bellsim::parse_engine(*engine);
        }

        const bellsim::RunReport report = bellsim::run(config, thread_count());
        for (const bellsim::Check& c : report.checks) {
            std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.value << ' ' << c.relation << ' '
                      << c.threshold << '\n';
        }
        for (const auto& [name, value] : report.diagnostics) {
            std::cout << "info " << name << ": " << value << '\n';
        }
        for (std::size_t i = 0; i < report.aborts.size() && i < 10; ++i) {
            std::cerr << "abort " << report.aborts[i] << '\n';
        }
        if (report.aborts.size() > 10) {
            std::cerr << "... " << report.aborts.size() - 10 << " more aborts in report.json\n";
        }
        std::cerr << "elapsed " << report.elapsed_seconds << " s, artifacts in " << config.out_dir << '\n';
        return report.exit_code();
    } catch (const bellsim::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return bellsim::kExitConfig;
    } catch (const bellsim::NodeVisitError& e) {
        std::cerr << e.what() << '\n';
        return bellsim::kExitPhysicsAbort;
    } catch (const bellsim::StepFloorError& e) {
        std::cerr << e.what() << '\n';
        return bellsim::kExitPhysicsAbort;
    } catch (const std::domain_error& e) {
        std::cerr << "config: " << e.what() << '\n';
        return bellsim::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return bellsim::kExitCheckFailed;
    }
}
