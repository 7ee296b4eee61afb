#include "bellsim/config.hpp"
#include "bellsim/presets.hpp"
#include "bellsim/run.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace bellsim;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("bellsim_test_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int shell(const std::string& cmd)
{
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("config parse and round trip")
{
    const RunConfig c = parse_config(R"(
        # comment line
        engine = lattice-stochastic
        sites = 3     # trailing comment
        spinor_dim = 2
        mass = 0.75
        coupling = 0.25
        interaction_scaling = volume
        omega = 2
        preset = configuration(1, 0, 1)
        ensemble_size = 250
        t_max = 1.5
        checkpoints = 0.5, 1.5
        tv_tolerance = 0.05
        node_threshold = 1e-11
        seed = 99
        out_dir = somewhere
    )");
    CHECK(c.engine == Engine::LatticeStochastic);
    CHECK(c.lattice.sites == 3);
    CHECK(c.lattice.mass == 0.75);
    CHECK(c.lattice.coupling == 0.25);
    CHECK(c.lattice.interaction_scaling == InteractionScaling::Volume);
    CHECK(c.preset == "configuration(1, 0, 1)");
    CHECK(c.checkpoints == std::vector<double>{0.5, 1.5});
    CHECK(c.tv_tolerance == 0.05);
    CHECK(c.node_threshold == 1e-11);
    CHECK(c.seed == 99u);
    CHECK(parse_config(serialize(c)) == c);

    RunConfig d;
    d.lattice.mass = 0.1;
    d.dt = 1.0 / 3.0;
    d.checkpoints = {std::numbers::pi / 4.0};
    d.t_max = 1.0;
    CHECK(parse_config(serialize(d)) == d);
}

TEST_CASE("config errors")
{
    CHECK_THROWS_AS(parse_config("bogus = 1"), ConfigError);
    CHECK_THROWS_AS(parse_config("sites = 2\nsites = 3"), ConfigError);
    CHECK_THROWS_AS(parse_config("sites 2"), ConfigError);
    CHECK_THROWS_AS(parse_config("sites = two"), ConfigError);
    CHECK_THROWS_AS(parse_config("mass = 1.0x"), ConfigError);
    CHECK_THROWS_AS(parse_config("engine = quantum"), ConfigError);
    CHECK_THROWS_AS(parse_config("checkpoints = 0.5,,1"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/bellsim.cfg"), ConfigError);

    RunConfig c;
    c.engine = Engine::LatticeStochastic;
    c.ensemble_size = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = RunConfig{};
    c.lattice.mass = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = RunConfig{};
    c.checkpoints = {2.0};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = RunConfig{};
    c.checkpoints = {0.8, 0.4};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = RunConfig{};
    c.dt_floor = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = RunConfig{};
    c.omega = 9;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = RunConfig{};
    c.engine = Engine::ContinuumDeterministic;
    c.omega = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_NOTHROW(RunConfig{}.validate());
}

TEST_CASE("preset parsing")
{
    const PresetCall p = parse_preset("slater-packets(1, 0.5, 3.5, -1, 0.5, 6.5)");
    CHECK(p.name == "slater-packets");
    CHECK(p.args == std::vector<double>{1, 0.5, 3.5, -1, 0.5, 6.5});
    CHECK(parse_preset("vacuum").args.empty());
    CHECK_THROWS_AS(parse_preset("basis(1"), ConfigError);
    CHECK_THROWS_AS(parse_preset("basis(x)"), ConfigError);

    const auto b = std::make_shared<const ModeBasis>(10.0, 8, 1.0);
    CHECK(continuum_preset("gaussian-packet(0.8, 0.4)", b, 1).norm_squared() == doctest::Approx(1.0));
    CHECK(continuum_preset("slater-packets(1, 0.5, 3.5, -1, 0.5, 6.5)", b, 2).is_antisymmetric());
    CHECK_FALSE(continuum_preset("product-packets(1, 0.5, 3.5, -1, 0.5, 6.5)", b, 2).is_antisymmetric());
    CHECK_THROWS_AS(continuum_preset("nothing", b, 1), ConfigError);
    CHECK_THROWS_AS(continuum_preset("single-mode(99)", b, 1), ConfigError);
    CHECK_THROWS_AS(continuum_preset("single-mode(1)", b, 2), ConfigError);
}

TEST_CASE("verify engine passes and writes a report")
{
    RunConfig c = parse_config("engine = verify\nsites = 2\ncoupling = 0.5\nt_max = 1\ncheckpoints = 0.5, 1");
    c.out_dir = scratch("verify").string();
    const RunReport r = run(c);
    for (const Check& check : r.checks) {
        INFO(check.name << " = " << check.value);
        CHECK(check.pass);
    }
    CHECK(r.exit_code() == kExitPass);
    CHECK(fs::exists(fs::path(c.out_dir) / "report.json"));
    CHECK(fs::exists(fs::path(c.out_dir) / "verify.json"));
    CHECK(fs::exists(fs::path(c.out_dir) / "timing.txt"));
}

TEST_CASE("invalid runs raise ConfigError before writing")
{
    RunConfig c;
    c.engine = Engine::LatticeStochastic;
    c.ensemble_size = 0;
    c.out_dir = scratch("invalid").string();
    CHECK_THROWS_AS((void)run(c), ConfigError);
    CHECK_FALSE(fs::exists(c.out_dir));
}

TEST_CASE("single-mode continuum run: straight lines")
{
    RunConfig c = parse_config(R"(
        engine = continuum-deterministic
        box_length = 10
        n_max = 4
        mass = 1
        omega = 1
        preset = single-mode(2)
        ensemble_size = 200
        t_max = 1
        checkpoints = 0.5, 1
        dt = 0.01
        boxes = 8
        recorded_paths = 4
        seed = 3
    )");
    c.out_dir = scratch("straight").string();
    const RunReport r = run(c);
    CHECK(r.exit_code() == kExitPass);

    const double p = 2.0 * std::numbers::pi * 2 / 10.0;
    const double v = p / std::sqrt(p * p + 1.0);
    std::ifstream in(fs::path(c.out_dir) / "trajectories.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "trajectory,t,x1");
    std::map<int, double> start;
    int rows = 0;
    while (std::getline(in, line)) {
        std::istringstream s(line);
        int id = 0;
        double t = 0, x = 0;
        char comma = 0;
        s >> id >> comma >> t >> comma >> x;
        if (!start.count(id)) {
            start[id] = x;
        }
        double diff = std::fmod(x - (start[id] + v * t), 10.0);
        diff = std::min(std::abs(diff), 10.0 - std::abs(diff));
        CHECK(diff < 1e-9);
        ++rows;
    }
    CHECK(start.size() == 4);
    CHECK(rows == 4 * 101);
}

TEST_CASE("CLI exit codes")
{
    const fs::path dir = scratch("cli");
    fs::create_directories(dir);
    const std::string cli = BELLSIM_CLI_PATH;

    std::ofstream(dir / "bad.cfg") << "engine = lattice-stochastic\nensemble_size = 0\nout_dir = " << (dir / "bad").string()
                                   << '\n';
    CHECK(shell(cli + " run " + (dir / "bad.cfg").string() + " > /dev/null 2>&1") == kExitConfig);
    CHECK(shell(cli + " run " + (dir / "missing.cfg").string() + " > /dev/null 2>&1") == kExitConfig);
    CHECK(shell(cli + " frobnicate > /dev/null 2>&1") == kExitConfig);

    std::ofstream(dir / "ok.cfg") << "engine = verify\nsites = 2\nout_dir = " << (dir / "ok").string() << '\n';
    CHECK(shell(cli + " run " + (dir / "ok.cfg").string() + " > /dev/null 2>&1") == kExitPass);
    // Overrides: a zero ensemble on the command line is also a config error.
    CHECK(shell(cli + " run " + (dir / "ok.cfg").string() +
                " --engine lattice-stochastic --ensemble-size 0 > /dev/null 2>&1") == kExitConfig);
    CHECK(shell(cli + " dump-basis " + (dir / "ok.cfg").string() + " > " + (dir / "basis.json").string()) == 0);
    CHECK(slurp(dir / "basis.json").find('{') != std::string::npos);
}

TEST_CASE("node visit exits with the physics-abort code")
{
    RunConfig c = parse_config(R"(
        engine = continuum-deterministic
        box_length = 10
        n_max = 4
        preset = single-mode(1)
        ensemble_size = 20
        checkpoints = 1
        dt = 0.01
        boxes = 4
        node_threshold = 1
    )");
    c.out_dir = scratch("abort").string();
    const RunReport r = run(c);
    CHECK_FALSE(r.aborts.empty());
    CHECK(r.exit_code() == kExitPhysicsAbort);
}

TEST_CASE("identical seeds give identical artifacts")
{
    RunConfig c = parse_config(R"(
        engine = lattice-stochastic
        sites = 3
        coupling = 0.5
        omega = 2
        preset = random
        ensemble_size = 300
        t_max = 1
        checkpoints = 0.5, 1
        dt = 0.002
        recorded_paths = 5
        seed = 42
    )");
    c.out_dir = scratch("repro_a").string();
    const RunReport a = run(c, 1);
    RunConfig c2 = c;
    c2.out_dir = scratch("repro_b").string();
    const RunReport b = run(c2, 2);
    REQUIRE(a.artifacts == b.artifacts);
    for (const std::string& name : a.artifacts) {
        if (name == "report.json") {
            continue; // embeds out_dir
        }
        INFO(name);
        CHECK(slurp(fs::path(c.out_dir) / name) == slurp(fs::path(c2.out_dir) / name));
    }
}
