#include "bellsim/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace bellsim {

namespace {

std::string trim(std::string_view s)
{
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string_view::npos) {
        return {};
    }
    const auto end = s.find_last_not_of(" \t\r");
    return std::string(s.substr(begin, end - begin + 1));
}

double to_double(const std::string& key, const std::string& value)
{
    errno = 0;
    char* end = nullptr;
    const double d = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE || !std::isfinite(d)) {
        throw ConfigError("config: " + key + " expects a finite real, got '" + value + "'");
    }
    return d;
}

long long to_integer(const std::string& key, const std::string& value)
{
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(value.c_str(), &end, 10);
    if (value.empty() || end != value.c_str() + value.size() || errno == ERANGE) {
        throw ConfigError("config: " + key + " expects an integer, got '" + value + "'");
    }
    return v;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& value)
{
    errno = 0;
    char* end = nullptr;
    if (value.empty() || value.front() == '-') {
        throw ConfigError("config: " + key + " expects a non-negative integer, got '" + value + "'");
    }
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (end != value.c_str() + value.size() || errno == ERANGE) {
        throw ConfigError("config: " + key + " expects a non-negative integer, got '" + value + "'");
    }
    return v;
}

int to_int(const std::string& key, const std::string& value)
{
    const long long v = to_integer(key, value);
    if (v < -1000000000LL || v > 1000000000LL) {
        throw ConfigError("config: " + key + " is out of range");
    }
    return static_cast<int>(v);
}

std::string real(double d)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter, std::less<>>& setters()
{
    static const std::map<std::string, Setter, std::less<>> table{
        {"engine", [](RunConfig& c, const std::string&, const std::string& v) { c.engine = parse_engine(v); }},
        {"sites", [](RunConfig& c, const std::string& k, const std::string& v) { c.lattice.sites = to_int(k, v); }},
        {"spinor_dim",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.lattice.spinor_dim = to_int(k, v); }},
        {"mass", [](RunConfig& c, const std::string& k, const std::string& v) { c.lattice.mass = to_double(k, v); }},
        {"coupling",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.lattice.coupling = to_double(k, v); }},
        {"spacing",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.lattice.spacing = to_double(k, v); }},
        {"interaction_scaling",
         [](RunConfig& c, const std::string&, const std::string& v) {
             c.lattice.interaction_scaling = parse_interaction_scaling(v);
         }},
        {"box_length", [](RunConfig& c, const std::string& k, const std::string& v) { c.box_length = to_double(k, v); }},
        {"n_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.n_max = to_int(k, v); }},
        {"omega", [](RunConfig& c, const std::string& k, const std::string& v) { c.omega = to_int(k, v); }},
        {"preset", [](RunConfig& c, const std::string&, const std::string& v) { c.preset = v; }},
        {"state_seed",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.state_seed = to_unsigned(k, v); }},
        {"ensemble_size",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.ensemble_size = to_unsigned(k, v); }},
        {"t0", [](RunConfig& c, const std::string& k, const std::string& v) { c.t0 = to_double(k, v); }},
        {"t_max", [](RunConfig& c, const std::string& k, const std::string& v) { c.t_max = to_double(k, v); }},
        {"checkpoints",
         [](RunConfig& c, const std::string&, const std::string& v) { c.checkpoints = parse_real_list(v); }},
        {"dt", [](RunConfig& c, const std::string& k, const std::string& v) { c.dt = to_double(k, v); }},
        {"dt_floor", [](RunConfig& c, const std::string& k, const std::string& v) { c.dt_floor = to_double(k, v); }},
        {"node_threshold",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.node_threshold = to_double(k, v); }},
        {"boxes", [](RunConfig& c, const std::string& k, const std::string& v) { c.boxes = to_int(k, v); }},
        {"tv_tolerance",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.tv_tolerance = to_double(k, v); }},
        {"recorded_paths",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.recorded_paths = to_unsigned(k, v); }},
        {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_unsigned(k, v); }},
        {"out_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
    };
    return table;
}

} // namespace

std::string to_string(Engine e)
{
    switch (e) {
    case Engine::Verify:
        return "verify";
    case Engine::LatticeStochastic:
        return "lattice-stochastic";
    case Engine::ContinuumDeterministic:
        return "continuum-deterministic";
    }
    return "verify";
}

Engine parse_engine(std::string_view s)
{
    if (s == "verify") {
        return Engine::Verify;
    }
    if (s == "lattice-stochastic") {
        return Engine::LatticeStochastic;
    }
    if (s == "continuum-deterministic") {
        return Engine::ContinuumDeterministic;
    }
    throw ConfigError("config: unknown engine '" + std::string(s) + "'");
}

std::string to_string(InteractionScaling s) { return s == InteractionScaling::Spacing ? "spacing" : "volume"; }

InteractionScaling parse_interaction_scaling(std::string_view s)
{
    if (s == "spacing") {
        return InteractionScaling::Spacing;
    }
    if (s == "volume") {
        return InteractionScaling::Volume;
    }
    throw ConfigError("config: interaction_scaling must be 'spacing' or 'volume', got '" + std::string(s) + "'");
}

std::vector<double> parse_real_list(std::string_view s)
{
    std::vector<double> out;
    const std::string text = trim(s);
    if (text.empty()) {
        return out;
    }
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        out.push_back(to_double("list", trim(item)));
    }
    if (text.back() == ',') {
        throw ConfigError("config: trailing comma in list '" + text + "'");
    }
    return out;
}

void RunConfig::validate() const
{
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    if (!(lattice.mass > 0.0)) {
        fail("mass must be positive");
    }
    if (!(dt > 0.0) || !(dt_floor > 0.0) || dt_floor > dt) {
        fail("need 0 < dt_floor <= dt");
    }
    if (node_threshold && !(*node_threshold > 0.0)) {
        fail("node_threshold must be positive");
    }
    if (tv_tolerance && !(*tv_tolerance > 0.0 && *tv_tolerance <= 1.0)) {
        fail("tv_tolerance must lie in (0, 1]");
    }
    if (!(t_max >= t0)) {
        fail("t_max must not precede t0");
    }
    for (double t : checkpoints) {
        if (t < t0 || t > t_max) {
            fail("checkpoint " + real(t) + " lies outside [t0, t_max]");
        }
    }
    if (!std::is_sorted(checkpoints.begin(), checkpoints.end())) {
        fail("checkpoints must be ascending");
    }
    if (out_dir.empty()) {
        fail("out_dir is empty");
    }

    if (engine == Engine::Verify || engine == Engine::LatticeStochastic) {
        try {
            lattice.validate();
        } catch (const std::domain_error& e) {
            fail(e.what());
        }
        if (omega < 0 || omega > lattice.modes()) {
            fail("omega must lie in [0, sites * spinor_dim]");
        }
    }
    if (engine == Engine::LatticeStochastic || engine == Engine::ContinuumDeterministic) {
        if (ensemble_size == 0) {
            fail("ensemble_size must be at least 1");
        }
        if (checkpoints.empty()) {
            fail("at least one checkpoint is required");
        }
    }
    if (engine == Engine::ContinuumDeterministic) {
        if (!(box_length > 0.0)) {
            fail("box_length must be positive");
        }
        if (n_max < 0 || n_max > 4096) {
            fail("n_max must lie in [0, 4096]");
        }
        if (omega != 1 && omega != 2) {
            fail("the continuum engine supports omega = 1 or 2");
        }
        if (boxes < 1 || (omega == 2 && boxes > 256) || boxes > 65536) {
            fail("boxes out of range");
        }
    }
}

RunConfig parse_config(std::string_view text)
{
    RunConfig config;
    std::set<std::string> seen;
    std::stringstream in{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        const std::string body = trim(line);
        if (body.empty()) {
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
        }
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) {
            throw ConfigError("config line " + std::to_string(number) + ": unknown key '" + key + "'");
        }
        if (!seen.insert(key).second) {
            throw ConfigError("config line " + std::to_string(number) + ": repeated key '" + key + "'");
        }
        it->second(config, key, value);
    }
    return config;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open " + path.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::string serialize(const RunConfig& c)
{
    std::ostringstream out;
    out << "engine = " << to_string(c.engine) << '\n';
    out << "sites = " << c.lattice.sites << '\n';
    out << "spinor_dim = " << c.lattice.spinor_dim << '\n';
    out << "mass = " << real(c.lattice.mass) << '\n';
    out << "coupling = " << real(c.lattice.coupling) << '\n';
    out << "spacing = " << real(c.lattice.spacing) << '\n';
    out << "interaction_scaling = " << to_string(c.lattice.interaction_scaling) << '\n';
    out << "box_length = " << real(c.box_length) << '\n';
    out << "n_max = " << c.n_max << '\n';
    out << "omega = " << c.omega << '\n';
    out << "preset = " << c.preset << '\n';
    out << "state_seed = " << c.state_seed << '\n';
    out << "ensemble_size = " << c.ensemble_size << '\n';
    out << "t0 = " << real(c.t0) << '\n';
    out << "t_max = " << real(c.t_max) << '\n';
    out << "checkpoints = ";
    for (std::size_t i = 0; i < c.checkpoints.size(); ++i) {
        out << (i ? ", " : "") << real(c.checkpoints[i]);
    }
    out << '\n';
    out << "dt = " << real(c.dt) << '\n';
    out << "dt_floor = " << real(c.dt_floor) << '\n';
    if (c.node_threshold) {
        out << "node_threshold = " << real(*c.node_threshold) << '\n';
    }
    out << "boxes = " << c.boxes << '\n';
    if (c.tv_tolerance) {
        out << "tv_tolerance = " << real(*c.tv_tolerance) << '\n';
    }
    out << "recorded_paths = " << c.recorded_paths << '\n';
    out << "seed = " << c.seed << '\n';
    out << "out_dir = " << c.out_dir << '\n';
    return out.str();
}

} // namespace bellsim
