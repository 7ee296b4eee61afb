#pragma once

// Run configuration: plain text, one `key = value` per line, `#` starts a comment.

#include "bellsim/lattice_fock.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bellsim {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Engine { Verify, LatticeStochastic, ContinuumDeterministic };

std::string to_string(Engine e);
Engine parse_engine(std::string_view s);

std::string to_string(InteractionScaling s);
InteractionScaling parse_interaction_scaling(std::string_view s);

struct RunConfig {
    Engine engine = Engine::Verify;

    // Lattice engine. `mass` is shared with the continuum engine.
    LatticeSpec lattice{.sites = 2, .spinor_dim = 2};

    // Continuum engine.
    double box_length = 20.0;
    int n_max = 32;

    int omega = 1;
    /// Preset name with optional arguments, e.g. gaussian-packet(0.8, 0.4, 10).
    std::string preset = "random";
    /// Seeds random presets; independent of the ensemble seed.
    std::uint64_t state_seed = 7;

    std::size_t ensemble_size = 1000;
    double t0 = 0.0;
    double t_max = 1.0;
    std::vector<double> checkpoints{1.0};
    /// Control step (lattice) or RK4 step (continuum).
    double dt = 1e-3;
    /// Smallest step before a physics abort.
    double dt_floor = 1e-9;
    /// D_m or rho below this is a node visit. Engine default when empty.
    std::optional<double> node_threshold;

    /// Coarse-graining boxes per axis (continuum).
    int boxes = 32;
    /// Explicit total-variation threshold; the 95% multinomial band when empty.
    std::optional<double> tv_tolerance;
    /// Step-by-step paths written for this many ensemble members.
    std::size_t recorded_paths = 16;

    std::uint64_t seed = 1;
    std::string out_dir = "out";

    /// Throws ConfigError.
    void validate() const;

    bool operator==(const RunConfig&) const = default;
};

/// Throws ConfigError on syntax errors, unknown or repeated keys and bad values.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Every key written; doubles with 17 significant digits so parse(serialize(c)) == c.
std::string serialize(const RunConfig& config);

/// Comma-separated list of reals.
std::vector<double> parse_real_list(std::string_view s);

} // namespace bellsim
