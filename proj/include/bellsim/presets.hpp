#pragma once

// Named initial states. A preset is written `name` or `name(a, b, ...)`.
//
// Lattice (sector omega):
//   vacuum                      omega = 0, the empty mask
//   random                      complex Gaussian amplitudes from state_seed, normalized
//   basis(i)                    the i-th sector state
//   eigenstate(k)               k-th eigenvector of H, ascending energy
//   configuration(n_1, .., n_L) equal weights over the q-class of n
//
// Continuum (k are integer wave numbers, p and sigma in momentum units):
//   single-mode(k[, branch])        omega = 1, branch +1 or -1
//   standing(k)                     omega = 1, (k, +) and (-k, +) with equal weights
//   two-mode(k1, k2)                omega = 1, equal weights on the positive branch
//   gaussian-packet(p, sigma[, x])  omega = 1, c_k ~ exp(-(p_k - p)^2 / (4 sigma^2) - i p_k x)
//   slater(k1, k2)                  omega = 2, positive branch
//   slater(k1, b1, k2, b2)          omega = 2, explicit branches
//   slater-pair(k1, k2, k3, k4)     omega = 2, antisymmetrized two-mode orbitals (k1 + k2) and (k3 + k4)
//   slater-packets(p1, s1, x1, p2, s2, x2)   omega = 2, antisymmetrized Gaussian packets
//   product-packets(p1, s1, x1, p2, s2, x2)  omega = 2, distinguishable product, reference only

#include "bellsim/continuum.hpp"
#include "bellsim/dynamics.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace bellsim {

struct PresetCall {
    std::string name;
    std::vector<double> args;
};

/// Throws ConfigError on malformed text.
PresetCall parse_preset(std::string_view text);

/// Throws ConfigError for unknown presets or arguments that do not fit the sector.
PilotState lattice_preset(std::string_view text, std::shared_ptr<const SectorBasis> sector, const HamiltonianMatrix& h,
                          std::uint64_t state_seed, double t0 = 0.0);

ContinuumState continuum_preset(std::string_view text, std::shared_ptr<const ModeBasis> basis, int omega,
                                double t0 = 0.0);

/// Unit-norm positive-branch Gaussian packet.
ContinuumState gaussian_packet(std::shared_ptr<const ModeBasis> basis, double p_mean, double sigma, double x_mean,
                               double t0 = 0.0);

/// One orbital with unit weight.
ContinuumState single_mode(std::shared_ptr<const ModeBasis> basis, int k, Branch branch, double t0 = 0.0);

} // namespace bellsim
