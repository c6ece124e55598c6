// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mottsim/configuration.hpp"
#include "mottsim/env_gen.hpp"
#include "mottsim/rng.hpp"

namespace mott {

/// Binary field with a certified conditional-probability cap: given the
/// already-revealed sites (in the fixed lexicographic visitation order), the
/// conditional probability of occupation never exceeds the cap the caller
/// certifies.  Product-form fields return their marginal.
struct BinaryFieldModel {
  std::size_t size = 0;
  std::function<double(std::size_t, std::span<const std::uint8_t>)> conditional;
};

struct DominatedFields {
  std::vector<std::uint8_t> sigma;  // law of the input field
  std::vector<std::uint8_t> omega;  // i.i.d. Bernoulli(p)
  std::size_t cap_violations = 0;   // conditional probabilities above p
};

/// Sequential coupling: one uniform per site drives both fields, so
/// sigma_x <= omega_x pointwise whenever the cap certificate holds.  A
/// violated cap is reported, falsifying the certificate.
DominatedFields bernoulli_dominate(const BinaryFieldModel& field, double p,
                                   RngStream& rng);

/// Smallest rho' with 1-(1-p)^N <= P(Poisson(rho' K^d) >= N), by monotone
/// bisection.  This is the Poisson intensity that dominates the coarse field
/// of a p-thinned process with at most N points per K-cell.
double choose_rho_prime(double p, std::uint32_t n_bound, double cell, int dim);

struct CouplingPair {
  CountField y1;  // field of the thinned bounded process
  CountField y2;  // Poisson(rho') field on the same lattice window
  double p = 0.0;
  std::uint32_t n_bound = 0;
  double rho_prime = 0.0;
  double cell = 0.0;
  std::uint64_t seed = 0;
};

/// Sampler producing one realization of the un-thinned base point set.
using PointSampler = std::function<std::vector<double>(RngStream&)>;

/// Realizes the coupling chain of the bounded-density proposition with one
/// uniform per cell: occupancy of the p-thinned process, Bernoulli(p'),
/// Bernoulli(p~), and the Poisson(rho') cell count, so Y1 <= Y2 pointwise by
/// construction.  A cell of the base realization with more than n_bound
/// points is a hard failure naming the cell.
CouplingPair prop61_coupling(const PointSampler& base_process,
                             const BoxGeometry& box, double p, double cell,
                             std::uint32_t n_bound, std::uint64_t seed,
                             std::uint64_t replica = 0);

struct DominationCheck {
  bool holds = true;
  std::vector<std::size_t> violating_cells;
  long min_slack = 0;  // min over cells of Y2 - Y1
};

/// Exact pointwise comparison Y1 <= Y2 with every violation enumerated.
DominationCheck verify_domination(const CouplingPair& pair);

/// beta* with nu([-E(beta*), E(beta*)]) = p under the concrete nu.
double beta_star_from_p(double p, const NuLaw& nu, int dim);

}  // namespace mott
