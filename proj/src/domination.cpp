// SPDX-License-Identifier: Apache-2.0
#include "mottsim/domination.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mott {

DominatedFields bernoulli_dominate(const BinaryFieldModel& field, double p,
                                   RngStream& rng) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("bernoulli_dominate: p must be in [0,1]");
  if (!field.conditional)
    throw std::invalid_argument("bernoulli_dominate: missing conditional");
  DominatedFields out;
  out.sigma.assign(field.size, 0);
  out.omega.assign(field.size, 0);
  for (std::size_t x = 0; x < field.size; ++x) {
    const double q =
        field.conditional(x, {out.sigma.data(), x});  // revealed prefix
    if (q > p) ++out.cap_violations;
    const double u = rng.uniform();
    out.sigma[x] = u < q ? 1 : 0;
    out.omega[x] = u < p ? 1 : 0;
  }
  return out;
}

double choose_rho_prime(double p, std::uint32_t n_bound, double cell, int dim) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("choose_rho_prime: p must be in (0,1)");
  if (n_bound < 1) throw std::invalid_argument("choose_rho_prime: N >= 1");
  if (!(cell > 0.0)) throw std::invalid_argument("choose_rho_prime: K > 0");
  const double cell_vol = std::pow(cell, static_cast<double>(dim));
  const double p_prime = 1.0 - std::pow(1.0 - p, static_cast<double>(n_bound));
  const auto admissible = [&](double rho) {
    return p_prime <= poisson_upper_tail(rho * cell_vol, n_bound);
  };
  double hi = 1.0;
  int guard = 0;
  while (!admissible(hi)) {
    hi *= 2.0;
    if (++guard > 64)
      throw std::runtime_error("choose_rho_prime: no admissible rho' found");
  }
  double lo = 0.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-12 * std::max(1.0, hi); ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (admissible(mid)) hi = mid;
    else lo = mid;
  }
  return hi;
}

CouplingPair prop61_coupling(const PointSampler& base_process,
                             const BoxGeometry& box, double p, double cell,
                             std::uint32_t n_bound, std::uint64_t seed,
                             std::uint64_t replica) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("prop61_coupling: p must be in (0,1)");
  RngStream rng(seed, replica, /*salt=*/0xd0a1);
  const std::vector<double> base = base_process(rng);
  const CountField base_field = count_field(base, box, cell);
  for (std::size_t i = 0; i < base_field.counts.size(); ++i)
    if (base_field.counts[i] > n_bound)
      throw std::runtime_error(
          "prop61_coupling: density bound violated in cell " + std::to_string(i) +
          " (count " + std::to_string(base_field.counts[i]) + " > N)");

  const int dim = box.dim();
  const double rho_prime = choose_rho_prime(p, n_bound, cell, dim);
  const double cell_mean = rho_prime * std::pow(cell, static_cast<double>(dim));

  CouplingPair pair;
  pair.y1 = base_field;  // window layout; counts overwritten below
  pair.y2 = base_field;
  pair.p = p;
  pair.n_bound = n_bound;
  pair.rho_prime = rho_prime;
  pair.cell = cell;
  pair.seed = seed;

  // lexicographic pass, one uniform per cell shared by the whole chain:
  //   sigma' = 1{u < q}           (thinned-process occupancy, q <= p')
  //   omega  = 1{u < p'}          (Bernoulli cap)
  //   tau    = 1{u < p~}          (Poisson cell holds >= N points)
  //   z      = quantile(1 - u)    (Poisson count; z >= N iff tau = 1)
  for (std::size_t i = 0; i < base_field.counts.size(); ++i) {
    const std::uint32_t m = base_field.counts[i];
    const double q = 1.0 - std::pow(1.0 - p, static_cast<double>(m));
    const double u = rng.uniform();
    const bool occupied = u < q;  // implies u < p' <= p~
    std::uint32_t y1 = 0;
    if (occupied) {
      // retained count conditioned on occupancy: Binomial(m, p) given >= 1
      do {
        y1 = rng.binomial(m, p);
      } while (y1 == 0);
    }
    const std::uint64_t z = poisson_quantile(cell_mean, 1.0 - u);
    pair.y1.counts[i] = y1;
    pair.y2.counts[i] = static_cast<std::uint32_t>(z);
  }
  return pair;
}

DominationCheck verify_domination(const CouplingPair& pair) {
  if (!pair.y1.same_window(pair.y2))
    throw std::invalid_argument("verify_domination: mismatched lattice windows");
  DominationCheck check;
  check.min_slack = std::numeric_limits<long>::max();
  for (std::size_t i = 0; i < pair.y1.counts.size(); ++i) {
    const long slack = static_cast<long>(pair.y2.counts[i]) -
                       static_cast<long>(pair.y1.counts[i]);
    check.min_slack = std::min(check.min_slack, slack);
    if (slack < 0) {
      check.holds = false;
      check.violating_cells.push_back(i);
    }
  }
  return check;
}

double beta_star_from_p(double p, const NuLaw& nu, int dim) {
  if (!(p > 0.0 && p <= 1.0))
    throw std::invalid_argument("beta_star_from_p: p must be in (0,1]");
  const double e_star = nu.interval_mass_inverse(p);
  // E(beta) = beta^(-d/(alpha+1+d))  =>  beta = E^(-(alpha+1+d)/d)
  return std::pow(e_star, -(nu.alpha + 1.0 + dim) / static_cast<double>(dim));
}

}  // namespace mott
