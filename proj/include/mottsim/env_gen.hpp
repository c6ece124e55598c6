// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <utility>

#include "mottsim/configuration.hpp"
#include "mottsim/rng.hpp"

namespace mott {

/// Homogeneous Poisson process with intensity rho in the box; coordinates
/// are i.i.d. uniform and snapped to the dyadic grid.
std::vector<double> sample_poisson(double rho, const BoxGeometry& box,
                                   RngStream& rng);

/// p-thinning: every point kept independently with probability p, order of
/// survivors preserved.
std::vector<double> thin(std::span<const double> points, int dim, double p,
                         RngStream& rng);

/// Monotone coupling of a gamma- and a p-thinning (gamma <= p) driven by one
/// shared uniform per point, so the gamma survivors are a subset of the p
/// survivors.  Returns (gamma-thinned, p-thinned).
std::pair<std::vector<double>, std::vector<double>> thin_coupled(
    std::span<const double> points, int dim, double gamma, double p,
    RngStream& rng);

/// One draw from nu: sign * U^(1/(alpha+1)), inverse-CDF sampling of the
/// density ((alpha+1)/2)|E|^alpha.
double sample_energy(const NuLaw& nu, RngStream& rng);

/// One draw from nu conditioned on |E| <= cap (closed form under this nu).
double sample_energy_truncated(const NuLaw& nu, double cap, RngStream& rng);

/// nu-randomization: attach one independent mark per point.
MarkedConfiguration randomize(std::vector<double> points, const BoxGeometry& box,
                              const NuLaw& nu, RngStream& rng);

/// Palm version of the marked Poisson process: Poisson(rho) plus a point at
/// the origin, every point carrying an independent nu-mark.
MarkedConfiguration palm_poisson(double rho, const BoxGeometry& box,
                                 const NuLaw& nu, RngStream& rng);

/// Diluted crystal: the full crystal shifted by one uniform vector V in the
/// elementary cell, then p-thinned.  Periodic boxes require a diagonal basis
/// commensurate with the box.
std::vector<double> diluted_crystal(const CrystalSpec& spec,
                                    const BoxGeometry& box, RngStream& rng);

/// Direct Palm sampler of the diluted crystal: uniform mixture over the cell
/// offsets u, emitting the origin plus the p-thinning of (Gamma - u) \ {0},
/// all points nu-marked.
MarkedConfiguration palm_crystal(const CrystalSpec& spec, const BoxGeometry& box,
                                 const NuLaw& nu, RngStream& rng);

using StationarySource = std::function<MarkedConfiguration(RngStream&)>;
using PalmSource = std::function<MarkedConfiguration(RngStream&)>;
using Statistic = std::function<double(const MarkedConfiguration&)>;

StationarySource poisson_source(double rho, BoxGeometry box, NuLaw nu);
StationarySource crystal_source(CrystalSpec spec, BoxGeometry box, NuLaw nu);
PalmSource palm_poisson_source(double rho, BoxGeometry box, NuLaw nu);
PalmSource palm_crystal_source(CrystalSpec spec, BoxGeometry box, NuLaw nu);
/// Palm Poisson source whose origin mark is drawn from nu conditioned on
/// |E| <= cap; used with the exact prefactor nu([-cap,cap]) to stratify
/// rare-origin estimators.
PalmSource palm_poisson_source_truncated_origin(double rho, BoxGeometry box,
                                                NuLaw nu, double cap);

struct CampbellEstimate {
  double value = 0.0;
  double stderr_value = 0.0;
  std::size_t replicas = 0;
  double empirical_intensity = 0.0;
};

/// Monte Carlo Palm expectation through the Campbell identity: average of
/// statistic(S_x xi) over the points x of Q_K, normalized by the empirical
/// intensity.  The statistic receives a configuration with origin set.
CampbellEstimate campbell_estimate(const StationarySource& source, double window,
                                   const Statistic& statistic, std::size_t n,
                                   std::uint64_t seed, std::uint64_t salt = 0);

/// Plain Monte Carlo mean of a statistic under a direct Palm sampler, for
/// side-by-side comparison with campbell_estimate.
CampbellEstimate palm_direct_estimate(const PalmSource& source,
                                      const Statistic& statistic, std::size_t n,
                                      std::uint64_t seed, std::uint64_t salt = 0);

}  // namespace mott
