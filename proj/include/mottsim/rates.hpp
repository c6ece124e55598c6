// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "mottsim/cell_grid.hpp"
#include "mottsim/configuration.hpp"
#include "mottsim/rng.hpp"

namespace mott {

/// Hopping-rate model c_{x,y} = exp(-|x-y| - beta u(E_x, E_y)).
///
/// The mean-field energy cost u = (|Ex-Ey| + |Ex| + |Ey|)/2 satisfies the
/// two-sided bound kappa1 (|Ex|+|Ey|) <= u <= kappa2 (|Ex|+|Ey|) with
/// kappa1 = 1/2, kappa2 = 3/2.  A custom u must come with constants that can
/// be certified by validate_custom_u.
struct RateModel {
  double beta = 1.0;
  double kappa1 = 0.5;
  double kappa2 = 1.5;
  double r_cut = 40.0;
  std::function<double(double, double)> custom_u;  // empty => mean field

  static RateModel mean_field(double beta, double r_cut = 40.0);

  bool is_mean_field() const { return !custom_u; }

  double energy_cost(double ex, double ey) const {
    if (!custom_u) {
      // fixed summation order keeps u bit-exactly symmetric in (ex, ey)
      double a = std::abs(ex), b = std::abs(ey);
      if (a > b) std::swap(a, b);
      return 0.5 * (std::abs(ex - ey) + a + b);
    }
    return custom_u(ex, ey);
  }

  void validate() const;
};

/// Samples (Ex, Ey) pairs and checks the two-sided bound on a custom u.
/// Returns false (with the failing pair) on the first violation.
bool validate_custom_u(const RateModel& model, std::size_t samples,
                       RngStream& rng, double* bad_ex = nullptr,
                       double* bad_ey = nullptr);

/// Grid cell target for rate scans: a few points per cell keeps both the
/// wide r_cut sweeps (ring-pruned) and short cluster queries cheap; queries
/// stay exact for any radius regardless of the cell size.
inline double rate_grid_cell(const BoxGeometry& box) {
  return std::max(1.0, std::min(4.0, box.min_side() / 4.0));
}

/// c_{x,y}(xi); zero on the diagonal.  Distances use the minimum image in
/// periodic boxes.
double pair_rate(const MarkedConfiguration& cfg, std::size_t x_index,
                 std::size_t y_index, const RateModel& model);

/// rate from precomputed distance, shared by the hot paths
inline double rate_from_parts(double dist, double ex, double ey,
                              const RateModel& model) {
  return std::exp(-dist - model.beta * model.energy_cost(ex, ey));
}

/// lambda_x = sum of c_{x,z} over z within r_cut.  Returns 0 for an isolated
/// point; *stuck is set accordingly when provided.
double escape_rate(const MarkedConfiguration& cfg, std::size_t x_index,
                   const RateModel& model, const CellGrid& grid,
                   bool* stuck = nullptr);

/// Analytic bound on the escape-rate mass beyond r_cut for intensity rho:
/// rho * surface(d) * int_{r_cut}^inf r^{d-1} e^{-r} dr (the mark factor is
/// at most one).  Reported as a truncation diagnostic.
double truncation_tail_bound(double rho, double r_cut, int dim);

struct JumpDistribution {
  std::vector<std::uint32_t> neighbors;
  std::vector<double> probabilities;  // aligned with neighbors, sums to 1
  double escape_rate = 0.0;
};

/// Normalized jump law c_{x,y}/lambda_x over the neighbors within r_cut.
/// Throws InsufficientData when the walker is stuck (lambda = 0).
JumpDistribution jump_distribution(const MarkedConfiguration& cfg,
                                   std::size_t x_index, const RateModel& model,
                                   const CellGrid& grid);

}  // namespace mott
