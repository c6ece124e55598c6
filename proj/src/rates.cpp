// SPDX-License-Identifier: Apache-2.0
#include "mottsim/rates.hpp"

#include <cmath>

namespace mott {

RateModel RateModel::mean_field(double beta, double r_cut) {
  RateModel m;
  m.beta = beta;
  m.r_cut = r_cut;
  m.validate();
  return m;
}

void RateModel::validate() const {
  if (!(beta > 0.0)) throw std::invalid_argument("RateModel: beta must be > 0");
  if (!(r_cut > 0.0)) throw std::invalid_argument("RateModel: r_cut must be > 0");
  if (!(kappa1 > 0.0 && kappa1 <= kappa2))
    throw std::invalid_argument("RateModel: need 0 < kappa1 <= kappa2");
}

bool validate_custom_u(const RateModel& model, std::size_t samples,
                       RngStream& rng, double* bad_ex, double* bad_ey) {
  for (std::size_t i = 0; i < samples; ++i) {
    const double ex = rng.uniform(-1.0, 1.0);
    const double ey = rng.uniform(-1.0, 1.0);
    const double u = model.energy_cost(ex, ey);
    const double lo = model.kappa1 * (std::abs(ex) + std::abs(ey));
    const double hi = model.kappa2 * (std::abs(ex) + std::abs(ey));
    if (!(u >= lo && u <= hi)) {
      if (bad_ex) *bad_ex = ex;
      if (bad_ey) *bad_ey = ey;
      return false;
    }
  }
  return true;
}

double pair_rate(const MarkedConfiguration& cfg, std::size_t x_index,
                 std::size_t y_index, const RateModel& model) {
  if (x_index >= cfg.size() || y_index >= cfg.size())
    throw std::invalid_argument("pair_rate: index out of range");
  if (x_index == y_index) return 0.0;
  const double dist =
      distance(cfg.point(x_index), cfg.point(y_index), cfg.box());
  return rate_from_parts(dist, cfg.energy(x_index), cfg.energy(y_index), model);
}

double escape_rate(const MarkedConfiguration& cfg, std::size_t x_index,
                   const RateModel& model, const CellGrid& grid, bool* stuck) {
  const double ex = cfg.energy(x_index);
  double lambda = 0.0;
  grid.for_each_within(
      cfg.point(x_index), model.r_cut,
      [&](std::uint32_t j, double d2) {
        lambda += rate_from_parts(std::sqrt(d2), ex, cfg.energy(j), model);
      },
      static_cast<std::uint32_t>(x_index));
  if (stuck) *stuck = lambda == 0.0;
  return lambda;
}

double truncation_tail_bound(double rho, double r_cut, int dim) {
  // surface area of the unit sphere in R^d
  const double d = static_cast<double>(dim);
  const double surface = 2.0 * std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0);
  // int_x^inf r^(d-1) e^-r dr = Gamma(d, x) = (d-1)! e^-x sum_k x^k/k!
  double sum = 0.0, term = 1.0;
  for (int k = 0; k < dim; ++k) {
    if (k > 0) term *= r_cut / static_cast<double>(k);
    sum += term;
  }
  double factorial = 1.0;
  for (int k = 2; k < dim; ++k) factorial *= static_cast<double>(k);
  const double upper_gamma = factorial * std::exp(-r_cut) * sum;
  return rho * surface * upper_gamma;
}

JumpDistribution jump_distribution(const MarkedConfiguration& cfg,
                                   std::size_t x_index, const RateModel& model,
                                   const CellGrid& grid) {
  JumpDistribution jd;
  const double ex = cfg.energy(x_index);
  grid.for_each_within(
      cfg.point(x_index), model.r_cut,
      [&](std::uint32_t j, double d2) {
        const double c = rate_from_parts(std::sqrt(d2), ex, cfg.energy(j), model);
        jd.neighbors.push_back(j);
        jd.probabilities.push_back(c);
        jd.escape_rate += c;
      },
      static_cast<std::uint32_t>(x_index));
  if (jd.escape_rate <= 0.0)
    throw InsufficientData("jump_distribution: stuck walker (zero escape rate)");
  for (auto& p : jd.probabilities) p /= jd.escape_rate;
  return jd;
}

}  // namespace mott
