// SPDX-License-Identifier: Apache-2.0
#include "mottsim/env_gen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mottsim/stats.hpp"

namespace mott {

std::vector<double> sample_poisson(double rho, const BoxGeometry& box,
                                   RngStream& rng) {
  if (!(rho > 0.0)) throw std::invalid_argument("sample_poisson: rho must be > 0");
  box.validate();
  const double mean = rho * box.volume();
  if (!(mean < 1e9))
    throw std::invalid_argument("sample_poisson: rho * volume too large");
  const std::size_t d = box.sides.size();
  const std::uint64_t n = rng.poisson(mean);
  std::vector<double> coords;
  coords.reserve(n * d);
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      const double h = box.sides[k] / 2.0;
      double x = snap_coordinate(rng.uniform(-h, h));
      if (x >= h) x = snap_coordinate(x - kCoordQuantum);  // snap can hit the edge
      coords.push_back(x);
    }
  return coords;
}

std::vector<double> thin(std::span<const double> points, int dim, double p,
                         RngStream& rng) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("thin: p must be in [0,1]");
  const std::size_t d = static_cast<std::size_t>(dim);
  const std::size_t n = d == 0 ? 0 : points.size() / d;
  std::vector<double> kept;
  kept.reserve(points.size());
  for (std::size_t i = 0; i < n; ++i)
    if (rng.uniform() < p)
      kept.insert(kept.end(), points.begin() + i * d, points.begin() + (i + 1) * d);
  return kept;
}

std::pair<std::vector<double>, std::vector<double>> thin_coupled(
    std::span<const double> points, int dim, double gamma, double p,
    RngStream& rng) {
  if (!(gamma >= 0.0 && gamma <= p && p <= 1.0))
    throw std::invalid_argument("thin_coupled: need 0 <= gamma <= p <= 1");
  const std::size_t d = static_cast<std::size_t>(dim);
  const std::size_t n = d == 0 ? 0 : points.size() / d;
  std::vector<double> low, high;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    if (u < p)
      high.insert(high.end(), points.begin() + i * d, points.begin() + (i + 1) * d);
    if (u < gamma)
      low.insert(low.end(), points.begin() + i * d, points.begin() + (i + 1) * d);
  }
  return {std::move(low), std::move(high)};
}

double sample_energy(const NuLaw& nu, RngStream& rng) {
  nu.validate();
  const double u = rng.uniform();
  const double mag =
      nu.alpha == 0.0 ? u : std::pow(u, 1.0 / (nu.alpha + 1.0));
  return rng.bernoulli(0.5) ? mag : -mag;
}

double sample_energy_truncated(const NuLaw& nu, double cap, RngStream& rng) {
  nu.validate();
  if (!(cap > 0.0 && cap <= 1.0))
    throw std::invalid_argument("sample_energy_truncated: cap must be in (0,1]");
  // |E| = cap * U^(1/(alpha+1)) has exactly the conditional law of nu given
  // |E| <= cap, since nu([-e,e]) = e^(alpha+1)
  const double u = rng.uniform();
  const double mag =
      cap * (nu.alpha == 0.0 ? u : std::pow(u, 1.0 / (nu.alpha + 1.0)));
  return rng.bernoulli(0.5) ? mag : -mag;
}

MarkedConfiguration randomize(std::vector<double> points, const BoxGeometry& box,
                              const NuLaw& nu, RngStream& rng) {
  const std::size_t d = box.sides.size();
  const std::size_t n = d == 0 ? 0 : points.size() / d;
  std::vector<double> energies(n);
  for (auto& e : energies) e = sample_energy(nu, rng);
  return MarkedConfiguration::create(box, std::move(points), std::move(energies));
}

MarkedConfiguration palm_poisson(double rho, const BoxGeometry& box,
                                 const NuLaw& nu, RngStream& rng) {
  const std::size_t d = box.sides.size();
  std::vector<double> points = sample_poisson(rho, box, rng);
  std::vector<double> coords(d, 0.0);
  coords.insert(coords.end(), points.begin(), points.end());
  const std::size_t n = coords.size() / d;
  std::vector<double> energies(n);
  for (auto& e : energies) e = sample_energy(nu, rng);
  return MarkedConfiguration::create(box, std::move(coords), std::move(energies),
                                     std::size_t{0});
}

namespace {

void check_crystal_box(const CrystalSpec& spec, const BoxGeometry& box) {
  spec.validate();
  box.validate();
  const std::size_t d = box.sides.size();
  if (static_cast<std::size_t>(spec.dim()) != d)
    throw std::invalid_argument("crystal: dimension mismatch with box");
  // window must hold >= 5 cells per axis
  for (std::size_t row = 0; row < d; ++row) {
    double extent = 0.0;
    for (std::size_t col = 0; col < d; ++col)
      extent += std::abs(spec.basis[col * d + row]);
    if (box.sides[row] < 5.0 * extent)
      throw std::invalid_argument("crystal: window must cover >= 5 cells per axis");
  }
  if (box.periodic()) {
    // wrapping a crystal is only consistent when the box is an integer number
    // of periods along each axis, which we require in diagonal form
    for (std::size_t col = 0; col < d; ++col)
      for (std::size_t row = 0; row < d; ++row) {
        if (row == col) continue;
        if (spec.basis[col * d + row] != 0.0)
          throw std::invalid_argument(
              "crystal: periodic boxes need an axis-aligned (diagonal) basis");
      }
    for (std::size_t k = 0; k < d; ++k) {
      const double b = spec.basis[k * d + k];
      const double ratio = box.sides[k] / b;
      if (std::abs(ratio - std::nearbyint(ratio)) > 1e-9)
        throw std::invalid_argument(
            "crystal: periodic box side must be a multiple of the lattice period");
    }
  }
}

// enumerate crystal points x = shift + B z + c inside the box
template <typename Keep>
void for_each_crystal_point(const CrystalSpec& spec, const BoxGeometry& box,
                            std::span<const double> shift, Keep&& keep) {
  const std::size_t d = box.sides.size();
  double pad = 0.0;
  for (std::size_t i = 0; i < spec.cell_point_count(); ++i) {
    double norm = 0.0;
    for (std::size_t k = 0; k < d; ++k)
      norm += spec.cell_points[i * d + k] * spec.cell_points[i * d + k];
    pad = std::max(pad, std::sqrt(norm));
  }
  double basis_diag = 0.0;
  for (std::size_t col = 0; col < d; ++col) {
    double norm = 0.0;
    for (std::size_t row = 0; row < d; ++row)
      norm += spec.basis[col * d + row] * spec.basis[col * d + row];
    basis_diag += std::sqrt(norm);
  }
  double shift_norm = 0.0;
  for (std::size_t k = 0; k < d; ++k) shift_norm += shift[k] * shift[k];
  shift_norm = std::sqrt(shift_norm);
  double radius = pad + basis_diag + shift_norm;
  for (double s : box.sides) radius += s / 2.0 * std::sqrt(double(d));

  // conservative per-axis z bound: |z_k| <= radius / sigma_min would need the
  // smallest singular value; use the reciprocal of the smallest column norm
  // scaled by dimension, which overshoots but d and the ranges are small.
  double min_col = std::numeric_limits<double>::max();
  for (std::size_t col = 0; col < d; ++col) {
    double norm = 0.0;
    for (std::size_t row = 0; row < d; ++row)
      norm += spec.basis[col * d + row] * spec.basis[col * d + row];
    min_col = std::min(min_col, std::sqrt(norm));
  }
  const long zmax = static_cast<long>(std::ceil(radius * double(d) / min_col)) + 1;

  std::vector<long> z(d, -zmax);
  std::vector<double> x(d);
  const std::size_t ncell = spec.cell_point_count();
  while (true) {
    for (std::size_t i = 0; i < ncell; ++i) {
      for (std::size_t row = 0; row < d; ++row) {
        double v = shift[row] + spec.cell_points[i * d + row];
        for (std::size_t col = 0; col < d; ++col)
          v += spec.basis[col * d + row] * static_cast<double>(z[col]);
        x[row] = snap_coordinate(v);
      }
      if (box.contains(x)) keep(x, z, i);
    }
    // odometer
    std::size_t k = 0;
    while (k < d) {
      if (++z[k] <= zmax) break;
      z[k] = -zmax;
      ++k;
    }
    if (k == d) break;
  }
}

}  // namespace

std::vector<double> diluted_crystal(const CrystalSpec& spec,
                                    const BoxGeometry& box, RngStream& rng) {
  check_crystal_box(spec, box);
  const std::size_t d = box.sides.size();
  // one uniform shift V in the elementary cell, shared by all points
  std::vector<double> shift(d, 0.0);
  {
    std::vector<double> t(d);
    for (auto& v : t) v = rng.uniform();
    for (std::size_t row = 0; row < d; ++row) {
      double v = 0.0;
      for (std::size_t col = 0; col < d; ++col)
        v += spec.basis[col * d + row] * t[col];
      shift[row] = v;
    }
  }
  std::vector<double> kept;
  for_each_crystal_point(spec, box, shift,
                         [&](const std::vector<double>& x, const std::vector<long>&,
                             std::size_t) {
                           if (rng.uniform() < spec.dilution_p)
                             kept.insert(kept.end(), x.begin(), x.end());
                         });
  return kept;
}

MarkedConfiguration palm_crystal(const CrystalSpec& spec, const BoxGeometry& box,
                                 const NuLaw& nu, RngStream& rng) {
  check_crystal_box(spec, box);
  const std::size_t d = box.sides.size();
  const std::size_t ncell = spec.cell_point_count();
  // uniform mixture over the cell offsets u in Delta cap Gamma
  const std::size_t pick =
      std::min<std::size_t>(ncell - 1,
                            static_cast<std::size_t>(rng.uniform() * double(ncell)));
  std::vector<double> minus_u(d);
  for (std::size_t k = 0; k < d; ++k) minus_u[k] = -spec.cell_points[pick * d + k];

  std::vector<double> coords(d, 0.0);  // origin first
  std::vector<bool> keep_roll;
  for_each_crystal_point(
      spec, box, minus_u,
      [&](const std::vector<double>& x, const std::vector<long>& z,
          std::size_t cell_index) {
        bool is_u = cell_index == pick;
        for (long zk : z) is_u = is_u && zk == 0;
        if (is_u) return;  // Gamma \ {u}; the origin is added separately
        if (rng.uniform() < spec.dilution_p)
          coords.insert(coords.end(), x.begin(), x.end());
      });
  const std::size_t n = coords.size() / d;
  std::vector<double> energies(n);
  for (auto& e : energies) e = sample_energy(nu, rng);
  return MarkedConfiguration::create(box, std::move(coords), std::move(energies),
                                     std::size_t{0});
}

StationarySource poisson_source(double rho, BoxGeometry box, NuLaw nu) {
  return [=](RngStream& rng) {
    return randomize(sample_poisson(rho, box, rng), box, nu, rng);
  };
}

StationarySource crystal_source(CrystalSpec spec, BoxGeometry box, NuLaw nu) {
  return [=](RngStream& rng) {
    return randomize(diluted_crystal(spec, box, rng), box, nu, rng);
  };
}

PalmSource palm_poisson_source(double rho, BoxGeometry box, NuLaw nu) {
  return [=](RngStream& rng) { return palm_poisson(rho, box, nu, rng); };
}

PalmSource palm_crystal_source(CrystalSpec spec, BoxGeometry box, NuLaw nu) {
  return [=](RngStream& rng) { return palm_crystal(spec, box, nu, rng); };
}

PalmSource palm_poisson_source_truncated_origin(double rho, BoxGeometry box,
                                                NuLaw nu, double cap) {
  return [=](RngStream& rng) {
    MarkedConfiguration cfg = palm_poisson(rho, box, nu, rng);
    std::vector<double> energies = cfg.energies();
    energies[*cfg.origin_index()] = sample_energy_truncated(nu, cap, rng);
    return cfg.with_energies(std::move(energies));
  };
}

CampbellEstimate campbell_estimate(const StationarySource& source, double window,
                                   const Statistic& statistic, std::size_t n,
                                   std::uint64_t seed, std::uint64_t salt) {
  if (!(window > 0.0))
    throw std::invalid_argument("campbell_estimate: window must be positive");
  if (n == 0) throw std::invalid_argument("campbell_estimate: need replicas");
  double sum_a = 0.0, sum_aa = 0.0;
  double sum_b = 0.0, sum_bb = 0.0, sum_ab = 0.0;
  double volume = 0.0;
  double window_vol = 1.0;
  std::size_t points_in_window = 0;
  const double half = window / 2.0;
  for (std::size_t r = 0; r < n; ++r) {
    RngStream rng(seed, r, salt);
    const MarkedConfiguration cfg = source(rng);
    if (r == 0) {
      if (window > cfg.box().min_side())
        throw std::invalid_argument("campbell_estimate: window exceeds the box");
      volume = cfg.box().volume();
      for (std::size_t k = 0; k < cfg.box().sides.size(); ++k)
        window_vol *= window;
    }
    const std::size_t d = cfg.box().sides.size();
    double a = 0.0;
    for (std::size_t i = 0; i < cfg.size(); ++i) {
      bool in_window = true;
      for (std::size_t k = 0; k < d && in_window; ++k)
        in_window = cfg.coord(i, k) >= -half && cfg.coord(i, k) < half;
      if (!in_window) continue;
      ++points_in_window;
      a += statistic(translate(cfg, i));
    }
    const double b = static_cast<double>(cfg.size());
    sum_a += a;
    sum_aa += a * a;
    sum_b += b;
    sum_bb += b * b;
    sum_ab += a * b;
  }
  if (points_in_window == 0)
    throw InsufficientData("campbell_estimate: no points fell in the window");
  const double nn = static_cast<double>(n);
  const double mean_a = sum_a / nn;
  const double mean_b = sum_b / nn;
  const double rho_hat = mean_b / volume;
  // estimate = mean_a / (rho_hat * window^d); written as the ratio
  // mean_a / (c * mean_b) for the delta-method error below
  const double c = window_vol / volume;
  const double denom = c * mean_b;
  const double est = mean_a / denom;
  // var of a ratio A/B: (var a - 2 R cov + R^2 var b) / (n B^2)
  const double var_a = std::max(0.0, sum_aa / nn - mean_a * mean_a);
  const double var_b = std::max(0.0, sum_bb / nn - mean_b * mean_b);
  const double cov_ab = sum_ab / nn - mean_a * mean_b;
  const double var_ratio =
      (var_a - 2.0 * est * c * cov_ab + est * est * c * c * var_b) /
      (nn * denom * denom);
  CampbellEstimate out;
  out.value = est;
  out.stderr_value = std::sqrt(std::max(0.0, var_ratio));
  out.replicas = n;
  out.empirical_intensity = rho_hat;
  return out;
}

CampbellEstimate palm_direct_estimate(const PalmSource& source,
                                      const Statistic& statistic, std::size_t n,
                                      std::uint64_t seed, std::uint64_t salt) {
  if (n == 0) throw std::invalid_argument("palm_direct_estimate: need replicas");
  RunningStat stat;
  for (std::size_t r = 0; r < n; ++r) {
    RngStream rng(seed, r, salt);
    const MarkedConfiguration cfg = source(rng);
    stat.add(statistic(cfg));
  }
  CampbellEstimate out;
  out.value = stat.mean();
  out.stderr_value = stat.stderr_mean();
  out.replicas = n;
  return out;
}

}  // namespace mott
