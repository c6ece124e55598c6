// SPDX-License-Identifier: Apache-2.0
#include "mottsim/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mottsim/parallel.hpp"
#include "mottsim/stats.hpp"

namespace mott {

TestFunction TestFunction::zero() { return TestFunction{}; }

TestFunction TestFunction::cluster(int axis, std::size_t cap,
                                   MottGraphParams params) {
  params.validate();
  if (axis < 0) throw std::invalid_argument("TestFunction: bad axis");
  if (cap == 0) throw std::invalid_argument("TestFunction: cap must be >= 1");
  TestFunction f;
  f.kind_ = Kind::cluster;
  f.axis_ = axis;
  f.cap_ = cap;
  f.params_ = params;
  return f;
}

TestFunction TestFunction::user(
    std::function<double(const MarkedConfiguration&)> f) {
  TestFunction tf;
  tf.kind_ = Kind::user;
  tf.user_ = std::move(f);
  return tf;
}

double TestFunction::sup_bound() const {
  if (kind_ != Kind::cluster) return 0.0;
  return static_cast<double>(cap_) * params_.range;
}

namespace {

// same per-axis wrap as wrap_into_box, for bit-identical translated coords
double wrap_component(double v, double side) {
  const double h = side / 2.0;
  if (v >= -h && v < h) return v;
  v -= side * std::floor((v + h) / side);
  if (v >= h) v -= side;
  if (v < -h) v += side;
  return v;
}

// f value of the cluster kind given the cluster of the viewpoint; coordinates
// are taken relative to view_index (exact on the dyadic grid)
double cluster_value(const MarkedConfiguration& cfg,
                     const std::vector<std::uint32_t>& cluster, int axis,
                     std::size_t cap, std::uint32_t view_index) {
  if (cluster.empty() || cluster.size() > cap) return 0.0;
  const double xv = cfg.coord(view_index, static_cast<std::size_t>(axis));
  const double side = cfg.box().sides[static_cast<std::size_t>(axis)];
  const bool per = cfg.box().periodic();
  double m = std::numeric_limits<double>::infinity();
  for (std::uint32_t z : cluster) {
    double v = cfg.coord(z, static_cast<std::size_t>(axis)) - xv;
    if (per) v = wrap_component(v, side);
    m = std::min(m, v);
  }
  return -m;
}

}  // namespace

double TestFunction::eval(const MarkedConfiguration& cfg,
                          const CellGrid& grid) const {
  if (kind_ == Kind::zero) return 0.0;
  if (kind_ == Kind::user) return user_(cfg);
  if (!cfg.has_origin())
    throw std::invalid_argument("TestFunction: needs a Palm configuration");
  const auto origin = static_cast<std::uint32_t>(*cfg.origin_index());
  const auto cluster = graph_cluster_of(cfg, grid, params_, origin);
  return cluster_value(cfg, cluster, axis_, cap_, origin);
}

double TestFunction::eval(const MarkedConfiguration& cfg) const {
  if (kind_ == Kind::zero) return 0.0;
  if (kind_ == Kind::user) return user_(cfg);
  const CellGrid grid(cfg.coords(), cfg.box(),
                      std::min(params_.range, cfg.box().min_side() / 2.0));
  return eval(cfg, grid);
}

double TestFunction::eval_translated(const MarkedConfiguration& cfg,
                                     const CellGrid& grid,
                                     std::uint32_t x_index) const {
  if (kind_ == Kind::zero) return 0.0;
  if (kind_ == Kind::user) return user_(translate(cfg, x_index));
  // covariance: C_0(S_x xi) = C_x(xi) - x, so evaluate from x directly
  const auto cluster = graph_cluster_of(cfg, grid, params_, x_index);
  return cluster_value(cfg, cluster, axis_, cap_, x_index);
}

double gradient(const TestFunction& f, const MarkedConfiguration& cfg,
                std::uint32_t x_index) {
  if (x_index >= cfg.size())
    throw std::invalid_argument("gradient: not a point of the configuration");
  if (f.kind() == TestFunction::Kind::user)
    return f.eval(translate(cfg, x_index)) - f.eval(cfg);
  const CellGrid grid(cfg.coords(), cfg.box(),
                      std::min(f.params().range, cfg.box().min_side() / 2.0));
  return f.eval_translated(cfg, grid, x_index) - f.eval(cfg, grid);
}

VarEstimate variational_rhs(const TestFunction& f, const PalmSource& source,
                            const RateModel& model, std::span<const double> a,
                            std::size_t n, std::uint64_t seed,
                            std::uint64_t salt, int workers) {
  double norm = 0.0;
  for (double v : a) norm += v * v;
  if (std::abs(norm - 1.0) > 1e-9)
    throw std::invalid_argument("variational_rhs: direction must be a unit vector");
  if (n == 0) throw std::invalid_argument("variational_rhs: need replicas");
  std::vector<double> values(n, 0.0);
  parallel_for_replicas(n, workers, [&](std::size_t r) {
    RngStream rng(seed, r, salt);
    const MarkedConfiguration cfg = source(rng);
    const std::size_t d = cfg.box().sides.size();
    if (a.size() != d)
      throw std::invalid_argument("variational_rhs: direction dimension mismatch");
    const auto origin = static_cast<std::uint32_t>(*cfg.origin_index());
    const double cell = rate_grid_cell(cfg.box());
    const CellGrid grid(cfg.coords(), cfg.box(), cell);
    const double f_here = f.eval(cfg, grid);
    const double e0 = cfg.energy(origin);
    double sum = 0.0;
    grid.for_each_within(
        cfg.point(origin), model.r_cut,
        [&](std::uint32_t j, double d2) {
          const double c =
              rate_from_parts(std::sqrt(d2), e0, cfg.energy(j), model);
          double ax = 0.0;
          for (std::size_t k = 0; k < d; ++k)
            ax += a[k] * delta_component(cfg.coord(j, k), 0.0,
                                         cfg.box().sides[k],
                                         cfg.box().periodic());
          const double grad = f.eval_translated(cfg, grid, j) - f_here;
          const double term = ax - grad;
          sum += c * term * term;
        },
        origin);
    values[r] = sum;
  });
  RunningStat stat;
  for (double v : values) stat.add(v);
  return {stat.mean(), stat.stderr_mean(), n};
}

VarEstimate off_cluster_bound(const PalmSource& source, const RateModel& model,
                              const MottGraphParams& params, int axis,
                              std::size_t n, std::uint64_t seed,
                              std::uint64_t salt, int workers) {
  if (n == 0) throw std::invalid_argument("off_cluster_bound: need replicas");
  std::vector<double> values(n, 0.0);
  parallel_for_replicas(n, workers, [&](std::size_t r) {
    RngStream rng(seed, r, salt);
    const MarkedConfiguration cfg = source(rng);
    const auto origin = static_cast<std::uint32_t>(*cfg.origin_index());
    const double cell = rate_grid_cell(cfg.box());
    const CellGrid grid(cfg.coords(), cfg.box(), cell);
    const auto cluster = graph_cluster_of(cfg, grid, params, origin);
    const double cl2 = params.range * params.range *
                       static_cast<double>(cluster.size()) *
                       static_cast<double>(cluster.size());
    const double e0 = cfg.energy(origin);
    const std::size_t ax = static_cast<std::size_t>(axis);
    double sum = 0.0;
    grid.for_each_within(
        cfg.point(origin), model.r_cut,
        [&](std::uint32_t j, double d2) {
          if (std::binary_search(cluster.begin(), cluster.end(), j)) return;
          const double c =
              rate_from_parts(std::sqrt(d2), e0, cfg.energy(j), model);
          const double xi = delta_component(cfg.coord(j, ax), 0.0,
                                            cfg.box().sides[ax],
                                            cfg.box().periodic());
          sum += c * (xi * xi + cl2);
        },
        origin);
    values[r] = 6.0 * sum;
  });
  RunningStat stat;
  for (double v : values) stat.add(v);
  return {stat.mean(), stat.stderr_mean(), n};
}

double closed_form_bound(double beta, double alpha, int dim, double c1,
                         double c2, double big_c) {
  if (!(beta > 0.0) || !(alpha > -1.0) || dim < 2)
    throw std::invalid_argument("closed_form_bound: bad arguments");
  return c1 * std::pow(beta, c2) *
         std::exp(-big_c * std::pow(beta, mott_exponent(alpha, dim)));
}

double non_edge_rate_cap(const RateModel& model, const MottGraphParams& params) {
  return std::exp(
      -std::min(params.range, model.kappa1 * model.beta * params.energy_cap));
}

RateCapReport verify_rate_cap(const PalmSource& source, const RateModel& model,
                   const MottGraphParams& params, std::size_t pairs,
                   std::uint64_t seed, std::uint64_t salt) {
  RateCapReport report;
  report.cap = non_edge_rate_cap(model, params);
  std::size_t replica = 0;
  while (report.samples < pairs) {
    RngStream rng(seed, replica++, salt);
    const MarkedConfiguration cfg = source(rng);
    if (cfg.size() < 2) continue;
    const std::size_t d = cfg.box().sides.size();
    const CellGrid grid(cfg.coords(), cfg.box(),
                        std::max(1.0, cfg.box().min_side() / 16.0));
    const std::size_t per_replica = std::min<std::size_t>(
        pairs - report.samples, std::max<std::size_t>(64, cfg.size() / 4));
    for (std::size_t s = 0; s < per_replica; ++s) {
      const auto i = static_cast<std::uint32_t>(rng.uniform() * cfg.size());
      // prefer nearby partners so the check exercises nontrivial rates
      std::vector<std::uint32_t> candidates;
      grid.for_each_within(
          cfg.point(i), 2.0 * params.range + 2.0,
          [&](std::uint32_t j, double) { candidates.push_back(j); }, i);
      std::uint32_t j;
      if (!candidates.empty()) {
        j = candidates[static_cast<std::size_t>(rng.uniform() *
                                                candidates.size())];
      } else {
        j = static_cast<std::uint32_t>(rng.uniform() * cfg.size());
        if (j == i) continue;
      }
      const bool edge =
          std::abs(cfg.energy(i)) <= params.energy_cap &&
          std::abs(cfg.energy(j)) <= params.energy_cap &&
          distance2(cfg.point(i), cfg.point(j), cfg.box()) <=
              params.range * params.range;
      if (edge) continue;
      const double c = pair_rate(cfg, i, j, model);
      ++report.samples;
      report.worst_ratio = std::max(report.worst_ratio, c / report.cap);
      if (c > report.cap) ++report.violations;
    }
  }
  return report;
}

ExponentFit fit_mott_exponent(std::span<const std::pair<double, double>> pairs,
                              double fixed_exponent) {
  std::vector<double> log_beta, loglog_d, z, neglog_d;
  std::size_t dropped = 0;
  for (const auto& [beta, dval] : pairs) {
    if (!(dval > 0.0) || !(dval < 1.0) || !(beta > 0.0)) {
      ++dropped;
      continue;
    }
    log_beta.push_back(std::log(beta));
    loglog_d.push_back(std::log(-std::log(dval)));
    z.push_back(std::pow(beta, fixed_exponent));
    neglog_d.push_back(-std::log(dval));
  }
  if (log_beta.size() < 4)
    throw InsufficientData("fit_mott_exponent: need >= 4 usable (beta, D) points");
  const auto [min_it, max_it] =
      std::minmax_element(log_beta.begin(), log_beta.end());
  if (*max_it - *min_it < std::log(10.0) - 1e-9)
    throw std::invalid_argument(
        "fit_mott_exponent: beta grid must span at least one decade");
  const LineFit main = fit_line(log_beta, loglog_d);
  const LineFit fixed = fit_line(z, neglog_d);
  ExponentFit out;
  out.slope = main.slope;
  out.slope_stderr = main.slope_stderr;
  out.r_squared = main.r_squared;
  out.points_used = log_beta.size();
  out.points_dropped = dropped;
  out.fixed_exponent = fixed_exponent;
  out.fixed_c = fixed.slope;
  out.fixed_prefactor = std::exp(-fixed.intercept);
  return out;
}

}  // namespace mott
