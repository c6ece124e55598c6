// SPDX-License-Identifier: Apache-2.0
#include "mottsim/kmc.hpp"

#include <algorithm>
#include <cmath>

namespace mott {

void Trajectory::position_at(double t, std::span<double> out) const {
  const std::size_t d = static_cast<std::size_t>(dim);
  if (times.empty() || t < times.front()) {
    for (std::size_t k = 0; k < d; ++k) out[k] = 0.0;
    return;
  }
  // index of the last event time <= t
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  const std::size_t idx = static_cast<std::size_t>(it - times.begin()) - 1;
  for (std::size_t k = 0; k < d; ++k) out[k] = displacement[idx * d + k];
}

namespace {

// per-site rate table: neighbors with cumulative rates for inversion sampling
struct SiteTable {
  double lambda = 0.0;
  std::vector<std::uint32_t> neighbors;
  std::vector<double> cumulative;

  std::size_t bytes() const {
    return neighbors.size() * (sizeof(std::uint32_t) + sizeof(double)) +
           sizeof(*this);
  }
};

class RateCache {
 public:
  RateCache(const MarkedConfiguration& cfg, const RateModel& model,
            const CellGrid& grid, std::size_t max_bytes)
      : cfg_(cfg), model_(model), grid_(grid), max_bytes_(max_bytes) {}

  const SiteTable& at(std::uint32_t site) {
    auto it = cache_.find(site);
    if (it != cache_.end()) return it->second;
    SiteTable table;
    const double ex = cfg_.energy(site);
    grid_.for_each_within(
        cfg_.point(site), model_.r_cut,
        [&](std::uint32_t j, double d2) {
          const double c =
              rate_from_parts(std::sqrt(d2), ex, cfg_.energy(j), model_);
          table.neighbors.push_back(j);
          table.lambda += c;
          table.cumulative.push_back(table.lambda);
        },
        site);
    bytes_ += table.bytes();
    // the working set of a walk is small; dropping everything on overflow is
    // cheaper than tracking recency
    if (bytes_ > max_bytes_ && !cache_.empty()) {
      cache_.clear();
      bytes_ = table.bytes();
    }
    return cache_.emplace(site, std::move(table)).first->second;
  }

 private:
  const MarkedConfiguration& cfg_;
  const RateModel& model_;
  const CellGrid& grid_;
  std::size_t max_bytes_;
  std::size_t bytes_ = 0;
  std::unordered_map<std::uint32_t, SiteTable> cache_;
};

}  // namespace

Trajectory simulate(const MarkedConfiguration& cfg, const RateModel& model,
                    const CellGrid& grid, double t_max, RngStream& rng,
                    const SimulateOptions& opts) {
  if (!cfg.has_origin())
    throw std::invalid_argument("simulate: walk needs a Palm configuration");
  if (!(t_max >= 0.0)) throw std::invalid_argument("simulate: t_max must be >= 0");
  if (cfg.box().periodic() && cfg.box().min_side() <= 2.0 * model.r_cut)
    throw std::invalid_argument("simulate: periodic box side must exceed 2 r_cut");

  const std::size_t d = cfg.box().sides.size();
  Trajectory traj;
  traj.dim = static_cast<int>(d);
  std::uint32_t site = static_cast<std::uint32_t>(*cfg.origin_index());
  traj.times.push_back(0.0);
  traj.sites.push_back(site);
  traj.displacement.assign(d, 0.0);

  RateCache cache(cfg, model, grid, opts.cache_max_bytes);
  std::vector<double> pos(d, 0.0);
  std::vector<double> jump(d);
  double t = 0.0;

  for (std::uint64_t step = 0; step < opts.max_steps; ++step) {
    const SiteTable& table = cache.at(site);
    if (table.lambda <= 0.0) {
      traj.stuck = true;
      return traj;
    }
    t += rng.exponential(table.lambda);
    if (t > t_max) return traj;
    // inversion on the cumulative rates
    const double target = rng.uniform() * table.lambda;
    const auto it = std::upper_bound(table.cumulative.begin(),
                                     table.cumulative.end(), target);
    std::size_t pick = static_cast<std::size_t>(it - table.cumulative.begin());
    if (pick >= table.neighbors.size()) pick = table.neighbors.size() - 1;
    const std::uint32_t next = table.neighbors[pick];
    displacement(cfg.point(next), cfg.point(site), cfg.box(), jump);
    for (std::size_t k = 0; k < d; ++k) pos[k] += jump[k];
    site = next;
    traj.times.push_back(t);
    traj.sites.push_back(site);
    traj.displacement.insert(traj.displacement.end(), pos.begin(), pos.end());
    if (opts.stop_displacement2 > 0.0) {
      double r2 = 0.0;
      for (double v : pos) r2 += v * v;
      if (r2 >= opts.stop_displacement2) return traj;
    }
  }
  traj.truncated = true;
  return traj;
}

Trajectory simulate(const MarkedConfiguration& cfg, const RateModel& model,
                    double t_max, RngStream& rng, const SimulateOptions& opts) {
  const double target_cell = rate_grid_cell(cfg.box());
  const CellGrid grid(cfg.coords(), cfg.box(), target_cell);
  return simulate(cfg, model, grid, t_max, rng, opts);
}

SampledWalk simulate_sampled(const MarkedConfiguration& cfg,
                             const RateModel& model, const CellGrid& grid,
                             std::span<const double> sample_times,
                             RngStream& rng, const SimulateOptions& opts) {
  if (!cfg.has_origin())
    throw std::invalid_argument("simulate: walk needs a Palm configuration");
  if (sample_times.empty() ||
      !std::is_sorted(sample_times.begin(), sample_times.end()))
    throw std::invalid_argument("simulate_sampled: bad sample times");
  if (cfg.box().periodic() && cfg.box().min_side() <= 2.0 * model.r_cut)
    throw std::invalid_argument("simulate: periodic box side must exceed 2 r_cut");

  const std::size_t d = cfg.box().sides.size();
  SampledWalk walk;
  walk.positions.assign(sample_times.size() * d, 0.0);

  RateCache cache(cfg, model, grid, opts.cache_max_bytes);
  std::uint32_t site = static_cast<std::uint32_t>(*cfg.origin_index());
  std::vector<double> pos(d, 0.0);
  std::vector<double> jump(d);
  double t = 0.0;
  std::size_t next_sample = 0;
  const double t_end = sample_times.back();

  const auto record_until = [&](double now) {
    while (next_sample < sample_times.size() && sample_times[next_sample] < now) {
      for (std::size_t k = 0; k < d; ++k)
        walk.positions[next_sample * d + k] = pos[k];
      ++next_sample;
    }
  };

  for (std::uint64_t step = 0; step < opts.max_steps; ++step) {
    const SiteTable& table = cache.at(site);
    if (table.lambda <= 0.0) {
      walk.stuck = true;  // frozen in place: remaining samples keep pos
      break;
    }
    t += rng.exponential(table.lambda);
    record_until(std::min(t, t_end + 1.0));
    if (t > t_end) break;
    const double target = rng.uniform() * table.lambda;
    const auto it = std::upper_bound(table.cumulative.begin(),
                                     table.cumulative.end(), target);
    std::size_t pick = static_cast<std::size_t>(it - table.cumulative.begin());
    if (pick >= table.neighbors.size()) pick = table.neighbors.size() - 1;
    const std::uint32_t next = table.neighbors[pick];
    displacement(cfg.point(next), cfg.point(site), cfg.box(), jump);
    for (std::size_t k = 0; k < d; ++k) pos[k] += jump[k];
    site = next;
    ++walk.steps;
    if (opts.stop_displacement2 > 0.0 && walk.hit_time < 0.0) {
      double r2 = 0.0;
      for (double v : pos) r2 += v * v;
      if (r2 >= opts.stop_displacement2) {
        walk.hit_time = t;
        break;
      }
    }
  }
  if (next_sample < sample_times.size()) {
    if (walk.stuck) {
      // frozen forever: the current position is valid for all later times
      for (; next_sample < sample_times.size(); ++next_sample)
        for (std::size_t k = 0; k < d; ++k)
          walk.positions[next_sample * d + k] = pos[k];
    } else {
      // step cap or displacement stop: later samples were never reached
      walk.truncated = true;
    }
  }
  return walk;
}

}  // namespace mott
