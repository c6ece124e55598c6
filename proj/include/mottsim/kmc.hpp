// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <unordered_map>

#include "mottsim/rates.hpp"

namespace mott {

/// One continuous-time walk: event times (starting at 0), the site index
/// after each event, and the unwrapped displacement from the origin after
/// each event (flat, d-strided).
struct Trajectory {
  int dim = 0;
  std::vector<double> times;
  std::vector<std::uint32_t> sites;
  std::vector<double> displacement;
  bool stuck = false;      // walker hit a zero escape rate and stays put
  bool truncated = false;  // step cap reached before t_max

  std::size_t events() const { return times.size(); }

  /// unwrapped position at time t (right-continuous, last event <= t);
  /// writes dim values into out
  void position_at(double t, std::span<double> out) const;
  /// largest time this trajectory is valid for (t_max unless truncated)
  double coverage() const { return truncated ? times.back() : 1e300; }
};

struct SimulateOptions {
  std::uint64_t max_steps = 400000;
  std::size_t cache_max_bytes = 24u << 20;  // per-site rate tables
  // stop once |X_t|^2 reaches this value (horizon calibration); 0 = never
  double stop_displacement2 = 0.0;
};

/// Kinetic Monte Carlo run of the Mott walk started at the origin point of a
/// Palm configuration: exponential holding times with parameter lambda_x,
/// jumps drawn proportionally to the rates.  Periodic boxes must satisfy
/// side > 2 r_cut so minimum-image jump vectors are unambiguous.
Trajectory simulate(const MarkedConfiguration& cfg, const RateModel& model,
                    double t_max, RngStream& rng,
                    const SimulateOptions& opts = {});

/// Same walk re-using a prebuilt grid (one grid per configuration).
Trajectory simulate(const MarkedConfiguration& cfg, const RateModel& model,
                    const CellGrid& grid, double t_max, RngStream& rng,
                    const SimulateOptions& opts = {});

/// Memory-light variant for long walks: records the unwrapped position only
/// at the given sample times instead of at every event, so the step budget
/// can be generous.  Used by the diffusion pipelines.
struct SampledWalk {
  std::vector<double> positions;  // row-major [time][axis]
  bool stuck = false;
  bool truncated = false;  // step cap hit before the last sample time
  double hit_time = -1.0;  // time |X|^2 first reached stop_displacement2
  std::uint64_t steps = 0;
};

SampledWalk simulate_sampled(const MarkedConfiguration& cfg,
                             const RateModel& model, const CellGrid& grid,
                             std::span<const double> sample_times,
                             RngStream& rng, const SimulateOptions& opts = {});

}  // namespace mott
