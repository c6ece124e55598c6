// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mottsim/kmc.hpp"
#include "mottsim/stats.hpp"

namespace mott {

/// Per-axis mean-square displacement at fixed sample times, averaged over
/// trajectories (and over environments when the caller batches one walk per
/// environment).
struct MsdTable {
  std::vector<double> times;
  int dim = 0;
  // row-major [time][axis]
  std::vector<double> msd;
  std::vector<double> stderr_msd;
  std::vector<std::size_t> n;

  double value(std::size_t t_idx, int axis) const {
    return msd[t_idx * dim + axis];
  }
  double error(std::size_t t_idx, int axis) const {
    return stderr_msd[t_idx * dim + axis];
  }
};

struct DiffusionEstimate {
  // slope of msd vs t over the fit window, per axis (the paper's D_ii)
  std::vector<double> d_axis;
  std::vector<double> stderr_axis;
  double d_mean = 0.0;       // average over axes
  double stderr_mean = 0.0;
  std::size_t replicas = 0;
};

/// Streaming accumulator so trajectories can be discarded as they arrive.
/// The diffusion slope is measured over the trailing window_fraction of the
/// time range; its error comes from per-replica slopes, which keeps the
/// correlations between sample times exact.
class MsdAccumulator {
 public:
  MsdAccumulator(std::vector<double> sample_times, int dim,
                 double window_fraction = 0.5);

  void add(const Trajectory& traj);

  /// squared coordinates at the sample times, row-major [time][axis]; the
  /// parallel pipelines precompute these per replica and merge in order
  static std::vector<double> squares_at(const Trajectory& traj,
                                        std::span<const double> times);
  void add_squares(std::span<const double> squares);
  void note_skipped() { ++skipped_; }

  MsdTable table() const;
  DiffusionEstimate diffusion() const;
  std::size_t replicas() const { return replicas_; }
  std::size_t skipped() const { return skipped_; }

 private:
  std::vector<double> times_;
  int dim_;
  std::size_t window_start_;
  std::vector<double> slope_coeff_;  // least-squares weights over the window
  std::vector<RunningStat> per_time_axis_;
  std::vector<RunningStat> slope_axis_;
  std::size_t replicas_ = 0;
  std::size_t skipped_ = 0;  // truncated before the window end
};

/// Convenience wrapper over the accumulator.
MsdTable msd(std::span<const Trajectory> trajectories,
             std::vector<double> sample_times);

/// Geometric lead-in plus a linear fit window: helper used by the scan
/// experiments to build sample times for a horizon t_max.
std::vector<double> default_sample_times(double t_max, std::size_t count = 16);

/// Flat text table of one trajectory: t, site_index, x_1..x_d (unwrapped).
void export_trajectory(const Trajectory& traj, const std::string& path);

/// CSV with columns t, axis, msd, stderr, n.
void export_msd(const MsdTable& table, const std::string& path,
                std::uint64_t seed);

}  // namespace mott
