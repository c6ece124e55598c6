// SPDX-License-Identifier: Apache-2.0
#include "mottsim/msd.hpp"

#include "mottsim/io.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mott {

MsdAccumulator::MsdAccumulator(std::vector<double> sample_times, int dim,
                               double window_fraction)
    : times_(std::move(sample_times)), dim_(dim) {
  if (times_.empty()) throw std::invalid_argument("MsdAccumulator: no sample times");
  if (!std::is_sorted(times_.begin(), times_.end()))
    throw std::invalid_argument("MsdAccumulator: sample times must be sorted");
  if (!(window_fraction > 0.0 && window_fraction <= 1.0))
    throw std::invalid_argument("MsdAccumulator: bad window fraction");
  const double t_end = times_.back();
  const double t_start = t_end * (1.0 - window_fraction);
  window_start_ = 0;
  while (window_start_ < times_.size() && times_[window_start_] < t_start)
    ++window_start_;
  if (times_.size() - window_start_ < 2) {
    if (times_.size() < 2)
      throw std::invalid_argument("MsdAccumulator: need >= 2 sample times");
    window_start_ = times_.size() - 2;
  }
  // least-squares slope weights c_k with sum c_k = 0, sum c_k t_k = 1
  const std::size_t w = times_.size() - window_start_;
  double tbar = 0.0;
  for (std::size_t k = window_start_; k < times_.size(); ++k) tbar += times_[k];
  tbar /= static_cast<double>(w);
  double sxx = 0.0;
  for (std::size_t k = window_start_; k < times_.size(); ++k)
    sxx += (times_[k] - tbar) * (times_[k] - tbar);
  if (sxx == 0.0)
    throw std::invalid_argument("MsdAccumulator: degenerate fit window");
  slope_coeff_.assign(w, 0.0);
  for (std::size_t k = 0; k < w; ++k)
    slope_coeff_[k] = (times_[window_start_ + k] - tbar) / sxx;

  per_time_axis_.resize(times_.size() * static_cast<std::size_t>(dim_));
  slope_axis_.resize(static_cast<std::size_t>(dim_));
}

std::vector<double> MsdAccumulator::squares_at(const Trajectory& traj,
                                               std::span<const double> times) {
  const std::size_t d = static_cast<std::size_t>(traj.dim);
  std::vector<double> squares(times.size() * d);
  std::vector<double> pos(d);
  for (std::size_t k = 0; k < times.size(); ++k) {
    traj.position_at(times[k], pos);
    for (std::size_t a = 0; a < d; ++a) squares[k * d + a] = pos[a] * pos[a];
  }
  return squares;
}

void MsdAccumulator::add_squares(std::span<const double> squares) {
  const std::size_t d = static_cast<std::size_t>(dim_);
  if (squares.size() != times_.size() * d)
    throw std::invalid_argument("MsdAccumulator: squares size mismatch");
  ++replicas_;
  std::vector<double> slope(d, 0.0);
  for (std::size_t k = 0; k < times_.size(); ++k)
    for (std::size_t a = 0; a < d; ++a) {
      const double sq = squares[k * d + a];
      per_time_axis_[k * d + a].add(sq);
      if (k >= window_start_) slope[a] += slope_coeff_[k - window_start_] * sq;
    }
  for (std::size_t a = 0; a < d; ++a) slope_axis_[a].add(slope[a]);
}

void MsdAccumulator::add(const Trajectory& traj) {
  if (traj.dim != dim_)
    throw std::invalid_argument("MsdAccumulator: dimension mismatch");
  if (traj.coverage() < times_.back()) {
    // a truncated walk cannot be extrapolated without bias; drop it
    ++skipped_;
    return;
  }
  add_squares(squares_at(traj, times_));
}

MsdTable MsdAccumulator::table() const {
  MsdTable t;
  t.times = times_;
  t.dim = dim_;
  const std::size_t d = static_cast<std::size_t>(dim_);
  t.msd.resize(times_.size() * d);
  t.stderr_msd.resize(times_.size() * d);
  t.n.resize(times_.size() * d);
  for (std::size_t k = 0; k < times_.size(); ++k)
    for (std::size_t a = 0; a < d; ++a) {
      const RunningStat& s = per_time_axis_[k * d + a];
      t.msd[k * d + a] = s.mean();
      t.stderr_msd[k * d + a] = s.stderr_mean();
      t.n[k * d + a] = s.count();
    }
  return t;
}

DiffusionEstimate MsdAccumulator::diffusion() const {
  if (replicas_ == 0)
    throw InsufficientData("MsdAccumulator: no usable trajectories");
  DiffusionEstimate est;
  est.replicas = replicas_;
  const std::size_t d = static_cast<std::size_t>(dim_);
  est.d_axis.resize(d);
  est.stderr_axis.resize(d);
  double sum = 0.0, var = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    est.d_axis[a] = slope_axis_[a].mean();
    est.stderr_axis[a] = slope_axis_[a].stderr_mean();
    sum += est.d_axis[a];
    var += est.stderr_axis[a] * est.stderr_axis[a];
  }
  est.d_mean = sum / static_cast<double>(d);
  // axes of one walk are correlated; this underestimates at most mildly
  est.stderr_mean = std::sqrt(var) / static_cast<double>(d);
  return est;
}

MsdTable msd(std::span<const Trajectory> trajectories,
             std::vector<double> sample_times) {
  if (trajectories.empty())
    throw InsufficientData("msd: empty trajectory list");
  MsdAccumulator acc(std::move(sample_times), trajectories[0].dim);
  for (const auto& t : trajectories) acc.add(t);
  return acc.table();
}

std::vector<double> default_sample_times(double t_max, std::size_t count) {
  if (!(t_max > 0.0) || count < 2)
    throw std::invalid_argument("default_sample_times: bad arguments");
  std::vector<double> times(count);
  for (std::size_t k = 0; k < count; ++k)
    times[k] = t_max * static_cast<double>(k + 1) / static_cast<double>(count);
  return times;
}

void export_trajectory(const Trajectory& traj, const std::string& path) {
  const std::size_t d = static_cast<std::size_t>(traj.dim);
  std::string out = "t site";
  for (std::size_t k = 0; k < d; ++k) out += " x_" + std::to_string(k + 1);
  out += '\n';
  for (std::size_t e = 0; e < traj.events(); ++e) {
    out += format_double(traj.times[e]) + " " + std::to_string(traj.sites[e]);
    for (std::size_t k = 0; k < d; ++k)
      out += " " + format_double(traj.displacement[e * d + k]);
    out += '\n';
  }
  write_text_file(path, out);
}

void export_msd(const MsdTable& table, const std::string& path,
                std::uint64_t seed) {
  CsvWriter csv(path, "msd", seed, KeyValueConfig{},
                {"t", "axis", "msd", "stderr", "n"});
  for (std::size_t k = 0; k < table.times.size(); ++k)
    for (int a = 0; a < table.dim; ++a)
      csv.row_values({table.times[k], static_cast<double>(a + 1),
                      table.value(k, a), table.error(k, a),
                      static_cast<double>(table.n[k * table.dim + a])});
}

}  // namespace mott
