// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mottsim/percolation.hpp"
#include "mottsim/rates.hpp"

namespace mott {

/// Variational test function f on Palm configurations.  The cluster kind is
/// the explicit trial function behind the upper bound: minus the minimal
/// i-th coordinate over the origin's graph cluster, active only when
/// 1 <= |C_0| <= cap, so 0 <= f <= cap * range always.
class TestFunction {
 public:
  enum class Kind { zero, cluster, user };

  static TestFunction zero();
  static TestFunction cluster(int axis, std::size_t cap, MottGraphParams params);
  static TestFunction user(std::function<double(const MarkedConfiguration&)> f);

  Kind kind() const { return kind_; }
  int axis() const { return axis_; }
  std::size_t cap() const { return cap_; }
  const MottGraphParams& params() const { return params_; }
  /// sup norm guarantee for the cluster kind: cap * range
  double sup_bound() const;

  /// f(xi); the configuration must carry an origin
  double eval(const MarkedConfiguration& cfg) const;
  double eval(const MarkedConfiguration& cfg, const CellGrid& grid) const;

  /// f(S_x xi) without materializing the translation; for the user kind this
  /// falls back to an explicit translate (periodic boxes only)
  double eval_translated(const MarkedConfiguration& cfg, const CellGrid& grid,
                         std::uint32_t x_index) const;

 private:
  Kind kind_ = Kind::zero;
  int axis_ = 0;
  std::size_t cap_ = 0;
  MottGraphParams params_;
  std::function<double(const MarkedConfiguration&)> user_;
};

/// nabla_x f = f(S_x xi) - f(xi)
double gradient(const TestFunction& f, const MarkedConfiguration& cfg,
                std::uint32_t x_index);

struct VarEstimate {
  double value = 0.0;
  double stderr_value = 0.0;
  std::size_t replicas = 0;
};

/// Monte Carlo value of the variational quadratic form for a fixed test
/// function: E sum_x c_{0,x} (a.x - nabla_x f)^2 over Palm environments.
/// Every fixed f upper-bounds (a, D a).
VarEstimate variational_rhs(const TestFunction& f, const PalmSource& source,
                            const RateModel& model, std::span<const double> a,
                            std::size_t n, std::uint64_t seed,
                            std::uint64_t salt = 0, int workers = 1);

/// Monte Carlo value of the explicit off-cluster bound:
/// 6 E sum_x c_{0,x} ((x_i)^2 + range^2 |C_0|^2) 1{x not in C_0}.
VarEstimate off_cluster_bound(const PalmSource& source, const RateModel& model,
                              const MottGraphParams& params, int axis,
                              std::size_t n, std::uint64_t seed,
                              std::uint64_t salt = 0, int workers = 1);

/// c1 * beta^c2 * exp(-C beta^((alpha+1)/(alpha+1+d)))
double closed_form_bound(double beta, double alpha, int dim, double c1,
                         double c2, double big_c);

/// Cap on the rate of any pair that is not a graph edge:
/// exp(-min(range, kappa1 beta E(beta))).
double non_edge_rate_cap(const RateModel& model, const MottGraphParams& params);

struct RateCapReport {
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst_ratio = 0.0;  // max rate / cap over sampled non-edge pairs
  double cap = 0.0;
};

/// Samples non-edge pairs from Palm environments and checks the cap exactly.
RateCapReport verify_rate_cap(const PalmSource& source, const RateModel& model,
                   const MottGraphParams& params, std::size_t pairs,
                   std::uint64_t seed, std::uint64_t salt = 0);

struct ExponentFit {
  double slope = 0.0;          // of log(-log D) against log beta
  double slope_stderr = 0.0;
  double r_squared = 0.0;
  std::size_t points_used = 0;
  std::size_t points_dropped = 0;
  // constrained fit -log D = a + C beta^x at the fixed theoretical exponent
  double fixed_exponent = 0.0;
  double fixed_c = 0.0;
  double fixed_prefactor = 0.0;  // e^{-a}
};

/// Fits the stretched-exponential exponent from (beta, D) pairs.  Points with
/// D <= 0 or D >= 1 cannot enter the double-log and are dropped with a count.
/// Requires >= 4 usable points spanning at least one decade in beta.
ExponentFit fit_mott_exponent(std::span<const std::pair<double, double>> pairs,
                              double fixed_exponent);

}  // namespace mott
