// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mott {

/// Welford accumulator for mean and standard error.
class RunningStat {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const;       // sample variance (n-1 denominator)
  double stderr_mean() const;    // sqrt(variance / n)

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
  double r_squared = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares y = a + b x with residual-based parameter errors.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Weighted least squares with known per-point standard deviations; parameter
/// errors are propagated from sigma, not from residuals.
LineFit fit_line_weighted(std::span<const double> x, std::span<const double> y,
                          std::span<const double> sigma);

// --- special functions -----------------------------------------------------

/// regularized lower incomplete gamma P(a, x)
double gamma_p(double a, double x);
/// regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)
double gamma_q(double a, double x);

/// survival function of the chi-square distribution with k dof
double chi_square_sf(double statistic, double dof);

double poisson_pmf(double mean, std::uint64_t k);
double poisson_cdf(double mean, std::uint64_t k);

// --- hypothesis-test helpers ------------------------------------------------

/// Two-sided z threshold used throughout the statistical checks ("3 sigma").
inline constexpr double kThreeSigma = 3.0;
/// p-value corresponding to +-3 sigma of a standard normal.
inline constexpr double kThreeSigmaPValue = 0.0026997960632601866;

/// Kolmogorov-Smirnov two-sample test on scalar samples.  Returns the KS
/// distance and whether it stays below the threshold c * sqrt((n+m)/(n m))
/// with c calibrated to the 3-sigma p-value.  Conservative for discrete data.
struct KsResult {
  double distance = 0.0;
  double threshold = 0.0;
  bool pass = false;
};
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Pearson chi-square goodness of fit of observed counts against
/// probabilities (tail bins pooled so every expected count is >= 5).
struct ChiSquareResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  bool pass = false;  // p_value above the 3-sigma p-value
};
ChiSquareResult chi_square_gof(std::span<const std::uint64_t> observed,
                               std::span<const double> probabilities,
                               std::size_t total);

/// Chi-square independence test for a two-way contingency table
/// (rows x cols, row-major).
ChiSquareResult chi_square_independence(std::span<const std::uint64_t> table,
                                        std::size_t rows, std::size_t cols);

/// |a - b| <= 3 * sqrt(sa^2 + sb^2); the workhorse "agree within 3 combined
/// standard errors" check.
bool within_three_sigma(double a, double sa, double b, double sb);

}  // namespace mott
