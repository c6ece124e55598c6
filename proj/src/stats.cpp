// SPDX-License-Identifier: Apache-2.0
#include "mottsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mott {

double RunningStat::variance() const {
  if (n_ < 2) return 0.0;
  return m2_ / static_cast<double>(n_ - 1);
}

double RunningStat::stderr_mean() const {
  if (n_ < 2) return 0.0;
  return std::sqrt(variance() / static_cast<double>(n_));
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n != y.size() || n < 2)
    throw std::invalid_argument("fit_line: need matching arrays with >= 2 points");
  double sx = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double xbar = sx / n, ybar = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - xbar) * (x[i] - xbar);
    sxy += (x[i] - xbar) * (y[i] - ybar);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: degenerate abscissa");
  LineFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = ybar - f.slope * xbar;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  f.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  if (n > 2) {
    const double s2 = ss_res / static_cast<double>(n - 2);
    f.slope_stderr = std::sqrt(s2 / sxx);
    f.intercept_stderr = std::sqrt(s2 * (1.0 / n + xbar * xbar / sxx));
  }
  return f;
}

LineFit fit_line_weighted(std::span<const double> x, std::span<const double> y,
                          std::span<const double> sigma) {
  const std::size_t n = x.size();
  if (n != y.size() || n != sigma.size() || n < 2)
    throw std::invalid_argument("fit_line_weighted: bad input sizes");
  double sw = 0.0, swx = 0.0, swy = 0.0;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(sigma[i] > 0.0))
      throw std::invalid_argument("fit_line_weighted: sigma must be > 0");
    w[i] = 1.0 / (sigma[i] * sigma[i]);
    sw += w[i];
    swx += w[i] * x[i];
    swy += w[i] * y[i];
  }
  const double xbar = swx / sw, ybar = swy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += w[i] * (x[i] - xbar) * (x[i] - xbar);
    sxy += w[i] * (x[i] - xbar) * (y[i] - ybar);
  }
  if (sxx == 0.0)
    throw std::invalid_argument("fit_line_weighted: degenerate abscissa");
  LineFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = ybar - f.slope * xbar;
  f.slope_stderr = std::sqrt(1.0 / sxx);
  f.intercept_stderr = std::sqrt(1.0 / sw + xbar * xbar / sxx);
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss_res += r * r;
    ss_tot += (y[i] - ybar) * (y[i] - ybar);
  }
  f.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

// Regularized incomplete gamma, series + continued fraction (Numerical
// Recipes style).  Accuracy ~1e-14, plenty for test thresholds.
namespace {

double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0)
    throw std::invalid_argument("gamma_p: domain error");
  if (x == 0.0) return 0.0;
  return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_contfrac(a, x);
}

double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0)
    throw std::invalid_argument("gamma_q: domain error");
  if (x == 0.0) return 1.0;
  return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_contfrac(a, x);
}

double chi_square_sf(double statistic, double dof) {
  if (statistic <= 0.0) return 1.0;
  return gamma_q(dof / 2.0, statistic / 2.0);
}

double poisson_pmf(double mean, std::uint64_t k) {
  if (mean == 0.0) return k == 0 ? 1.0 : 0.0;
  return std::exp(static_cast<double>(k) * std::log(mean) - mean -
                  std::lgamma(static_cast<double>(k) + 1.0));
}

double poisson_cdf(double mean, std::uint64_t k) {
  double c = 0.0;
  for (std::uint64_t j = 0; j <= k; ++j) c += poisson_pmf(mean, j);
  return std::min(c, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  KsResult r;
  r.distance = d;
  // c solves the Kolmogorov tail 2 sum (-1)^{k-1} exp(-2 k^2 c^2) = p(3 sigma)
  const double c_3sigma = 1.8201;
  r.threshold = c_3sigma * std::sqrt((na + nb) / (na * nb));
  r.pass = d <= r.threshold;
  return r;
}

ChiSquareResult chi_square_gof(std::span<const std::uint64_t> observed,
                               std::span<const double> probabilities,
                               std::size_t total) {
  if (observed.size() != probabilities.size() || observed.empty())
    throw std::invalid_argument("chi_square_gof: bad inputs");
  // pool bins from the right until expected >= 5
  std::vector<double> exp_counts;
  std::vector<double> obs_counts;
  double pool_e = 0.0, pool_o = 0.0;
  for (std::size_t k = 0; k < observed.size(); ++k) {
    pool_e += probabilities[k] * static_cast<double>(total);
    pool_o += static_cast<double>(observed[k]);
    if (pool_e >= 5.0) {
      exp_counts.push_back(pool_e);
      obs_counts.push_back(pool_o);
      pool_e = pool_o = 0.0;
    }
  }
  if (pool_e > 0.0 && !exp_counts.empty()) {
    exp_counts.back() += pool_e;
    obs_counts.back() += pool_o;
  }
  ChiSquareResult r;
  if (exp_counts.size() < 2) {
    r.pass = true;  // too few usable bins to reject anything
    return r;
  }
  for (std::size_t k = 0; k < exp_counts.size(); ++k) {
    const double d = obs_counts[k] - exp_counts[k];
    r.statistic += d * d / exp_counts[k];
  }
  r.dof = static_cast<double>(exp_counts.size() - 1);
  r.p_value = chi_square_sf(r.statistic, r.dof);
  r.pass = r.p_value > kThreeSigmaPValue;
  return r;
}

ChiSquareResult chi_square_independence(std::span<const std::uint64_t> table,
                                        std::size_t rows, std::size_t cols) {
  if (table.size() != rows * cols || rows < 2 || cols < 2)
    throw std::invalid_argument("chi_square_independence: bad table");
  std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double v = static_cast<double>(table[i * cols + j]);
      row_sum[i] += v;
      col_sum[j] += v;
      total += v;
    }
  if (total == 0.0) throw std::invalid_argument("chi_square_independence: empty table");
  ChiSquareResult r;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double e = row_sum[i] * col_sum[j] / total;
      if (e <= 0.0) continue;
      const double d = static_cast<double>(table[i * cols + j]) - e;
      r.statistic += d * d / e;
    }
  r.dof = static_cast<double>((rows - 1) * (cols - 1));
  r.p_value = chi_square_sf(r.statistic, r.dof);
  r.pass = r.p_value > kThreeSigmaPValue;
  return r;
}

bool within_three_sigma(double a, double sa, double b, double sb) {
  const double s = std::sqrt(sa * sa + sb * sb);
  return std::abs(a - b) <= kThreeSigma * s;
}

}  // namespace mott
