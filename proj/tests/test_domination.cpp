// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mottsim/domination.hpp"
#include "mottsim/env_gen.hpp"
#include "mottsim/percolation.hpp"
#include "mottsim/stats.hpp"

using namespace mott;

TEST_CASE("bernoulli_dominate: product field under the cap") {
  const double p = 0.6;
  BinaryFieldModel field;
  field.size = 400;
  field.conditional = [](std::size_t, std::span<const std::uint8_t>) {
    return 0.3;  // p/2, independent of the revealed sites
  };
  std::size_t sigma_ones = 0, omega_ones = 0;
  const std::size_t reps = 2000;
  for (std::size_t rep = 0; rep < reps; ++rep) {
    RngStream rng(120, rep);
    const DominatedFields out = bernoulli_dominate(field, p, rng);
    REQUIRE(out.cap_violations == 0);
    for (std::size_t x = 0; x < field.size; ++x) {
      REQUIRE(out.sigma[x] <= out.omega[x]);  // pointwise, exact
      sigma_ones += out.sigma[x];
      omega_ones += out.omega[x];
    }
  }
  const double total = static_cast<double>(reps * field.size);
  const double se_sigma = std::sqrt(0.3 * 0.7 / total);
  CHECK(std::abs(sigma_ones / total - 0.3) <= 3.0 * se_sigma);
  const double se_omega = std::sqrt(p * (1 - p) / total);
  CHECK(std::abs(omega_ones / total - p) <= 3.0 * se_omega);
}

TEST_CASE("bernoulli_dominate: a violated cap is reported") {
  BinaryFieldModel field;
  field.size = 100;
  field.conditional = [](std::size_t x, std::span<const std::uint8_t>) {
    return x == 7 ? 0.9 : 0.1;
  };
  RngStream rng(121, 0);
  const DominatedFields out = bernoulli_dominate(field, 0.5, rng);
  CHECK(out.cap_violations == 1);
}

TEST_CASE("bernoulli_dominate: marginal of sigma' matches direct sampling") {
  // markov-ish field: conditional depends on the previous site
  BinaryFieldModel field;
  field.size = 200;
  field.conditional = [](std::size_t x, std::span<const std::uint8_t> prefix) {
    if (x == 0) return 0.2;
    return prefix[x - 1] ? 0.4 : 0.1;
  };
  const std::size_t reps = 4000;
  std::vector<double> coupled_sums, direct_sums;
  for (std::size_t rep = 0; rep < reps; ++rep) {
    RngStream rng(122, rep);
    const DominatedFields out = bernoulli_dominate(field, 0.4, rng);
    double s = 0.0;
    for (auto v : out.sigma) s += v;
    coupled_sums.push_back(s);
    // direct sequential sampling of the same law
    RngStream rng2(123, rep);
    std::vector<std::uint8_t> sigma(field.size, 0);
    double s2 = 0.0;
    for (std::size_t x = 0; x < field.size; ++x) {
      sigma[x] = rng2.uniform() < field.conditional(x, {sigma.data(), x}) ? 1 : 0;
      s2 += sigma[x];
    }
    direct_sums.push_back(s2);
  }
  CHECK(ks_two_sample(coupled_sums, direct_sums).pass);
}

TEST_CASE("choose_rho_prime: closed form, monotonicity, bracket certificate") {
  // N = 1, K = 1: p <= 1 - e^{-rho'}, i.e. rho' = -log(1-p)
  for (double p : {0.1, 0.3, 0.5, 0.8}) {
    const double rho = choose_rho_prime(p, 1, 1.0, 2);
    CHECK(rho == doctest::Approx(-std::log1p(-p)).epsilon(1e-8));
    // the returned value is admissible, slightly less is not
    const double p_prime = p;
    CHECK(p_prime <= poisson_upper_tail(rho, 1) + 1e-12);
    CHECK(p_prime > poisson_upper_tail(rho * (1.0 - 1e-6), 1));
  }
  // monotone in p and in N
  double prev = 0.0;
  for (double p : {0.1, 0.2, 0.4, 0.6, 0.8}) {
    const double rho = choose_rho_prime(p, 2, 1.0, 2);
    CHECK(rho >= prev);
    prev = rho;
  }
  prev = 0.0;
  for (std::uint32_t n : {1u, 2u, 4u, 8u}) {
    const double rho = choose_rho_prime(0.5, n, 1.0, 2);
    CHECK(rho >= prev);
    prev = rho;
  }
  // tiny p needs only a tiny rho'
  CHECK(choose_rho_prime(1e-4, 1, 1.0, 2) < 2e-4);
}

TEST_CASE("prop61_coupling: crystal base, domination and marginals") {
  const BoxGeometry box = BoxGeometry::cube(21.0, 2, Boundary::open);
  const CrystalSpec full = CrystalSpec::cubic(1.0, 2, 1.0);
  const PointSampler base = [&](RngStream& rng) {
    return diluted_crystal(full, box, rng);
  };
  const double p = 0.5;

  std::vector<double> y1_pool, direct_pool;
  for (std::uint64_t rep = 0; rep < 300; ++rep) {
    const CouplingPair pair = prop61_coupling(base, box, p, 1.0, 1, 130, rep);
    const DominationCheck check = verify_domination(pair);
    REQUIRE(check.holds);
    REQUIRE(check.min_slack >= 0);
    CHECK(pair.rho_prime == doctest::Approx(-std::log1p(-p)).epsilon(1e-8));
    for (auto c : pair.y1.counts) y1_pool.push_back(static_cast<double>(c));
    // direct thinned field for the marginal comparison
    RngStream rng(131, rep);
    const auto pts = base(rng);
    const auto kept = thin(pts, 2, p, rng);
    for (auto c : count_field(kept, box, 1.0).counts)
      direct_pool.push_back(static_cast<double>(c));
  }
  CHECK(ks_two_sample(y1_pool, direct_pool).pass);

  // p -> 0: the thinned field is almost surely empty, domination trivial
  const CouplingPair sparse = prop61_coupling(base, box, 1e-6, 1.0, 1, 132, 0);
  CHECK(verify_domination(sparse).holds);
  CHECK(sparse.y1.total() == 0);
}

TEST_CASE("prop61_coupling: a density-bound violation is a hard failure") {
  const BoxGeometry box = BoxGeometry::cube(11.0, 2, Boundary::open);
  // two points in the origin cell but N = 1
  const PointSampler bad = [](RngStream&) {
    return std::vector<double>{0.0, 0.0, 0.1, 0.1};
  };
  CHECK_THROWS_WITH_AS(prop61_coupling(bad, box, 0.5, 1.0, 1, 133, 0),
                       doctest::Contains("cell"), std::runtime_error);
}

TEST_CASE("verify_domination: exact comparison and violation enumeration") {
  CountField a;
  a.cell_size = 1.0;
  a.cells_per_axis = {3, 3};
  a.counts.assign(9, 2);
  CountField b = a;
  CouplingPair pair;
  pair.y1 = a;
  pair.y2 = b;
  CHECK(verify_domination(pair).holds);
  CHECK(verify_domination(pair).min_slack == 0);

  pair.y2.counts[4] -= 1;  // one decremented cell
  const DominationCheck check = verify_domination(pair);
  CHECK_FALSE(check.holds);
  CHECK(check.violating_cells == std::vector<std::size_t>{4});

  pair.y2.cells_per_axis = {9, 1};
  CHECK_THROWS_AS(verify_domination(pair), std::invalid_argument);
}

TEST_CASE("beta_star_from_p inverts the interval mass") {
  const NuLaw nu{0.0, 1.0};
  for (double p : {0.05, 0.2, 0.7}) {
    const double beta_star = beta_star_from_p(p, nu, 2);
    CHECK(energy_threshold(beta_star, nu.alpha, 2) ==
          doctest::Approx(nu.interval_mass_inverse(p)).epsilon(1e-9));
    CHECK(nu.interval_mass(energy_threshold(beta_star, nu.alpha, 2)) ==
          doctest::Approx(p).epsilon(1e-9));
  }
  const NuLaw heavier{1.0, 1.0};
  const double bs = beta_star_from_p(0.25, heavier, 3);
  CHECK(heavier.interval_mass(energy_threshold(bs, heavier.alpha, 3)) ==
        doctest::Approx(0.25).epsilon(1e-9));
}
