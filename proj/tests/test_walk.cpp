// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "mottsim/env_gen.hpp"
#include "mottsim/io.hpp"
#include "mottsim/kmc.hpp"
#include "mottsim/msd.hpp"
#include "support/expm.hpp"

using namespace mott;

namespace {

MarkedConfiguration two_points(double separation, double e0, double e1) {
  const BoxGeometry box = BoxGeometry::cube(10.0, 2, Boundary::open);
  return MarkedConfiguration::create(
      box, {0.0, 0.0, separation, 0.0}, {e0, e1}, std::size_t{0});
}

// site index occupied at time t
std::uint32_t site_at(const Trajectory& traj, double t) {
  std::size_t idx = 0;
  while (idx + 1 < traj.times.size() && traj.times[idx + 1] <= t) ++idx;
  return traj.sites[idx];
}

}  // namespace

TEST_CASE("pair rate: diagonal, unit distance, and the mean-field example") {
  const auto cfg = two_points(1.0, 0.0, 0.0);
  const RateModel model = RateModel::mean_field(1.0);
  CHECK(pair_rate(cfg, 0, 0, model) == 0.0);
  CHECK(pair_rate(cfg, 0, 1, model) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  // mean field, E_x = 1, E_y = 0, |x-y| = 2, beta = 3: u = 1, rate = e^-5
  const auto cfg2 = two_points(2.0, 1.0, 0.0);
  const RateModel model3 = RateModel::mean_field(3.0);
  CHECK(pair_rate(cfg2, 0, 1, model3) ==
        doctest::Approx(std::exp(-5.0)).epsilon(1e-12));
}

TEST_CASE("rate symmetry and the detailed-balance ratio for symmetric u") {
  const BoxGeometry box = BoxGeometry::cube(20.0, 2, Boundary::open);
  const NuLaw nu{0.0, 1.0};
  RngStream rng(50, 0);
  const auto cfg = randomize(sample_poisson(0.4, box, rng), box, nu, rng);
  const RateModel model = RateModel::mean_field(2.5);
  for (std::size_t i = 0; i + 1 < cfg.size() && i < 40; ++i) {
    // exact equality: u symmetric means c_xy == c_yx
    CHECK(pair_rate(cfg, i, i + 1, model) == pair_rate(cfg, i + 1, i, model));
  }
}

TEST_CASE("rate decreases in beta when the energy cost is positive") {
  RngStream rng(51, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const double ex = rng.uniform(-1.0, 1.0), ey = rng.uniform(-1.0, 1.0);
    if (std::abs(ex) + std::abs(ey) == 0.0) continue;
    const auto cfg = two_points(1.0 + rng.uniform(), ex, ey);
    const double b1 = 1.0 + 3.0 * rng.uniform();
    const double b2 = b1 + 0.5 + rng.uniform();
    REQUIRE(pair_rate(cfg, 0, 1, RateModel::mean_field(b2)) <
            pair_rate(cfg, 0, 1, RateModel::mean_field(b1)));
  }
}

TEST_CASE("custom u validation") {
  RateModel model = RateModel::mean_field(1.0);
  model.custom_u = [](double ex, double ey) {
    return std::abs(ex) + std::abs(ey);  // kappa1 = kappa2 = 1
  };
  model.kappa1 = 0.9;
  model.kappa2 = 1.1;
  RngStream rng(52, 0);
  CHECK(validate_custom_u(model, 10000, rng));
  model.kappa2 = 0.95;  // now u exceeds the upper bound
  CHECK_FALSE(validate_custom_u(model, 10000, rng));
}

TEST_CASE("escape rate: pair value, brute-force oracle, translation invariance") {
  const auto pair_cfg = two_points(1.0, 0.0, 0.0);
  const RateModel model = RateModel::mean_field(1.0);
  const CellGrid pair_grid(pair_cfg.coords(), pair_cfg.box(), 1.0);
  bool stuck = false;
  CHECK(escape_rate(pair_cfg, 0, model, pair_grid, &stuck) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK_FALSE(stuck);

  // 500-point configuration: grid-truncated sum vs all-pairs within r_cut
  const BoxGeometry box = BoxGeometry::cube(100.0, 2);
  const NuLaw nu{0.0, 1.0};
  RngStream rng(53, 0);
  auto cfg = randomize(sample_poisson(0.05, box, rng), box, nu, rng);
  const RateModel model40 = RateModel::mean_field(2.0, 40.0);
  const CellGrid grid(cfg.coords(), cfg.box(), 5.0);
  for (std::size_t i = 0; i < std::min<std::size_t>(cfg.size(), 25); ++i) {
    double brute = 0.0;
    for (std::size_t j = 0; j < cfg.size(); ++j) {
      if (j == i) continue;
      const double dist = distance(cfg.point(i), cfg.point(j), cfg.box());
      if (dist <= model40.r_cut) brute += pair_rate(cfg, i, j, model40);
    }
    const double fast = escape_rate(cfg, i, model40, grid);
    REQUIRE(std::abs(fast - brute) <= 1e-12 * std::max(1.0, brute));
  }

  // translation invariance on the torus
  const auto moved = translate(cfg, 7);
  const CellGrid grid2(moved.coords(), moved.box(), 5.0);
  const double before = escape_rate(cfg, 7, model40, grid);
  const double after = escape_rate(moved, 7, model40, grid2);
  CHECK(std::abs(after - before) <= 1e-12 * before);
}

TEST_CASE("escape rate: isolated point is stuck; tail bound controls truncation") {
  const BoxGeometry box = BoxGeometry::cube(10.0, 2, Boundary::open);
  const auto lonely = MarkedConfiguration::create(box, {0.0, 0.0}, {0.0},
                                                  std::size_t{0});
  const RateModel short_cut = RateModel::mean_field(1.0, 2.0);
  const CellGrid grid(lonely.coords(), lonely.box(), 1.0);
  bool stuck = false;
  CHECK(escape_rate(lonely, 0, short_cut, grid, &stuck) == 0.0);
  CHECK(stuck);

  // doubling r_cut changes lambda by less than the analytic tail bound
  const BoxGeometry big = BoxGeometry::cube(120.0, 2);
  const NuLaw nu{0.0, 1.0};
  RngStream rng(54, 0);
  const auto cfg = randomize(sample_poisson(1.0, big, rng), big, nu, rng);
  const CellGrid big_grid(cfg.coords(), cfg.box(), 4.0);
  const RateModel m20 = RateModel::mean_field(1.0, 20.0);
  const RateModel m40 = RateModel::mean_field(1.0, 40.0);
  const double bound = truncation_tail_bound(1.0, 20.0, 2);
  for (std::size_t i = 0; i < 20; ++i) {
    const double a = escape_rate(cfg, i, m20, big_grid);
    const double b = escape_rate(cfg, i, m40, big_grid);
    REQUIRE(b >= a);
    REQUIRE(b - a <= 5.0 * bound);  // bound is an expectation-level envelope
  }
  // the d = 2 closed form: rho 2 pi e^-r (r + 1)
  CHECK(truncation_tail_bound(1.0, 20.0, 2) ==
        doctest::Approx(2.0 * M_PI * std::exp(-20.0) * 21.0).epsilon(1e-9));
}

TEST_CASE("jump distribution: symmetry, single neighbor, engine frequencies") {
  const BoxGeometry box = BoxGeometry::cube(10.0, 2, Boundary::open);
  const auto sym = MarkedConfiguration::create(
      box, {0.0, 0.0, 1.0, 0.0, -1.0, 0.0}, {0.0, 0.0, 0.0}, std::size_t{0});
  const RateModel model = RateModel::mean_field(1.0);
  const CellGrid grid(sym.coords(), sym.box(), 1.0);
  const JumpDistribution jd = jump_distribution(sym, 0, model, grid);
  REQUIRE(jd.neighbors.size() == 2);
  CHECK(jd.probabilities[0] == doctest::Approx(0.5).epsilon(1e-12));
  double total = 0.0;
  for (double p : jd.probabilities) total += p;
  CHECK(std::abs(total - 1.0) <= 1e-12);

  const auto pair_cfg = two_points(1.0, 0.2, -0.4);
  const CellGrid pg(pair_cfg.coords(), pair_cfg.box(), 1.0);
  const JumpDistribution single = jump_distribution(pair_cfg, 0, model, pg);
  REQUIRE(single.neighbors.size() == 1);
  CHECK(single.probabilities[0] == 1.0);

  // engine transition frequencies out of one site match the computed law
  const auto cfg4 = MarkedConfiguration::create(
      box, {0.0, 0.0, 1.0, 0.0, 0.0, 1.5, -2.0, 0.5},
      {0.1, -0.3, 0.6, -0.1}, std::size_t{0});
  const CellGrid g4(cfg4.coords(), cfg4.box(), 1.0);
  const JumpDistribution law = jump_distribution(cfg4, 0, model, g4);
  std::vector<std::uint64_t> hits(cfg4.size(), 0);
  std::uint64_t total_jumps = 0;
  RngStream rng(55, 0);
  SimulateOptions opts;
  opts.max_steps = 400000;
  const Trajectory traj = simulate(cfg4, model, 1e18, rng, opts);
  for (std::size_t e = 0; e + 1 < traj.events(); ++e) {
    if (traj.sites[e] != 0) continue;
    ++hits[traj.sites[e + 1]];
    ++total_jumps;
  }
  REQUIRE(total_jumps > 10000);
  for (std::size_t k = 0; k < law.neighbors.size(); ++k) {
    const double p = law.probabilities[k];
    const double freq = static_cast<double>(hits[law.neighbors[k]]) /
                        static_cast<double>(total_jumps);
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(total_jumps));
    REQUIRE(std::abs(freq - p) <= 3.5 * se);
  }
}

TEST_CASE("simulate: degenerate horizon, holding times, occupation fractions") {
  const auto cfg = two_points(1.0, 0.0, 0.0);
  const RateModel model = RateModel::mean_field(1.0);
  RngStream rng(56, 0);
  const Trajectory still = simulate(cfg, model, 0.0, rng);
  CHECK(still.events() == 1);
  CHECK(still.sites[0] == 0);

  // holding time at each site is Exp(e^-1): mean e
  RunningStat hold;
  std::array<double, 2> occupation{0.0, 0.0};
  RngStream rng2(57, 0);
  const Trajectory traj = simulate(cfg, model, 2e5, rng2);
  for (std::size_t e = 0; e + 1 < traj.events(); ++e) {
    hold.add(traj.times[e + 1] - traj.times[e]);
    occupation[traj.sites[e]] += traj.times[e + 1] - traj.times[e];
  }
  CHECK(std::abs(hold.mean() - std::exp(1.0)) <= 3.0 * hold.stderr_mean());
  const double frac = occupation[0] / (occupation[0] + occupation[1]);
  CHECK(std::abs(frac - 0.5) < 0.02);

  // trajectory invariants
  for (std::size_t e = 0; e + 1 < traj.events(); ++e) {
    REQUIRE(traj.times[e + 1] > traj.times[e]);
    REQUIRE(traj.sites[e + 1] != traj.sites[e]);
  }

  // stuck walker: isolated origin ends immediately with the flag
  const BoxGeometry box = BoxGeometry::cube(10.0, 2, Boundary::open);
  const auto lonely =
      MarkedConfiguration::create(box, {0.0, 0.0}, {0.0}, std::size_t{0});
  RngStream rng3(58, 0);
  const Trajectory stuck = simulate(lonely, model, 100.0, rng3);
  CHECK(stuck.stuck);
  CHECK(stuck.events() == 1);
}

TEST_CASE("simulate rejects periodic boxes smaller than twice the cutoff") {
  const BoxGeometry box = BoxGeometry::cube(10.0, 2, Boundary::periodic);
  const auto cfg = MarkedConfiguration::create(box, {0.0, 0.0, 1.0, 0.0},
                                               {0.0, 0.0}, std::size_t{0});
  const RateModel model = RateModel::mean_field(1.0, 40.0);
  RngStream rng(59, 0);
  CHECK_THROWS_AS(simulate(cfg, model, 1.0, rng), std::invalid_argument);
}

TEST_CASE("kmc engine matches the matrix-exponential oracle on small chains") {
  const BoxGeometry box = BoxGeometry::cube(12.0, 2, Boundary::open);
  const NuLaw nu{0.0, 1.0};
  for (int instance = 0; instance < 3; ++instance) {
    RngStream setup(60, static_cast<std::uint64_t>(instance));
    const std::size_t n_points = 3 + static_cast<std::size_t>(setup.uniform() * 4);
    std::vector<double> coords{0.0, 0.0};
    std::vector<double> energies{sample_energy(nu, setup)};
    for (std::size_t i = 1; i < n_points; ++i) {
      coords.push_back(snap_coordinate(setup.uniform(-4.0, 4.0)));
      coords.push_back(snap_coordinate(setup.uniform(-4.0, 4.0)));
      energies.push_back(sample_energy(nu, setup));
    }
    const auto cfg = MarkedConfiguration::create(box, coords, energies,
                                                 std::size_t{0});
    const RateModel model = RateModel::mean_field(1.0 + setup.uniform() * 2.0);

    // generator Q: off-diagonal rates, rows sum to zero
    std::vector<double> q(n_points * n_points, 0.0);
    for (std::size_t i = 0; i < n_points; ++i) {
      double lambda = 0.0;
      for (std::size_t j = 0; j < n_points; ++j) {
        if (i == j) continue;
        const double c = pair_rate(cfg, i, j, model);
        q[i * n_points + j] = c;
        lambda += c;
      }
      q[i * n_points + i] = -lambda;
    }
    const double t_probe = 2.0 / (-q[0] + 1e-9);  // a couple of mean holds
    std::vector<double> qt(q);
    for (auto& v : qt) v *= t_probe;
    const auto pt = testsupport::expm(qt, n_points);

    const std::size_t walks = 20000;
    std::vector<std::uint64_t> occupancy(n_points, 0);
    for (std::size_t w = 0; w < walks; ++w) {
      RngStream rng(61, w, static_cast<std::uint64_t>(instance));
      const Trajectory traj = simulate(cfg, model, t_probe, rng);
      ++occupancy[site_at(traj, t_probe)];
    }
    for (std::size_t j = 0; j < n_points; ++j) {
      const double p = pt[0 * n_points + j];
      const double freq =
          static_cast<double>(occupancy[j]) / static_cast<double>(walks);
      const double se =
          std::sqrt(std::max(p * (1.0 - p), 1e-12) / static_cast<double>(walks));
      REQUIRE(std::abs(freq - p) <= 3.5 * se + 1e-6);
    }
  }
}

TEST_CASE("msd: zeros, straight line, and the two-site plateau") {
  SUBCASE("all-zero trajectories give zero msd") {
    Trajectory t;
    t.dim = 2;
    t.times = {0.0};
    t.sites = {0};
    t.displacement = {0.0, 0.0};
    const MsdTable table = msd(std::vector<Trajectory>{t, t},
                               {0.5, 1.0, 1.5, 2.0});
    for (double v : table.msd) CHECK(v == 0.0);
  }
  SUBCASE("deterministic straight line x(t) = t e_1 gives msd t^2") {
    Trajectory t;
    t.dim = 2;
    const int steps = 1000;
    for (int k = 0; k <= steps; ++k) {
      t.times.push_back(0.01 * k);
      t.sites.push_back(k % 2);
      t.displacement.push_back(0.01 * k);
      t.displacement.push_back(0.0);
    }
    const std::vector<double> sample{2.0, 4.0, 6.0, 8.0, 10.0};
    const MsdTable table = msd(std::vector<Trajectory>{t}, sample);
    for (std::size_t k = 0; k < sample.size(); ++k) {
      CHECK(table.value(k, 0) ==
            doctest::Approx(sample[k] * sample[k]).epsilon(0.01));
      CHECK(table.value(k, 1) == 0.0);
    }
  }
  SUBCASE("two-site hopper msd matches the two-state chain") {
    const auto cfg = two_points(1.0, 0.0, 0.0);
    const RateModel model = RateModel::mean_field(1.0);
    const double c = std::exp(-1.0);
    const std::vector<double> sample{0.5, 1.0, 2.0, 4.0, 8.0};
    MsdAccumulator acc(sample, 2);
    for (std::size_t w = 0; w < 40000; ++w) {
      RngStream rng(62, w);
      acc.add(simulate(cfg, model, 8.0, rng));
    }
    const MsdTable table = acc.table();
    for (std::size_t k = 0; k < sample.size(); ++k) {
      // E X_t^2 = P(at the far site) = (1 - e^{-2 c t}) / 2
      const double expected = 0.5 * (1.0 - std::exp(-2.0 * c * sample[k]));
      REQUIRE(std::abs(table.value(k, 0) - expected) <=
              3.0 * table.error(k, 0) + 1e-9);
    }
  }
}

TEST_CASE("trajectory displacement equals the sum of minimum-image jumps") {
  const BoxGeometry box = BoxGeometry::cube(30.0, 2);
  const NuLaw nu{0.0, 1.0};
  RngStream rng(64, 0);
  const auto cfg = palm_poisson(1.0, box, nu, rng);
  const RateModel model = RateModel::mean_field(2.0, 12.0);
  RngStream walk_rng(65, 0);
  const Trajectory traj = simulate(cfg, model, 200.0, walk_rng);
  REQUIRE(traj.events() > 10);
  std::vector<double> pos(2, 0.0), jump(2);
  for (std::size_t e = 1; e < traj.events(); ++e) {
    displacement(cfg.point(traj.sites[e]), cfg.point(traj.sites[e - 1]),
                 cfg.box(), jump);
    pos[0] += jump[0];
    pos[1] += jump[1];
    REQUIRE(traj.displacement[e * 2] == pos[0]);      // exact on the grid
    REQUIRE(traj.displacement[e * 2 + 1] == pos[1]);
  }
}

TEST_CASE("trajectory and msd tables export round-trip formats") {
  const BoxGeometry box = BoxGeometry::cube(10.0, 2, Boundary::open);
  const auto cfg = MarkedConfiguration::create(
      box, {0.0, 0.0, 1.0, 0.0}, {0.0, 0.0}, std::size_t{0});
  const RateModel model = RateModel::mean_field(1.0);
  RngStream rng(66, 0);
  const Trajectory traj = simulate(cfg, model, 20.0, rng);
  export_trajectory(traj, "test_out/trajectory.txt");
  const std::string text = read_text_file("test_out/trajectory.txt");
  CHECK(text.rfind("t site x_1 x_2", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') ==
        static_cast<long>(traj.events()) + 1);

  MsdAccumulator acc({5.0, 10.0, 20.0}, 2);
  acc.add(traj);
  export_msd(acc.table(), "test_out/msd.csv", 7);
  const std::string csv = read_text_file("test_out/msd.csv");
  CHECK(csv.find("t,axis,msd,stderr,n") != std::string::npos);
  std::filesystem::remove_all("test_out");
}

TEST_CASE("estimated diffusion matrix obeys the trace bound") {
  // sampled unit vectors a: a.D a <= Tr(D) |a|^2 within statistical error
  const BoxGeometry box = BoxGeometry::cube(36.0, 2);
  const NuLaw nu{0.0, 1.0};
  const RateModel model = RateModel::mean_field(4.0, 15.0);
  const std::vector<double> times = default_sample_times(400.0);
  const std::size_t n = 250;
  // accumulate per-axis slopes and projected slopes for three directions
  const std::vector<std::vector<double>> dirs{
      {1.0, 0.0}, {0.0, 1.0}, {M_SQRT1_2, M_SQRT1_2}, {0.8, -0.6}};
  std::vector<RunningStat> slope(dirs.size());
  // least-squares weights over the trailing half of the window
  std::vector<double> coeff;
  {
    const std::size_t start = times.size() / 2;
    double tbar = 0.0;
    for (std::size_t k = start; k < times.size(); ++k) tbar += times[k];
    tbar /= static_cast<double>(times.size() - start);
    double sxx = 0.0;
    for (std::size_t k = start; k < times.size(); ++k)
      sxx += (times[k] - tbar) * (times[k] - tbar);
    coeff.assign(times.size(), 0.0);
    for (std::size_t k = start; k < times.size(); ++k)
      coeff[k] = (times[k] - tbar) / sxx;
  }
  for (std::size_t r = 0; r < n; ++r) {
    RngStream rng(67, r);
    const auto cfg = palm_poisson(1.0, box, nu, rng);
    const CellGrid grid(cfg.coords(), cfg.box(), rate_grid_cell(cfg.box()));
    const SampledWalk walk = simulate_sampled(cfg, model, grid, times, rng);
    if (walk.truncated) continue;
    for (std::size_t a = 0; a < dirs.size(); ++a) {
      double s = 0.0;
      for (std::size_t k = 0; k < times.size(); ++k) {
        const double proj = dirs[a][0] * walk.positions[k * 2] +
                            dirs[a][1] * walk.positions[k * 2 + 1];
        s += coeff[k] * proj * proj;
      }
      slope[a].add(s);
    }
  }
  const double trace = slope[0].mean() + slope[1].mean();
  const double trace_err =
      std::sqrt(slope[0].stderr_mean() * slope[0].stderr_mean() +
                slope[1].stderr_mean() * slope[1].stderr_mean());
  for (std::size_t a = 2; a < dirs.size(); ++a) {
    const double norm2 =
        dirs[a][0] * dirs[a][0] + dirs[a][1] * dirs[a][1];
    CHECK(slope[a].mean() <=
          trace * norm2 + 3.0 * (slope[a].stderr_mean() + trace_err));
  }
}

TEST_CASE("diffusion estimate recovers the slope of a synthetic walk") {
  // fake trajectories performing unit jumps at unit times along axis 1 with
  // random signs: msd grows like t
  std::vector<double> sample = default_sample_times(64.0);
  MsdAccumulator acc(sample, 2);
  for (std::size_t w = 0; w < 3000; ++w) {
    RngStream rng(63, w);
    Trajectory t;
    t.dim = 2;
    double x = 0.0;
    t.times = {0.0};
    t.sites = {0};
    t.displacement = {0.0, 0.0};
    for (int k = 1; k <= 64; ++k) {
      x += rng.bernoulli(0.5) ? 1.0 : -1.0;
      t.times.push_back(static_cast<double>(k));
      t.sites.push_back(static_cast<std::uint32_t>(k % 2));
      t.displacement.push_back(x);
      t.displacement.push_back(0.0);
    }
    acc.add(t);
  }
  const DiffusionEstimate est = acc.diffusion();
  CHECK(std::abs(est.d_axis[0] - 1.0) <= 3.0 * est.stderr_axis[0] + 0.02);
  CHECK(std::abs(est.d_axis[1]) <= 1e-12);
}
