// SPDX-License-Identifier: Apache-2.0
#include "mottsim/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>

#include "mottsim/parallel.hpp"
#include "mottsim/stats.hpp"

namespace mott {

ClusterStructure boolean_clusters(std::span<const double> coords,
                                  const BoxGeometry& box, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("boolean_clusters: r must be > 0");
  const std::size_t d = box.sides.size();
  const std::size_t n = d == 0 ? 0 : coords.size() / d;
  UnionFind uf(n);
  if (n > 0) {
    // candidate pairs from a grid sized to the adjacency radius
    const double adjacency = 2.0 * r;
    const CellGrid grid(coords, box,
                        std::min(adjacency, box.min_side() / 2.0));
    for (std::size_t i = 0; i < n; ++i) {
      grid.for_each_within(
          coords.subspan(i * d, d), adjacency,
          [&](std::uint32_t j, double) {
            if (j > i) uf.unite(static_cast<std::uint32_t>(i), j);
          },
          static_cast<std::uint32_t>(i));
    }
  }
  ClusterStructure cs;
  cs.root.resize(n);
  cs.size.assign(n, 0);
  cs.extent_min.assign(n * d, 0.0);
  cs.extent_max.assign(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t rt = uf.find(static_cast<std::uint32_t>(i));
    cs.root[i] = rt;
    if (cs.size[rt] == 0) {
      for (std::size_t k = 0; k < d; ++k) {
        cs.extent_min[rt * d + k] = coords[i * d + k];
        cs.extent_max[rt * d + k] = coords[i * d + k];
      }
      ++cs.cluster_count;
    } else {
      for (std::size_t k = 0; k < d; ++k) {
        cs.extent_min[rt * d + k] =
            std::min(cs.extent_min[rt * d + k], coords[i * d + k]);
        cs.extent_max[rt * d + k] =
            std::max(cs.extent_max[rt * d + k], coords[i * d + k]);
      }
    }
    ++cs.size[rt];
  }
  return cs;
}

Region Region::ball(std::vector<double> center, double radius) {
  Region a;
  a.kind = Kind::ball;
  a.center = std::move(center);
  a.radius = radius;
  return a;
}

Region Region::box(std::vector<double> lo, std::vector<double> hi) {
  Region a;
  a.kind = Kind::box;
  a.lo = std::move(lo);
  a.hi = std::move(hi);
  return a;
}

double Region::distance_to(std::span<const double> x,
                           const BoxGeometry& box) const {
  if (kind == Kind::ball) {
    double s = 0.0;
    for (std::size_t k = 0; k < center.size(); ++k) {
      const double dd =
          delta_component(x[k], center[k], box.sides[k], box.periodic());
      s += dd * dd;
    }
    return std::max(0.0, std::sqrt(s) - radius);
  }
  const auto axis_gap = [](double v, double a, double b) {
    if (v < a) return a - v;
    if (v > b) return v - b;
    return 0.0;
  };
  double s = 0.0;
  for (std::size_t k = 0; k < lo.size(); ++k) {
    double best = axis_gap(x[k], lo[k], hi[k]);
    if (box.periodic())
      best = std::min({best, axis_gap(x[k] - box.sides[k], lo[k], hi[k]),
                       axis_gap(x[k] + box.sides[k], lo[k], hi[k])});
    s += best * best;
  }
  return std::sqrt(s);
}

std::vector<std::uint32_t> w_r(std::span<const double> coords,
                               const BoxGeometry& box, double r,
                               const Region& region) {
  const std::size_t d = box.sides.size();
  const std::size_t n = d == 0 ? 0 : coords.size() / d;
  const ClusterStructure cs = boolean_clusters(coords, box, r);
  std::vector<char> root_hit(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (region.distance_to(coords.subspan(i * d, d), box) <= r)
      root_hit[cs.root[i]] = 1;
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (root_hit[cs.root[i]]) out.push_back(static_cast<std::uint32_t>(i));
  return out;
}

namespace {

// BFS growth of the occupied cluster touching B_r(0), with early exit the
// moment the boundary is reached; much cheaper than full union-find when the
// configuration is subcritical.
bool crossing_replica(double rho, double r, const BoxGeometry& box,
                      RngStream& rng) {
  const std::size_t d = box.sides.size();
  const std::vector<double> coords = sample_poisson(rho, box, rng);
  const std::size_t n = coords.size() / d;
  if (n == 0) return false;
  const double adjacency = 2.0 * r;
  const CellGrid grid({coords.data(), coords.size()}, box,
                      std::min(adjacency, box.min_side() / 2.0));
  const auto near_boundary = [&](std::size_t i) {
    for (std::size_t k = 0; k < d; ++k) {
      const double margin = box.sides[k] / 2.0 - std::abs(coords[i * d + k]);
      if (margin <= r) return true;
    }
    return false;
  };
  std::vector<char> seen(n, 0);
  std::deque<std::uint32_t> frontier;
  // seeds: balls intersecting B_r(0) <=> |x| <= 2r
  std::vector<double> zero(d, 0.0);
  grid.for_each_within({zero.data(), d}, adjacency, [&](std::uint32_t j, double) {
    if (!seen[j]) {
      seen[j] = 1;
      frontier.push_back(j);
    }
  });
  while (!frontier.empty()) {
    const std::uint32_t i = frontier.front();
    frontier.pop_front();
    if (near_boundary(i)) return true;
    grid.for_each_within(
        {coords.data() + i * d, d}, adjacency,
        [&](std::uint32_t j, double) {
          if (!seen[j]) {
            seen[j] = 1;
            frontier.push_back(j);
          }
        },
        i);
  }
  return false;
}

}  // namespace

CrossingEstimate crossing_probability(double rho, double r, double box_side,
                                      int dim, std::size_t n,
                                      std::uint64_t seed, int workers) {
  if (!(r >= 0.0)) throw std::invalid_argument("crossing_probability: bad r");
  if (n == 0) throw std::invalid_argument("crossing_probability: need replicas");
  const BoxGeometry box = BoxGeometry::cube(box_side, dim, Boundary::open);
  std::vector<char> hits(n, 0);
  parallel_for_replicas(n, workers, [&](std::size_t i) {
    RngStream rng(seed, i, /*salt=*/0x9c6f);
    if (r > 0.0 && crossing_replica(rho, r, box, rng)) hits[i] = 1;
  });
  CrossingEstimate est;
  est.replicas = n;
  for (char h : hits) est.crossings += h;
  est.probability = static_cast<double>(est.crossings) / static_cast<double>(n);
  est.stderr_probability = std::sqrt(
      std::max(0.0, est.probability * (1.0 - est.probability)) /
      static_cast<double>(n));
  return est;
}

namespace {

RcLadderPoint bisect_rc(double rho, int dim, double box_side, std::size_t n,
                        double tol, std::uint64_t seed, int workers,
                        bool* ok) {
  const double scale = std::pow(rho, -1.0 / static_cast<double>(dim));
  double lo = 0.2 * scale, hi = 1.2 * scale;
  std::uint64_t eval = 0;
  const auto prob = [&](double r) {
    return crossing_probability(rho, r, box_side, dim, n, seed + (++eval), workers)
        .probability;
  };
  double p_lo = prob(lo), p_hi = prob(hi);
  for (int guard = 0; guard < 12 && p_lo >= 0.5; ++guard) {
    lo *= 0.6;
    p_lo = prob(lo);
  }
  for (int guard = 0; guard < 12 && p_hi <= 0.5; ++guard) {
    hi *= 1.5;
    p_hi = prob(hi);
  }
  *ok = p_lo < 0.5 && p_hi > 0.5;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (prob(mid) < 0.5) lo = mid;
    else hi = mid;
  }
  RcLadderPoint pt;
  pt.box_side = box_side;
  pt.bracket_lo = lo;
  pt.bracket_hi = hi;
  pt.r_c = 0.5 * (lo + hi);
  return pt;
}

}  // namespace

RcEstimate estimate_rc(double rho, int dim, std::span<const double> box_ladder,
                       std::size_t n, double tol, std::uint64_t seed,
                       int workers) {
  if (box_ladder.empty())
    throw std::invalid_argument("estimate_rc: empty box ladder");
  if (!std::is_sorted(box_ladder.begin(), box_ladder.end()))
    throw std::invalid_argument("estimate_rc: ladder must be increasing");
  RcEstimate est;
  for (std::size_t li = 0; li < box_ladder.size(); ++li) {
    const bool largest = li + 1 == box_ladder.size();
    bool ok = false;
    RcLadderPoint pt = bisect_rc(rho, dim, box_ladder[li], n, tol,
                                 seed + 1000 * li, workers, &ok);
    if (largest && !ok) {
      // noisy bracket: widen the replica budget once and retry
      est.widened = true;
      pt = bisect_rc(rho, dim, box_ladder[li], 2 * n, tol, seed + 7777 + 1000 * li,
                     workers, &ok);
    }
    est.ladder.push_back(pt);
    if (largest) {
      est.r_c = pt.r_c;
      est.bracket_lo = pt.bracket_lo;
      est.bracket_hi = pt.bracket_hi;
    }
  }
  return est;
}

void MottGraphParams::validate() const {
  if (!(energy_cap > 0.0 && energy_cap <= 1.0))
    throw std::invalid_argument("MottGraphParams: energy_cap must be in (0,1]");
  if (!(range > 0.0))
    throw std::invalid_argument("MottGraphParams: range must be > 0");
}

double mott_exponent(double alpha, int dim) {
  return (alpha + 1.0) / (alpha + 1.0 + static_cast<double>(dim));
}

double energy_threshold(double beta, double alpha, int dim) {
  if (!(beta > 0.0)) throw std::invalid_argument("energy_threshold: beta > 0");
  const double e =
      std::pow(beta, -static_cast<double>(dim) / (alpha + 1.0 + dim));
  return std::min(e, 1.0);
}

double thinned_intensity(double beta, double alpha, int dim, double rho,
                         const NuLaw& nu) {
  return rho * nu.interval_mass(energy_threshold(beta, alpha, dim));
}

MottGraphParams mott_params_poisson(double beta, double alpha, int dim,
                                    double rho, const NuLaw& nu, double rc1,
                                    double gamma) {
  if (!(gamma > 0.0 && gamma < 2.0))
    throw std::invalid_argument("mott_params_poisson: gamma must be in (0,2)");
  MottGraphParams p;
  p.energy_cap = energy_threshold(beta, alpha, dim);
  const double rho_beta = thinned_intensity(beta, alpha, dim, rho, nu);
  p.range = gamma * std::pow(rho_beta, -1.0 / static_cast<double>(dim)) * rc1;
  p.validate();
  return p;
}

MottGraphParams mott_params_general(double beta, double alpha, int dim,
                                    double lambda) {
  MottGraphParams p;
  p.energy_cap = energy_threshold(beta, alpha, dim);
  p.range = lambda * std::pow(beta, mott_exponent(alpha, dim));
  p.validate();
  return p;
}

double lambda_ceiling(double p, double rho_prime, int dim, double rc1) {
  if (!(p > 0.0 && p <= 1.0) || !(rho_prime > 0.0))
    throw std::invalid_argument("lambda_ceiling: bad arguments");
  const double c = std::pow(p / rho_prime, 1.0 / static_cast<double>(dim));
  return 3.0 * c * rc1 / (4.0 * std::sqrt(static_cast<double>(dim)));
}

std::vector<std::uint32_t> graph_cluster_of(const MarkedConfiguration& cfg,
                                            const CellGrid& grid,
                                            const MottGraphParams& params,
                                            std::uint32_t start) {
  const std::size_t d = cfg.box().sides.size();
  if (std::abs(cfg.energy(start)) > params.energy_cap) return {};
  std::vector<std::uint32_t> cluster;
  std::vector<char> seen(cfg.size(), 0);
  std::deque<std::uint32_t> frontier;
  bool start_has_edge = false;
  grid.for_each_within(
      cfg.point(start), params.range,
      [&](std::uint32_t j, double) {
        if (std::abs(cfg.energy(j)) <= params.energy_cap) {
          start_has_edge = true;
          if (!seen[j]) {
            seen[j] = 1;
            frontier.push_back(j);
          }
        }
      },
      start);
  // a vertex must carry at least one edge; otherwise C = empty
  if (!start_has_edge) return {};
  seen[start] = 1;
  cluster.push_back(start);
  while (!frontier.empty()) {
    const std::uint32_t i = frontier.front();
    frontier.pop_front();
    cluster.push_back(i);
    grid.for_each_within(
        {cfg.coords().data() + i * d, d}, params.range,
        [&](std::uint32_t j, double) {
          if (!seen[j] && std::abs(cfg.energy(j)) <= params.energy_cap) {
            seen[j] = 1;
            frontier.push_back(j);
          }
        },
        i);
  }
  std::sort(cluster.begin(), cluster.end());
  return cluster;
}

std::vector<std::uint32_t> mott_graph_cluster(const MarkedConfiguration& cfg,
                                              const MottGraphParams& params) {
  params.validate();
  if (!cfg.has_origin())
    throw std::invalid_argument("mott_graph_cluster: needs a Palm configuration");
  const CellGrid grid(cfg.coords(), cfg.box(),
                      std::min(params.range, cfg.box().min_side() / 2.0));
  return graph_cluster_of(cfg, grid, params,
                          static_cast<std::uint32_t>(*cfg.origin_index()));
}

MomentEstimate cluster_moment(const PalmSource& source,
                              const MottGraphParams& params, double s,
                              std::size_t n, std::uint64_t seed,
                              std::uint64_t salt, int workers) {
  if (!(s > 0.0)) throw std::invalid_argument("cluster_moment: s must be > 0");
  if (n == 0) throw std::invalid_argument("cluster_moment: need replicas");
  std::vector<double> values(n, 0.0);
  parallel_for_replicas(n, workers, [&](std::size_t r) {
    RngStream rng(seed, r, salt);
    const MarkedConfiguration cfg = source(rng);
    const auto cluster = mott_graph_cluster(cfg, params);
    values[r] = std::pow(static_cast<double>(cluster.size()), s);
  });
  RunningStat stat;
  for (double v : values) stat.add(v);
  MomentEstimate est;
  est.value = stat.mean();
  est.stderr_value = stat.stderr_mean();
  est.replicas = n;
  return est;
}

namespace {

// odd cell lattice shared with count_field: lattice site z has center K z
struct CellLattice {
  double cell;
  std::vector<int> per_axis;  // odd
  std::vector<long> strides;

  explicit CellLattice(const BoxGeometry& box, double cell_size) : cell(cell_size) {
    const std::size_t d = box.sides.size();
    per_axis.resize(d);
    strides.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
      int m = std::max(1, static_cast<int>(std::llround(box.sides[k] / cell_size)));
      if (m % 2 == 0) --m;
      per_axis[k] = std::max(1, m);
    }
    long s = 1;
    for (std::size_t k = d; k-- > 0;) {
      strides[k] = s;
      s *= per_axis[k];
    }
  }

  // lattice coordinates of the cell containing x, or false if outside
  bool locate(std::span<const double> x, std::vector<int>& z) const {
    for (std::size_t k = 0; k < per_axis.size(); ++k) {
      const int h = (per_axis[k] - 1) / 2;
      const double zz = std::floor(x[k] / cell + 0.5);
      if (zz < -h || zz > h) return false;
      z[k] = static_cast<int>(zz);
    }
    return true;
  }

  long index(std::span<const int> z) const {
    long idx = 0;
    for (std::size_t k = 0; k < per_axis.size(); ++k)
      idx += (z[k] + (per_axis[k] - 1) / 2) * strides[k];
    return idx;
  }
};

}  // namespace

std::vector<std::uint32_t> coarse_graph_cluster(const MarkedConfiguration& cfg,
                                                double cell_size,
                                                const MottGraphParams& params) {
  params.validate();
  if (!(cell_size > 0.0))
    throw std::invalid_argument("coarse_graph_cluster: cell size must be > 0");
  const std::size_t d = cfg.box().sides.size();
  const CellLattice lattice(cfg.box(), cell_size);
  // occupied cells: those holding at least one small-mark point
  std::unordered_map<long, std::vector<std::uint32_t>> occupied;
  std::vector<int> z(d);
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    if (std::abs(cfg.energy(i)) > params.energy_cap) continue;
    if (!lattice.locate(cfg.point(i), z)) continue;
    occupied[lattice.index(z)].push_back(static_cast<std::uint32_t>(i));
  }
  std::vector<int> zero(d, 0);
  const long origin_cell = lattice.index(zero);
  if (!occupied.count(origin_cell)) return {};
  // lattice adjacency: centers within range + d sqrt(K)
  const double reach =
      params.range + static_cast<double>(d) * std::sqrt(cell_size);
  const int m = static_cast<int>(std::ceil(reach / cell_size));
  const double reach2 = reach * reach;

  std::vector<std::uint32_t> points;
  std::unordered_map<long, char> seen;
  std::deque<std::vector<int>> frontier;
  frontier.push_back(zero);
  seen[origin_cell] = 1;
  std::vector<int> nb(d);
  while (!frontier.empty()) {
    const std::vector<int> cur = frontier.front();
    frontier.pop_front();
    const auto& members = occupied[lattice.index(cur)];
    points.insert(points.end(), members.begin(), members.end());
    // scan the offset block around cur
    std::vector<int> off(d, -m);
    while (true) {
      double dist2 = 0.0;
      for (std::size_t k = 0; k < d; ++k)
        dist2 += (off[k] * cell_size) * (off[k] * cell_size);
      bool nonzero = false;
      for (std::size_t k = 0; k < d; ++k) nonzero = nonzero || off[k] != 0;
      if (nonzero && dist2 <= reach2) {
        bool in_window = true;
        for (std::size_t k = 0; k < d; ++k) {
          nb[k] = cur[k] + off[k];
          const int h = (lattice.per_axis[k] - 1) / 2;
          if (nb[k] < -h || nb[k] > h) in_window = false;
        }
        if (in_window) {
          const long idx = lattice.index(nb);
          if (occupied.count(idx) && !seen[idx]) {
            seen[idx] = 1;
            frontier.push_back(nb);
          }
        }
      }
      std::size_t k = 0;
      while (k < d) {
        if (++off[k] <= m) break;
        off[k] = -m;
        ++k;
      }
      if (k == d) break;
    }
  }
  std::sort(points.begin(), points.end());
  return points;
}

bool check_coarse_containment(const MarkedConfiguration& cfg, double cell_size,
                              const MottGraphParams& params) {
  const std::size_t d = cfg.box().sides.size();
  const auto coarse = coarse_graph_cluster(cfg, cell_size, params);
  const CellGrid grid(cfg.coords(), cfg.box(),
                      std::min(params.range, cfg.box().min_side() / 2.0));
  const CellLattice lattice(cfg.box(), cell_size);
  std::vector<int> z(d);
  std::vector<int> zero(d, 0);
  for (std::size_t x = 0; x < cfg.size(); ++x) {
    if (!lattice.locate(cfg.point(x), z) || z != zero) continue;
    const auto cluster =
        graph_cluster_of(cfg, grid, params, static_cast<std::uint32_t>(x));
    for (std::uint32_t member : cluster) {
      // allowed: inside the origin cell, or in the coarse cluster
      std::vector<int> zm(d);
      const bool in_window = lattice.locate(cfg.point(member), zm);
      const bool in_origin_cell = in_window && zm == zero;
      const bool in_coarse =
          std::binary_search(coarse.begin(), coarse.end(), member);
      if (!in_origin_cell && !in_coarse) return false;
    }
  }
  return true;
}

}  // namespace mott
