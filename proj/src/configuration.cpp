// SPDX-License-Identifier: Apache-2.0
#include "mottsim/configuration.hpp"

#include <cmath>
#include <cstring>
#include <unordered_set>

namespace mott {

double NuLaw::interval_mass(double e) const {
  if (e <= 0.0) return 0.0;
  if (e >= 1.0) return 1.0;
  return std::pow(e, alpha + 1.0);
}

double NuLaw::interval_mass_inverse(double mass) const {
  if (mass <= 0.0) return 0.0;
  if (mass >= 1.0) return 1.0;
  return std::pow(mass, 1.0 / (alpha + 1.0));
}

namespace {

// exact-duplicate detection via the coordinate bit patterns
struct PointHash {
  std::size_t operator()(const std::vector<std::uint64_t>& v) const {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (auto w : v) {
      h ^= w;
      h *= 0x100000001b3ULL;
    }
    return h;
  }
};

std::uint64_t bits_of(double x) {
  if (x == 0.0) x = 0.0;  // normalize -0.0
  std::uint64_t u;
  std::memcpy(&u, &x, sizeof u);
  return u;
}

}  // namespace

MarkedConfiguration MarkedConfiguration::create(
    BoxGeometry box, std::vector<double> coords, std::vector<double> energies,
    std::optional<std::size_t> origin) {
  box.validate();
  const std::size_t d = box.sides.size();
  if (coords.size() != energies.size() * d)
    throw std::invalid_argument(
        "MarkedConfiguration: coords/energies size mismatch");
  const std::size_t n = energies.size();
  for (double e : energies)
    if (!(e >= -1.0 && e <= 1.0))
      throw std::invalid_argument("MarkedConfiguration: mark outside [-1,1]");
  for (std::size_t i = 0; i < n; ++i) {
    if (!box.contains({coords.data() + i * d, d}))
      throw std::invalid_argument("MarkedConfiguration: point outside the box");
  }
  {
    std::unordered_set<std::vector<std::uint64_t>, PointHash> seen;
    seen.reserve(n * 2);
    std::vector<std::uint64_t> key(d);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < d; ++k) key[k] = bits_of(coords[i * d + k]);
      if (!seen.insert(key).second)
        throw std::invalid_argument("MarkedConfiguration: duplicate coordinates");
    }
  }
  if (origin) {
    if (*origin >= n)
      throw std::invalid_argument("MarkedConfiguration: origin index out of range");
    for (std::size_t k = 0; k < d; ++k)
      if (coords[*origin * d + k] != 0.0)
        throw std::invalid_argument(
            "MarkedConfiguration: origin point must sit exactly at zero");
  }
  MarkedConfiguration cfg;
  cfg.box_ = std::move(box);
  cfg.coords_ = std::move(coords);
  cfg.energies_ = std::move(energies);
  cfg.origin_ = origin;
  return cfg;
}

MarkedConfiguration MarkedConfiguration::with_energies(
    std::vector<double> energies) const {
  if (energies.size() != energies_.size())
    throw std::invalid_argument("with_energies: size mismatch");
  MarkedConfiguration cfg(*this);
  for (double e : energies)
    if (!(e >= -1.0 && e <= 1.0))
      throw std::invalid_argument("with_energies: mark outside [-1,1]");
  cfg.energies_ = std::move(energies);
  return cfg;
}

MarkedConfiguration translate(const MarkedConfiguration& cfg,
                              std::size_t x_index) {
  if (x_index >= cfg.size())
    throw std::invalid_argument("translate: not a point of the configuration");
  if (!cfg.box().periodic())
    throw std::invalid_argument("translate: requires a periodic box");
  const std::size_t d = cfg.box().sides.size();
  std::vector<double> coords(cfg.coords());
  const std::vector<double> x(cfg.point(x_index).begin(),
                              cfg.point(x_index).end());
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k) coords[i * d + k] -= x[k];
    wrap_into_box({coords.data() + i * d, d}, cfg.box());
  }
  // the distinguished point lands exactly at zero
  for (std::size_t k = 0; k < d; ++k) coords[x_index * d + k] = 0.0;
  return MarkedConfiguration::create(cfg.box(), std::move(coords),
                                     cfg.energies(), x_index);
}

CrystalSpec CrystalSpec::cubic(double spacing, int dim, double dilution_p) {
  CrystalSpec spec;
  const std::size_t d = static_cast<std::size_t>(dim);
  spec.basis.assign(d * d, 0.0);
  for (std::size_t k = 0; k < d; ++k) spec.basis[k * d + k] = spacing;
  spec.cell_points.assign(d, 0.0);
  spec.dilution_p = dilution_p;
  spec.validate();
  return spec;
}

int CrystalSpec::dim() const {
  std::size_t d = 1;
  while (d * d < basis.size()) ++d;
  return static_cast<int>(d);
}

std::size_t CrystalSpec::cell_point_count() const {
  const std::size_t d = static_cast<std::size_t>(dim());
  return d == 0 ? 0 : cell_points.size() / d;
}

namespace {

// determinant by Gaussian elimination with partial pivoting; d is tiny
double det_small(std::vector<double> m, std::size_t d) {
  double det = 1.0;
  for (std::size_t c = 0; c < d; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < d; ++r)
      if (std::abs(m[c * d + r]) > std::abs(m[c * d + piv])) piv = r;
    if (m[c * d + piv] == 0.0) return 0.0;
    if (piv != c) {
      for (std::size_t cc = 0; cc < d; ++cc)
        std::swap(m[cc * d + piv], m[cc * d + c]);
      det = -det;
    }
    det *= m[c * d + c];
    for (std::size_t r = c + 1; r < d; ++r) {
      const double f = m[c * d + r] / m[c * d + c];
      for (std::size_t cc = c; cc < d; ++cc) m[cc * d + r] -= f * m[cc * d + c];
    }
  }
  return det;
}

}  // namespace

double CrystalSpec::cell_volume() const {
  const std::size_t d = static_cast<std::size_t>(dim());
  return std::abs(det_small(basis, d));
}

void CrystalSpec::validate() const {
  const std::size_t d = static_cast<std::size_t>(dim());
  if (d < 2 || basis.size() != d * d)
    throw std::invalid_argument("CrystalSpec: basis must be d x d with d >= 2");
  if (!(dilution_p > 0.0 && dilution_p <= 1.0))
    throw std::invalid_argument("CrystalSpec: dilution_p must be in (0,1]");
  if (cell_points.empty() || cell_points.size() % d != 0)
    throw std::invalid_argument("CrystalSpec: cell_points must be d-strided");
  const double scale = [&] {
    double s = 0.0;
    for (double b : basis) s = std::max(s, std::abs(b));
    return s;
  }();
  if (std::abs(det_small(basis, d)) < 1e-12 * std::pow(scale, double(d)))
    throw std::invalid_argument("CrystalSpec: degenerate basis");
  // offsets pairwise distinct
  const std::size_t m = cell_point_count();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      bool same = true;
      for (std::size_t k = 0; k < d; ++k)
        if (cell_points[i * d + k] != cell_points[j * d + k]) same = false;
      if (same)
        throw std::invalid_argument("CrystalSpec: duplicate cell offsets");
    }
}

std::uint64_t CountField::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::uint32_t CountField::at(std::span<const int> z) const {
  std::size_t idx = 0;
  for (std::size_t k = 0; k < cells_per_axis.size(); ++k) {
    const int m = cells_per_axis[k];
    const int h = (m - 1) / 2;
    if (z[k] < -h || z[k] > h)
      throw std::invalid_argument("CountField: lattice site outside window");
    idx = idx * static_cast<std::size_t>(m) + static_cast<std::size_t>(z[k] + h);
  }
  return counts[idx];
}

bool CountField::same_window(const CountField& other) const {
  return cell_size == other.cell_size && cells_per_axis == other.cells_per_axis;
}

CountField count_field(std::span<const double> coords, const BoxGeometry& box,
                       double cell_size) {
  if (!(cell_size > 0.0))
    throw std::invalid_argument("count_field: cell size must be positive");
  const std::size_t d = box.sides.size();
  CountField field;
  field.cell_size = cell_size;
  field.cells_per_axis.resize(d);
  std::size_t ncells = 1;
  for (std::size_t k = 0; k < d; ++k) {
    // round the window to a multiple of K, then keep it odd so the lattice
    // K Z^d has its origin cell inside the window
    int m = std::max(1, static_cast<int>(std::llround(box.sides[k] / cell_size)));
    if (m % 2 == 0) --m;
    field.cells_per_axis[k] = std::max(1, m);
    ncells *= static_cast<std::size_t>(field.cells_per_axis[k]);
  }
  field.counts.assign(ncells, 0);
  const std::size_t n = d == 0 ? 0 : coords.size() / d;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t idx = 0;
    bool inside = true;
    for (std::size_t k = 0; k < d; ++k) {
      const int m = field.cells_per_axis[k];
      const int h = (m - 1) / 2;
      // cell of x: Lambda_K(K z) = K z + [-K/2, K/2)
      const double z = std::floor(coords[i * d + k] / cell_size + 0.5);
      if (z < -static_cast<double>(h) || z > static_cast<double>(h)) {
        inside = false;
        break;
      }
      idx = idx * static_cast<std::size_t>(m) +
            static_cast<std::size_t>(static_cast<int>(z) + h);
    }
    if (inside) ++field.counts[idx];
  }
  return field;
}

CountField count_field(const MarkedConfiguration& cfg, double cell_size) {
  return count_field(cfg.coords(), cfg.box(), cell_size);
}

}  // namespace mott
