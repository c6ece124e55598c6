// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mottsim/geometry.hpp"

namespace mott {

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Energy-mark law: density ((alpha+1)/2) |E|^alpha on [-1,1], so that
/// nu([-E,E]) = E^(alpha+1).  This saturates the admissible upper bound,
/// which keeps both the upper and the lower Mott estimates sharp for the
/// same exponent.  c0 is kept purely as a validation constant.
struct NuLaw {
  double alpha = 0.0;
  double c0 = 1.0;

  void validate() const {
    if (!(alpha > -1.0)) throw std::invalid_argument("NuLaw: alpha must be > -1");
    if (!(c0 >= 1.0)) throw std::invalid_argument("NuLaw: c0 must be >= 1");
  }

  /// nu([-e, e]) for e in [0, 1]
  double interval_mass(double e) const;
  /// inverse of interval_mass: the cap e with nu([-e,e]) = mass
  double interval_mass_inverse(double mass) const;
};

/// One finite-window realization: point coordinates (flat, d-strided), one
/// energy mark per point, and an optional distinguished origin point (Palm
/// configurations).
class MarkedConfiguration {
 public:
  MarkedConfiguration() = default;

  /// Validating constructor: sizes match, points inside the box, marks in
  /// [-1,1], no duplicate coordinates, origin (when given) exactly at zero.
  static MarkedConfiguration create(BoxGeometry box, std::vector<double> coords,
                                    std::vector<double> energies,
                                    std::optional<std::size_t> origin = {});

  const BoxGeometry& box() const { return box_; }
  int dim() const { return box_.dim(); }
  std::size_t size() const { return energies_.size(); }
  bool empty() const { return energies_.empty(); }

  std::span<const double> point(std::size_t i) const {
    const std::size_t d = box_.sides.size();
    return {coords_.data() + i * d, d};
  }
  double coord(std::size_t i, std::size_t axis) const {
    return coords_[i * box_.sides.size() + axis];
  }
  double energy(std::size_t i) const { return energies_[i]; }

  const std::vector<double>& coords() const { return coords_; }
  const std::vector<double>& energies() const { return energies_; }

  std::optional<std::size_t> origin_index() const { return origin_; }
  bool has_origin() const { return origin_.has_value(); }

  /// swap in a new mark vector (same length); positions untouched
  MarkedConfiguration with_energies(std::vector<double> energies) const;

 private:
  BoxGeometry box_;
  std::vector<double> coords_;
  std::vector<double> energies_;
  std::optional<std::size_t> origin_;
};

/// S_x xi: the configuration seen from point x.  Marks are carried along,
/// coordinates are wrapped back into the box, and the origin index points at
/// the translated x.  Requires a periodic box (open windows are not
/// translation invariant).
MarkedConfiguration translate(const MarkedConfiguration& cfg, std::size_t x_index);

/// Crystal Gamma = { B z + c : z integer, c in cell_points } with basis
/// matrix B (columns v_1..v_d) and offsets inside the elementary cell.
struct CrystalSpec {
  std::vector<double> basis;        // d x d, column-major: basis[k*d + row]
  std::vector<double> cell_points;  // flat, d-strided offsets inside the cell
  double dilution_p = 1.0;

  static CrystalSpec cubic(double spacing, int dim, double dilution_p = 1.0);

  int dim() const;
  std::size_t cell_point_count() const;
  double cell_volume() const;  // |det B|
  void validate() const;
};

/// Coarse-grained count field Y(x) = xi(Lambda_K(x)) on the lattice K Z^d.
/// The window keeps an odd number of cells per axis so the origin-centered
/// cell Lambda_K(0) is always present.
struct CountField {
  double cell_size = 0.0;
  std::vector<int> cells_per_axis;      // odd, >= 1
  std::vector<std::uint32_t> counts;    // row-major over the cell lattice

  std::size_t cell_count() const { return counts.size(); }
  std::uint64_t total() const;
  /// lattice coordinates z in [-(M-1)/2 .. (M-1)/2] per axis
  std::uint32_t at(std::span<const int> z) const;
  bool same_window(const CountField& other) const;
};

CountField count_field(const MarkedConfiguration& cfg, double cell_size);
CountField count_field(std::span<const double> coords, const BoxGeometry& box,
                       double cell_size);

}  // namespace mott
