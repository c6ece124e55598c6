// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace mott {

enum class Boundary { periodic, open };

/// Simulation window [-L/2, L/2)^d, axis-aligned, centered at the origin.
/// Dimension must be at least 2; the one dimensional chain is out of scope.
struct BoxGeometry {
  std::vector<double> sides;
  Boundary boundary = Boundary::periodic;

  static BoxGeometry cube(double side, int dim,
                          Boundary boundary = Boundary::periodic);

  int dim() const { return static_cast<int>(sides.size()); }
  bool periodic() const { return boundary == Boundary::periodic; }
  double volume() const;
  double min_side() const;

  /// throws std::invalid_argument if sides or dimension are out of range
  void validate() const;

  bool contains(std::span<const double> x) const;
};

/// Coordinates are kept on a dyadic grid so that differences of coordinates
/// (translations, jump vectors, minimum-image deltas for integer box sides)
/// are exact in double arithmetic.  The quantum is far below every length
/// scale of interest.
inline constexpr double kCoordQuantum = 0x1.0p-26;

inline double snap_coordinate(double x) {
  return std::nearbyint(x * 0x1.0p26) * kCoordQuantum;
}

/// signed displacement a-b along one axis under the box convention
inline double delta_component(double a, double b, double side, bool periodic) {
  double d = a - b;
  if (periodic) d -= side * std::nearbyint(d / side);
  return d;
}

double distance2(std::span<const double> a, std::span<const double> b,
                 const BoxGeometry& box);

inline double distance(std::span<const double> a, std::span<const double> b,
                       const BoxGeometry& box) {
  return std::sqrt(distance2(a, b, box));
}

/// minimum-image displacement a-b written into out
void displacement(std::span<const double> a, std::span<const double> b,
                  const BoxGeometry& box, std::span<double> out);

/// wraps x into [-side/2, side/2) per axis (periodic boxes only)
void wrap_into_box(std::span<double> x, const BoxGeometry& box);

}  // namespace mott
