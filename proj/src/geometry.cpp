// SPDX-License-Identifier: Apache-2.0
#include "mottsim/geometry.hpp"

#include <stdexcept>

namespace mott {

BoxGeometry BoxGeometry::cube(double side, int dim, Boundary boundary) {
  BoxGeometry g;
  g.sides.assign(static_cast<std::size_t>(dim > 0 ? dim : 0), side);
  g.boundary = boundary;
  g.validate();
  return g;
}

double BoxGeometry::volume() const {
  double v = 1.0;
  for (double s : sides) v *= s;
  return v;
}

double BoxGeometry::min_side() const {
  double m = sides.empty() ? 0.0 : sides[0];
  for (double s : sides) m = std::min(m, s);
  return m;
}

void BoxGeometry::validate() const {
  if (dim() < 2)
    throw std::invalid_argument("BoxGeometry: dimension must be >= 2");
  for (double s : sides)
    if (!(s > 0.0) || !std::isfinite(s))
      throw std::invalid_argument("BoxGeometry: sides must be positive");
}

bool BoxGeometry::contains(std::span<const double> x) const {
  for (std::size_t k = 0; k < sides.size(); ++k) {
    const double h = sides[k] / 2.0;
    if (!(x[k] >= -h && x[k] < h)) return false;
  }
  return true;
}

double distance2(std::span<const double> a, std::span<const double> b,
                 const BoxGeometry& box) {
  double s = 0.0;
  const bool per = box.periodic();
  for (std::size_t k = 0; k < box.sides.size(); ++k) {
    const double d = delta_component(a[k], b[k], box.sides[k], per);
    s += d * d;
  }
  return s;
}

void displacement(std::span<const double> a, std::span<const double> b,
                  const BoxGeometry& box, std::span<double> out) {
  const bool per = box.periodic();
  for (std::size_t k = 0; k < box.sides.size(); ++k)
    out[k] = delta_component(a[k], b[k], box.sides[k], per);
}

void wrap_into_box(std::span<double> x, const BoxGeometry& box) {
  for (std::size_t k = 0; k < box.sides.size(); ++k) {
    const double side = box.sides[k];
    const double h = side / 2.0;
    double v = x[k];
    if (v >= -h && v < h) continue;
    v -= side * std::floor((v + h) / side);
    // guard against the upper edge after rounding
    if (v >= h) v -= side;
    if (v < -h) v += side;
    x[k] = v;
  }
}

}  // namespace mott
