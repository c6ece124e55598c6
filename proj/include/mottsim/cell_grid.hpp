// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mottsim/geometry.hpp"

namespace mott {

/// Cell-list index over a point set for fixed-radius neighbor queries.
/// Queries are exact for any radius: the scan covers every cell block whose
/// minimum distance to the query point is within range, with the periodic
/// wrap handled by clamping the block range to one pass over the lattice.
class CellGrid {
 public:
  CellGrid(std::span<const double> coords, const BoxGeometry& box,
           double target_cell)
      : box_(box), dim_(box.sides.size()) {
    if (!(target_cell > 0.0))
      throw std::invalid_argument("CellGrid: cell size must be positive");
    const std::size_t n = dim_ == 0 ? 0 : coords.size() / dim_;
    cells_.resize(dim_);
    width_.resize(dim_);
    std::size_t ncells = 1;
    for (std::size_t k = 0; k < dim_; ++k) {
      cells_[k] = std::max<long>(1, static_cast<long>(box.sides[k] / target_cell));
      width_[k] = box.sides[k] / static_cast<double>(cells_[k]);
      ncells *= static_cast<std::size_t>(cells_[k]);
    }
    offsets_.assign(ncells + 1, 0);
    std::vector<std::uint32_t> cell_of(n);
    for (std::size_t i = 0; i < n; ++i) {
      cell_of[i] = cell_index(coords.subspan(i * dim_, dim_));
      ++offsets_[cell_of[i] + 1];
    }
    for (std::size_t c = 0; c < ncells; ++c) offsets_[c + 1] += offsets_[c];
    members_.resize(n);
    std::vector<std::uint32_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t i = 0; i < n; ++i)
      members_[cursor[cell_of[i]]++] = static_cast<std::uint32_t>(i);
    coords_ = coords;
  }

  std::size_t size() const { return members_.size(); }

  /// Visit every point j != skip with |x - x_j| <= r; calls f(j, dist2).
  template <typename F>
  void for_each_within(std::span<const double> x, double r, F&& f,
                       std::uint32_t skip = kNoSkip) const {
    const double r2 = r * r;
    std::vector<long> base(dim_), lo(dim_), hi(dim_);
    std::vector<char> full_pass(dim_, 0);
    for (std::size_t k = 0; k < dim_; ++k) {
      base[k] = coord_cell(x[k], k);
      long m = static_cast<long>(std::ceil(r / width_[k]));
      if (box_.periodic()) {
        // one pass over the lattice at most
        if (2 * m + 1 >= cells_[k]) {
          lo[k] = 0;
          hi[k] = cells_[k] - 1;
          full_pass[k] = 1;
        } else {
          lo[k] = base[k] - m;
          hi[k] = base[k] + m;
        }
      } else {
        lo[k] = std::max<long>(0, base[k] - m);
        hi[k] = std::min<long>(cells_[k] - 1, base[k] + m);
      }
    }
    std::vector<long> c(lo);
    const bool per = box_.periodic();
    while (true) {
      // coarse per-axis lower bound on the distance to this cell
      double lb2 = 0.0;
      for (std::size_t k = 0; k < dim_; ++k) {
        if (full_pass[k]) continue;
        const long off = std::llabs(c[k] - base[k]);
        if (off > 1) {
          double g = static_cast<double>(off - 1) * width_[k];
          if (per) {
            const double wrap =
                static_cast<double>(cells_[k] - off - 1) * width_[k];
            g = std::min(g, std::max(0.0, wrap));
          }
          lb2 += g * g;
        }
      }
      if (lb2 <= r2) {
        std::size_t cell = 0;
        for (std::size_t k = 0; k < dim_; ++k) {
          long ck = c[k];
          if (per) {
            ck %= cells_[k];
            if (ck < 0) ck += cells_[k];
          }
          cell = cell * static_cast<std::size_t>(cells_[k]) +
                 static_cast<std::size_t>(ck);
        }
        for (std::size_t s = offsets_[cell]; s < offsets_[cell + 1]; ++s) {
          const std::uint32_t j = members_[s];
          if (j == skip) continue;
          const double d2 =
              distance2(x, coords_.subspan(j * dim_, dim_), box_);
          if (d2 <= r2) f(j, d2);
        }
      }
      std::size_t k = 0;
      while (k < dim_) {
        if (++c[k] <= hi[k]) break;
        c[k] = lo[k];
        ++k;
      }
      if (k == dim_) break;
    }
  }

  static constexpr std::uint32_t kNoSkip = 0xffffffffu;

 private:
  std::uint32_t cell_index(std::span<const double> x) const {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < dim_; ++k)
      idx = idx * static_cast<std::size_t>(cells_[k]) +
            static_cast<std::size_t>(coord_cell(x[k], k));
    return static_cast<std::uint32_t>(idx);
  }

  long coord_cell(double v, std::size_t k) const {
    const double h = box_.sides[k] / 2.0;
    long c = static_cast<long>(std::floor((v + h) / width_[k]));
    return std::clamp<long>(c, 0, cells_[k] - 1);
  }

  BoxGeometry box_;
  std::size_t dim_;
  std::span<const double> coords_;
  std::vector<long> cells_;
  std::vector<double> width_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> members_;
};

}  // namespace mott
