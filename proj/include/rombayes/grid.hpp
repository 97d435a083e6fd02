// Copyright (c) the rombayes authors. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#ifndef ROMBAYES_GRID_HPP
#define ROMBAYES_GRID_HPP

#include <cstddef>

#include "rombayes/common.hpp"

namespace rombayes {

// Uniform interior grid on the unit square with homogeneous Dirichlet
// boundaries: n_g points per direction, spacing h = 1/(n_g+1), N = n_g^2
// unknowns ordered lexicographically (x1 fastest).
struct Grid {
  std::size_t n_g = 0;

  explicit Grid(std::size_t ng) : n_g(ng) { require(ng >= 1, "grid: n_g must be >= 1"); }

  std::size_t size() const { return n_g * n_g; }
  double h() const { return 1.0 / static_cast<double>(n_g + 1); }

  // Flat index of interior point (i, j), both 0-based in [0, n_g).
  std::size_t node(std::size_t i, std::size_t j) const { return j * n_g + i; }

  // Physical coordinates of interior point (i, j).
  double x1(std::size_t i) const { return static_cast<double>(i + 1) / static_cast<double>(n_g + 1); }
  double x2(std::size_t j) const { return static_cast<double>(j + 1) / static_cast<double>(n_g + 1); }
};

}  // namespace rombayes

#endif  // ROMBAYES_GRID_HPP
