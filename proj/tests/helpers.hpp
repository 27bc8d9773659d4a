#pragma once

// Shared instance builders for the unit and acceptance suites.  Everything
// is deterministic: every random quantity flows from an explicit mt19937_64
// seed so failures reproduce bit-for-bit.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ot/measures.hpp"

namespace testutil {

using ot::GridDensity;
using ot::Index;
using ot::Matrix;
using ot::Vector;

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& gen, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(gen);
}

/// Random simplex vector with strictly positive entries.
inline Vector random_simplex(std::mt19937_64& gen, Index k, double floor = 1e-3) {
  Vector w(k);
  for (Index i = 0; i < k; ++i) w[i] = uniform(gen) + floor;
  return w / w.sum();
}

/// Random 1D discrete measure with k distinct atoms in [0, 1].
inline ot::DiscreteMeasure random_atoms_1d(std::mt19937_64& gen, Index k) {
  Matrix pts(k, 1);
  for (Index i = 0; i < k; ++i) pts(i, 0) = uniform(gen);
  return ot::DiscreteMeasure(pts, random_simplex(gen, k));
}

/// Random 2D discrete measure with k atoms in the unit square.
inline ot::DiscreteMeasure random_atoms_2d(std::mt19937_64& gen, Index k) {
  Matrix pts(k, 2);
  for (Index i = 0; i < k; ++i) {
    pts(i, 0) = uniform(gen);
    pts(i, 1) = uniform(gen);
  }
  return ot::DiscreteMeasure(pts, random_simplex(gen, k));
}

/// 1D Gaussian-mixture grid density on [0, extent] with a small floor.
struct Bump {
  double center;
  double sigma;
  double weight = 1.0;
};

inline GridDensity bump_grid_1d(Index m, const std::vector<Bump>& bumps,
                                double extent = 1.0, double floor = 1e-4) {
  const double h = extent / static_cast<double>(m);
  Vector v(m);
  for (Index i = 0; i < m; ++i) {
    const double x = (static_cast<double>(i) + 0.5) * h;
    double s = floor;
    for (const Bump& b : bumps) {
      const double z = (x - b.center) / b.sigma;
      s += b.weight * std::exp(-0.5 * z * z);
    }
    v[i] = s;
  }
  return GridDensity({m}, v, {extent});
}

/// 2D isotropic Gaussian bump on an m x m grid over the unit square.
inline GridDensity bump_grid_2d(Index m, double cx, double cy, double sigma,
                                double floor = 1e-4) {
  const double h = 1.0 / static_cast<double>(m);
  Vector v(m * m);
  for (Index r = 0; r < m; ++r) {
    const double y = (static_cast<double>(r) + 0.5) * h;
    for (Index c = 0; c < m; ++c) {
      const double x = (static_cast<double>(c) + 0.5) * h;
      const double zx = (x - cx) / sigma;
      const double zy = (y - cy) / sigma;
      v[c + m * r] = std::exp(-0.5 * (zx * zx + zy * zy)) + floor;
    }
  }
  return GridDensity({m, m}, v, {1.0, 1.0});
}

/// Random smooth 1D density: 2-4 bumps, sigma in [0.05, 0.15].
inline GridDensity random_smooth_grid_1d(std::mt19937_64& gen, Index m) {
  const int nb = 2 + static_cast<int>(gen() % 3);
  std::vector<Bump> bumps;
  for (int i = 0; i < nb; ++i)
    bumps.push_back(Bump{uniform(gen, 0.15, 0.85), uniform(gen, 0.05, 0.15),
                         uniform(gen, 0.3, 1.0)});
  return bump_grid_1d(m, bumps);
}

/// Flat triangulated unit square in the z = 0 plane, n x n vertices.
inline ot::MeshDensity flat_square_mesh(Index n, const Vector& density) {
  const Index nv = n * n;
  Matrix verts(nv, 3);
  for (Index r = 0; r < n; ++r)
    for (Index c = 0; c < n; ++c) {
      const Index v = r * n + c;
      verts(v, 0) = static_cast<double>(c) / static_cast<double>(n - 1);
      verts(v, 1) = static_cast<double>(r) / static_cast<double>(n - 1);
      verts(v, 2) = 0.0;
    }
  const Index ntri = 2 * (n - 1) * (n - 1);
  Eigen::MatrixX3i tris(ntri, 3);
  Index t = 0;
  for (Index r = 0; r + 1 < n; ++r)
    for (Index c = 0; c + 1 < n; ++c) {
      const int v00 = static_cast<int>(r * n + c);
      const int v10 = v00 + 1;
      const int v01 = v00 + static_cast<int>(n);
      const int v11 = v01 + 1;
      tris.row(t++) << v00, v10, v11;
      tris.row(t++) << v00, v11, v01;
    }
  return ot::MeshDensity(verts, tris, density);
}

/// Center of mass of a 1D or 2D grid density along the given axis.
inline double center_of_mass(const GridDensity& g, Index axis) {
  const Index n = g.cellCount();
  double num = 0.0;
  for (Index i = 0; i < n; ++i)
    num += g.values()[i] * g.center(i)[axis];
  return num * g.cellVolume() / g.totalMass();
}

}  // namespace testutil
