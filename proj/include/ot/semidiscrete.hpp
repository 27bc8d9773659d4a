#pragma once

#include <cstdint>
#include <vector>

#include "ot/measures.hpp"

namespace ot {

/// Axis-aligned rectangle [x0,x1] x [y0,y1].
struct Rect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 1.0;
  double y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double diagonal() const;
};

/// Power (Laguerre) diagram of weighted 2D sites clipped to a rectangle:
/// cell i collects the points y with
///   1/2|y - x_i|^2 - phi_i <= 1/2|y - x_j|^2 - phi_j  for all j.
/// With phi = 0 this is the Voronoi diagram.  Cells are convex
/// counterclockwise polygons; empty cells are empty vertex lists.
struct PowerDiagram {
  /// Piece of a cell's boundary lying on the bisector with a neighbor.
  struct BisectorEdge {
    Index neighbor;
    Eigen::Vector2d a;
    Eigen::Vector2d b;
  };

  Matrix sites;  // k x 2
  Vector phi;
  Rect domain;
  std::vector<std::vector<Eigen::Vector2d>> cells;
  std::vector<std::vector<Index>> neighbors;
  std::vector<std::vector<BisectorEdge>> bisectorEdges;

  Index siteCount() const { return sites.rows(); }
};

/// Exact cell polygons by incremental half-plane clipping of the domain
/// rectangle against all bisectors, O(k^2).  Throws InvalidInputError on
/// duplicate sites, DimensionError on shape mismatch.
PowerDiagram build_power_diagram(const Matrix& sites, const Vector& phi,
                                 const Rect& domain);

/// Integral of the piecewise-constant density over each cell via exact
/// polygon clipping against the grid lines.  The density's box must match
/// the diagram's domain.  Masses are nonnegative and sum to the total
/// density mass.
Vector cell_masses(const PowerDiagram& diagram, const GridDensity& rho);

/// Value and gradient of the concave dual objective
///   F(phi) = sum_i [ a_i phi_i + Int_{cell_i} rho(y) (1/2|x_i-y|^2 -
///   phi_i) dA ],
/// with dF/dphi_i = a_i - mass(cell_i).  Cell integrals of the quadratic
/// integrand are exact (triangle-fan midpoint quadrature per clipped
/// polygon piece).
struct SemidiscreteObjective {
  double value = 0.0;
  Vector gradient;
};
SemidiscreteObjective objective_and_gradient(const Matrix& sites,
                                             const Vector& a,
                                             const Vector& phi,
                                             const GridDensity& rho);

enum class SemidiscreteMethod { ascent, newton };

struct SemidiscreteOptions {
  SemidiscreteMethod method = SemidiscreteMethod::newton;
  double tol = 1e-7;  // max-norm of the mass mismatch a - m(phi)
  int maxIter = 500;
};

struct SemidiscreteResult {
  Vector phi;
  PowerDiagram diagram;
  Vector masses;
  /// Squared 2-Wasserstein distance between rho and the weighted sites:
  /// twice the maximized objective (the dual uses the cost 1/2|x-y|^2).
  double w2sq = 0.0;
  int iterations = 0;
  bool converged = false;
  double gradientNorm = 0.0;  // max-norm at the last iterate
  bool usedFallback = false;  // Newton fell back to ascent at least once
};

/// Maximize the dual objective over phi.  Newton solves the grounded
/// cell-adjacency system and halves the step until every positive-mass
/// target keeps a nonempty cell and the objective does not decrease,
/// falling back to a gradient-ascent step (Armijo halving) when damping
/// exhausts.  Requires a on the simplex with a_i > 0.  Non-convergence is
/// reported, not thrown.
SemidiscreteResult solve_semidiscrete(
    const Matrix& sites, const Vector& a, const GridDensity& rho,
    const SemidiscreteOptions& opt = SemidiscreteOptions());

struct StippleResult {
  DiscreteMeasure points;
  /// w2sq after each outer iteration; non-increasing along the run.
  std::vector<double> w2sqHistory;
  int outerIterations = 0;
  double maxMove = 0.0;  // site movement of the last outer iteration
};

/// Blue-noise sampling by Lloyd iteration: alternate the semidiscrete
/// solve with uniform target masses 1/n and a move of each site to the
/// density barycenter of its cell.  Stops when the maximal site movement
/// drops to innerTol or after outerIters rounds.  Deterministic in seed.
StippleResult lloyd_stipple(const GridDensity& rho, Index n, int outerIters,
                            double innerTol, std::uint64_t seed);

}  // namespace ot
