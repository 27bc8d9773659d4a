#pragma once

#include <utility>
#include <vector>

#include "ot/measures.hpp"

namespace ot {

/// Node-collocated space-time fields of the dynamic transport solver.
/// Spatial nodes are the cell centers of a GridDensity lattice (d <= 2);
/// time samples are t_k = k/nt for k = 0..nt.  Values between nodes are
/// understood as multilinear interpolants.  Node index = space +
/// spaceCount()*k with the spatial index axis-0 fastest.
///
/// phi is the dual potential; (qa, qb) the auxiliary copy of its
/// space-time gradient (time slot, spatial slots); (rho, flux) the running
/// multiplier, which at convergence carries the primal density and
/// momentum fields.
struct SpaceTimeField {
  std::vector<Index> shape;
  std::vector<double> extent;
  Index nt = 0;
  bool periodic = false;  // spatial stencil convention used by the solver

  Vector phi;
  Vector qa;
  Matrix qb;
  Vector rho;
  Matrix flux;

  Index dim() const { return static_cast<Index>(shape.size()); }
  Index spaceCount() const;
  Index nodeCount() const { return spaceCount() * (nt + 1); }
  double spacing(Index axis) const {
    return extent[static_cast<size_t>(axis)] /
           static_cast<double>(shape[static_cast<size_t>(axis)]);
  }
  double cellVolume() const;
  double dt() const { return 1.0 / static_cast<double>(nt); }
  Index node(Index space, Index k) const { return space + spaceCount() * k; }
};

/// Convergence diagnostics shared by the flow solvers.
struct FlowReport {
  int iterations = 0;
  bool converged = false;
  bool stagnated = false;  // residual failed to drop 10x over 500 iterations
  double constraintResidual = 0.0;  // ||grad(phi) - q|| in the quadrature norm
  double primalValue = 0.0;
  double dualValue = 0.0;
  double continuityResidual = 0.0;   // mass-balance defect, L1
  double maxFrameMassDrift = 0.0;    // max_k |mass(rho(., t_k)) - 1|
  std::vector<double> residualHistory;
};

struct DynamicOptions {
  Index nt = 16;          // time intervals (nt + 1 slices)
  double r = 1.0;         // augmented-Lagrangian penalty
  int maxIter = 20000;
  double tol = 1e-5;      // constraint residual target
  double densityFloor = 1e-7;  // times the uniform level, applied to inputs
  bool periodic = false;  // wrap the spatial box instead of Neumann walls
};

struct DynamicResult {
  InterpolationSequence interpolation;
  /// Squared 2-Wasserstein estimate: twice the kinetic-energy integral
  /// (1/2)·Int ||J||^2/rho of the converged fields.
  double w2sq = 0.0;
  SpaceTimeField field;
  FlowReport report;
};

/// Squared-distance dynamic transport between two grid densities via
/// augmented-Lagrangian splitting: cycle of a space-time Poisson solve for
/// phi, a pointwise paraboloid projection for q, and a multiplier update.
/// Returns the density frames rho(., t_k), the kinetic-energy value, the
/// fields, and a residual report (primalValue = w2sq, dualValue = the
/// boundary-potential estimate of w2sq).  Throws DimensionError on shape
/// mismatch; non-convergence and stagnation are reported, not thrown.
DynamicResult solve_dynamic(const GridDensity& rho0, const GridDensity& rho1,
                            const DynamicOptions& opt = DynamicOptions());

/// Euclidean projection of (a, b) onto {(a, b) : a + ||b||^2/2 <= 0}.
/// Feasible points are returned unchanged; otherwise the closest boundary
/// point, via the unique nonnegative root of a cubic (safeguarded Newton
/// with bisection fallback).  Total: never throws on finite input.
std::pair<double, Vector> project_paraboloid(double a, const Vector& b);

/// L1 mass-balance defect of the field's own (rho, flux): the weak-form
/// divergence of (rho, J) tested against the node basis, with time
/// boundary data taken from the field's first and last slices.  Zero for
/// constant rho with J = 0.  On a converged solve the interior rows vanish
/// identically (multiplier extraction), so the value measures the endpoint
/// slice offset of the collocated scheme — an O(dt^2) quantity that shrinks
/// with nt, not with extra iterations.  Choose tol accordingly when using
/// it as a convergence gate.
double continuity_residual(const SpaceTimeField& field);

struct BeckmannOptions {
  double r = 1.0;
  int maxIter = 20000;
  double tol = 1e-6;
  bool periodic = false;
};

struct BeckmannResult {
  /// Minimal total flow cost Sum vol*||J||_2: the 1-Wasserstein distance.
  double w1 = 0.0;
  Vector phi;
  /// Per-cell flow vectors (spaceCount x d) with weak divergence
  /// rho1 - rho0 and no flux through the box boundary.
  Matrix flux;
  FlowReport report;
};

/// Static minimal-flow problem: minimize Sum vol*||J|| subject to the
/// discrete divergence constraint div J = rho1 - rho0, solved by the same
/// splitting with the pointwise projection replaced by the unit-ball
/// projection.  primal/dual values in the report are the flow cost and
/// the potential-form value <phi, rho1 - rho0>.
BeckmannResult beckmann_w1(const GridDensity& rho0, const GridDensity& rho1,
                           const BeckmannOptions& opt = BeckmannOptions());

}  // namespace ot
