#pragma once

#include <string>
#include <vector>

#include "ot/measures.hpp"

namespace ot {

struct LpResult {
  TransportPlan plan;
  DualPotentials duals;
  int pivots = 0;
};

/// Exact discrete transport by the transportation simplex: north-west
/// corner start, tree-structured bases with degenerate zero-mass cells kept
/// explicit, smallest-index (Bland) pivot selection for anti-cycling.
/// Marginal sums may disagree by at most 1e-8; the residual is folded into
/// the largest entry before solving.  Throws InfeasibleMarginalsError or
/// InvalidCostError.
LpResult solve_lp(const Vector& v, const Vector& w, const CostMatrix& cost);

LpResult solve_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                  const CostMatrix& cost);

struct OptimalityReport {
  bool optimal = false;
  double dualityGap = 0.0;          // |primal - dual|
  double primalCost = 0.0;
  double dualValue = 0.0;
  double maxMarginalViolation = 0.0;
  double maxDualViolation = 0.0;    // max(phi_i + psi_j - c_ij, 0)
  double maxSlacknessViolation = 0.0;
  std::vector<std::string> violations;
};

/// Check primal feasibility, dual feasibility and complementary slackness
/// of a plan/potential pair at tolerance tol.
OptimalityReport verify_optimality(const TransportPlan& plan,
                                   const DualPotentials& duals,
                                   const CostMatrix& cost, const Vector& v,
                                   const Vector& w, double tol = 1e-9);

/// Optimal transport cost between weight vectors under the given cost.
double emd(const Vector& v, const Vector& w, const CostMatrix& cost);

}  // namespace ot
