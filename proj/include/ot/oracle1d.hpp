#pragma once

#include <vector>

#include "ot/measures.hpp"

namespace ot {

/// Right-continuous piecewise-linear CDF of a 1D measure.  Between
/// breakpoints[i] and breakpoints[i+1] the CDF is affine starting from
/// valueRight[i]; atoms appear as jumps (valueRight[i] > limit from the
/// left), grid densities as ramps.
class PiecewiseCdf {
 public:
  static PiecewiseCdf from(const DiscreteMeasure& mu);
  static PiecewiseCdf from(const GridDensity& rho);

  double operator()(double x) const;        // F(x), right-continuous
  double quantile(double s) const;          // inf { x : F(x) >= s }
  const Vector& breakpoints() const { return x_; }
  const Vector& valueRight() const { return fRight_; }
  const Vector& slope() const { return slope_; }

 private:
  Vector x_;       // strictly increasing breakpoints
  Vector fRight_;  // F(x_i^+)
  Vector slope_;   // slope on (x_i, x_{i+1}); last entry 0
};

/// W1 as the L1 distance between CDFs, integrated exactly over the merged
/// breakpoint set.  Both arguments must be 1D.
double w1_cdf(const PiecewiseCdf& f0, const PiecewiseCdf& f1);
double w1_cdf(const DiscreteMeasure& mu, const DiscreteMeasure& nu);
double w1_cdf(const GridDensity& mu, const GridDensity& nu);
double w1_cdf(const DiscreteMeasure& mu, const GridDensity& nu);

/// W_p via quantile functions, exact on merged quantile breakpoints;
/// requires p >= 1.  Returns the distance (p-th root of the cost).
double wp_quantile(const PiecewiseCdf& f0, const PiecewiseCdf& f1, double p);
double wp_quantile(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                   double p);
double wp_quantile(const GridDensity& mu, const GridDensity& nu, double p);
double wp_quantile(const DiscreteMeasure& mu, const GridDensity& nu, double p);

/// Monotone assignment of a 1D discrete source onto a 1D density: atom i
/// (in sorted position order) receives the interval [b_i, c_i] between
/// consecutive quantiles of the target.  Intervals are ordered and
/// non-overlapping; interval i carries exactly weight_i of target mass.
struct IntervalAssignment {
  struct Piece {
    Index sourceIndex;  // index into the source measure's atom list
    double b;
    double c;
    double mass;
  };
  std::vector<Piece> pieces;
};

IntervalAssignment semidiscrete_1d(const DiscreteMeasure& mu,
                                   const GridDensity& rho);

}  // namespace ot
