#pragma once

#include "ot/measures.hpp"

namespace ot {

/// Diagonal scalings (p, q) of the Gibbs kernel K = exp(-c/alpha), with the
/// plan recovered as T = diag(p) K diag(q).  For the log-domain solver the
/// scalings are exp(f/alpha), exp(g/alpha) of the potentials, gauge-centred
/// so both stay representable.
struct SinkhornState {
  Vector p;
  Vector q;
  double alpha = 0.0;
  int iterations = 0;
  double marginalError = 0.0;  // max of the two L1 marginal violations
  bool converged = false;
};

struct SinkhornResult {
  SinkhornState state;
  TransportPlan plan;
  double transportCost = 0.0;    // <T, C>
  double regularizedCost = 0.0;  // <T, C> + alpha <T, log T>
};

struct SinkhornOptions {
  double tol = 1e-9;  // on max(|T1 - v|_1, |T^T 1 - w|_1)
  int maxIter = 100000;
};

/// Alternating scaling iteration on the explicit kernel.  Zero-weight bins
/// are removed before iterating and re-inserted in the outputs.  Throws
/// UnderflowError when a kernel-vector product underflows to zero (use
/// sinkhorn_log_domain in that regime).  A run that exhausts maxIter
/// returns converged = false rather than throwing.
SinkhornResult sinkhorn(const Vector& v, const Vector& w,
                        const CostMatrix& cost, double alpha,
                        const SinkhornOptions& opt = {});

/// Same fixed point evaluated with log-sum-exp updates on the potentials;
/// stable for small alpha.
SinkhornResult sinkhorn_log_domain(const Vector& v, const Vector& w,
                                   const CostMatrix& cost, double alpha,
                                   const SinkhornOptions& opt = {});

/// alpha <T, log(T / K)>: must equal regularizedCost up to roundoff; both
/// are exposed so the identity is checkable.
double entropic_objective_kl(const TransportPlan& plan,
                             const CostMatrix& cost, double alpha);

/// Weighted entropic barycenter of histograms sharing a support, by
/// iterated Bregman projections (one scaling pair per input, geometric-mean
/// coupling step).  lambda must be a simplex vector.  Returns a normalized
/// histogram.
Vector entropic_barycenter(const std::vector<Vector>& histograms,
                           const Vector& lambda, const CostMatrix& cost,
                           double alpha, int maxIter = 2000,
                           double tol = 1e-10);

}  // namespace ot
