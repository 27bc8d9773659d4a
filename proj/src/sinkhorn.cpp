#include "ot/sinkhorn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ot/error.hpp"

namespace ot {

namespace {

struct Support {
  std::vector<Index> rows;  // indices with v > 0
  std::vector<Index> cols;  // indices with w > 0
  Vector v;                 // restricted marginals
  Vector w;
  Matrix c;                 // restricted cost
};

/// Elementwise e^{-c/alpha}. Uses scalar std::exp: Eigen's vectorized exp
/// clamps large negative arguments to a small nonzero value instead of
/// underflowing to zero, which would hide dead kernel rows from the
/// underflow guards below.
Matrix kernel_matrix(const Matrix& c, double alpha) {
  Matrix k(c.rows(), c.cols());
  for (Index i = 0; i < c.rows(); ++i)
    for (Index j = 0; j < c.cols(); ++j) k(i, j) = std::exp(-c(i, j) / alpha);
  return k;
}

Support restrict(const Vector& v, const Vector& w, const Matrix& c) {
  Support s;
  for (Index i = 0; i < v.size(); ++i)
    if (v[i] > 0.0) s.rows.push_back(i);
  for (Index j = 0; j < w.size(); ++j)
    if (w[j] > 0.0) s.cols.push_back(j);
  if (s.rows.empty() || s.cols.empty())
    throw ZeroMassError("sinkhorn: empty marginal");
  s.v.resize(static_cast<Index>(s.rows.size()));
  s.w.resize(static_cast<Index>(s.cols.size()));
  s.c.resize(s.v.size(), s.w.size());
  for (size_t a = 0; a < s.rows.size(); ++a) {
    s.v[static_cast<Index>(a)] = v[s.rows[a]];
    for (size_t b = 0; b < s.cols.size(); ++b)
      s.c(static_cast<Index>(a), static_cast<Index>(b)) =
          c(s.rows[a], s.cols[b]);
  }
  for (size_t b = 0; b < s.cols.size(); ++b)
    s.w[static_cast<Index>(b)] = w[s.cols[b]];
  return s;
}

void validate(const Vector& v, const Vector& w, const CostMatrix& cost,
              double alpha) {
  if (cost.rows() != v.size() || cost.cols() != w.size())
    throw DimensionError("sinkhorn: cost shape does not match marginals");
  if (!cost.c.allFinite())
    throw InvalidCostError("sinkhorn: non-finite cost entry");
  detail::require_finite(v, "sinkhorn v");
  detail::require_finite(w, "sinkhorn w");
  if ((v.array() < 0.0).any() || (w.array() < 0.0).any())
    throw InvalidInputError("sinkhorn: negative marginal entry");
  if (std::abs(v.sum() - w.sum()) > 1e-8)
    throw InfeasibleMarginalsError("sinkhorn: marginal sums differ");
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw InvalidInputError("sinkhorn: alpha must be positive");
}

/// Assemble plan, costs and full-size scalings from restricted scalings.
SinkhornResult assemble(const Support& s, const Vector& p, const Vector& q,
                        const Matrix& kOrT, bool isPlan, Index n0, Index n1,
                        double alpha, int iters, double err, bool converged) {
  SinkhornResult out;
  out.state.alpha = alpha;
  out.state.iterations = iters;
  out.state.marginalError = err;
  out.state.converged = converged;
  out.state.p = Vector::Zero(n0);
  out.state.q = Vector::Zero(n1);
  for (size_t a = 0; a < s.rows.size(); ++a)
    out.state.p[s.rows[a]] = p[static_cast<Index>(a)];
  for (size_t b = 0; b < s.cols.size(); ++b)
    out.state.q[s.cols[b]] = q[static_cast<Index>(b)];

  out.plan.rows = n0;
  out.plan.cols = n1;
  double cost = 0.0, ent = 0.0;
  for (Index a = 0; a < s.v.size(); ++a) {
    for (Index b = 0; b < s.w.size(); ++b) {
      const double t = isPlan ? kOrT(a, b) : p[a] * kOrT(a, b) * q[b];
      if (t > 0.0) {
        out.plan.entries.push_back({s.rows[static_cast<size_t>(a)],
                                    s.cols[static_cast<size_t>(b)], t});
        cost += t * s.c(a, b);
        ent += t * std::log(t);
      }
    }
  }
  out.plan.rowMarginal = Vector::Zero(n0);
  out.plan.colMarginal = Vector::Zero(n1);
  for (size_t a = 0; a < s.rows.size(); ++a)
    out.plan.rowMarginal[s.rows[a]] = s.v[static_cast<Index>(a)];
  for (size_t b = 0; b < s.cols.size(); ++b)
    out.plan.colMarginal[s.cols[b]] = s.w[static_cast<Index>(b)];
  out.plan.attainedCost = cost;
  out.transportCost = cost;
  out.regularizedCost = cost + alpha * ent;
  return out;
}

}  // namespace

SinkhornResult sinkhorn(const Vector& v, const Vector& w,
                        const CostMatrix& cost, double alpha,
                        const SinkhornOptions& opt) {
  validate(v, w, cost, alpha);
  const Support s = restrict(v, w, cost.c);
  const Matrix k = kernel_matrix(s.c, alpha);

  Vector p = Vector::Ones(s.v.size());
  Vector q = Vector::Ones(s.w.size());
  double err = std::numeric_limits<double>::infinity();
  int it = 0;
  bool converged = false;
  const double tiny = std::numeric_limits<double>::min();
  while (it < opt.maxIter) {
    ++it;
    const Vector kq = k * q;
    if ((kq.array() < tiny).any())
      throw UnderflowError(
          "sinkhorn: kernel product underflowed; use sinkhorn_log_domain");
    p = s.v.array() / kq.array();
    const Vector ktp = k.transpose() * p;
    if ((ktp.array() < tiny).any())
      throw UnderflowError(
          "sinkhorn: kernel product underflowed; use sinkhorn_log_domain");
    q = s.w.array() / ktp.array();
    // Column marginals are exact (up to roundoff) right after the q-update,
    // so the row violation dominates the sweep error.
    const Vector rowMarg = p.array() * (k * q).array();
    const double rowErr = (rowMarg - s.v).cwiseAbs().sum();
    const double colErr =
        (q.array() * ktp.array() - s.w.array()).abs().sum();
    err = std::max(rowErr, colErr);
    if (err <= opt.tol) {
      converged = true;
      break;
    }
  }
  return assemble(s, p, q, k, false, v.size(), w.size(), alpha, it, err,
                  converged);
}

SinkhornResult sinkhorn_log_domain(const Vector& v, const Vector& w,
                                   const CostMatrix& cost, double alpha,
                                   const SinkhornOptions& opt) {
  validate(v, w, cost, alpha);
  const Support s = restrict(v, w, cost.c);
  const Index k1 = s.v.size(), k2 = s.w.size();
  const Vector logV = s.v.array().log();
  const Vector logW = s.w.array().log();

  Vector f = Vector::Zero(k1), g = Vector::Zero(k2);
  auto lseRows = [&](Vector& out) {
    // out_i = alpha * log sum_j exp((g_j - c_ij) / alpha)
    for (Index i = 0; i < k1; ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (Index j = 0; j < k2; ++j)
        m = std::max(m, (g[j] - s.c(i, j)) / alpha);
      double acc = 0.0;
      for (Index j = 0; j < k2; ++j)
        acc += std::exp((g[j] - s.c(i, j)) / alpha - m);
      out[i] = alpha * (m + std::log(acc));
    }
  };
  auto lseCols = [&](Vector& out) {
    for (Index j = 0; j < k2; ++j) {
      double m = -std::numeric_limits<double>::infinity();
      for (Index i = 0; i < k1; ++i)
        m = std::max(m, (f[i] - s.c(i, j)) / alpha);
      double acc = 0.0;
      for (Index i = 0; i < k1; ++i)
        acc += std::exp((f[i] - s.c(i, j)) / alpha - m);
      out[j] = alpha * (m + std::log(acc));
    }
  };

  Vector lse(std::max(k1, k2));
  double err = std::numeric_limits<double>::infinity();
  int it = 0;
  bool converged = false;
  Matrix t(k1, k2);
  auto buildPlan = [&]() {
    for (Index i = 0; i < k1; ++i)
      for (Index j = 0; j < k2; ++j)
        t(i, j) = std::exp((f[i] + g[j] - s.c(i, j)) / alpha);
  };
  while (it < opt.maxIter) {
    ++it;
    Vector lr(k1);
    lseRows(lr);
    f = alpha * logV.array() - lr.array();
    Vector lc(k2);
    lseCols(lc);
    g = alpha * logW.array() - lc.array();
    buildPlan();
    err = std::max((t.rowwise().sum() - s.v).cwiseAbs().sum(),
                   (t.colwise().sum().transpose() - s.w).cwiseAbs().sum());
    if (err <= opt.tol) {
      converged = true;
      break;
    }
  }

  // Gauge-centre the potentials (the plan only sees f_i + g_j) so that the
  // largest entries of exp(f/alpha) and exp(g/alpha) match and stay finite.
  const double shift = 0.5 * (g.maxCoeff() - f.maxCoeff());
  f.array() += shift;
  g.array() -= shift;
  Vector p = (f / alpha).array().exp();
  Vector q = (g / alpha).array().exp();
  const double floor = std::numeric_limits<double>::min();
  p = p.cwiseMax(floor);
  q = q.cwiseMax(floor);
  buildPlan();
  return assemble(s, p, q, t, true, v.size(), w.size(), alpha, it, err,
                  converged);
}

double entropic_objective_kl(const TransportPlan& plan, const CostMatrix& cost,
                             double alpha) {
  double kl = 0.0;
  for (const auto& e : plan.entries) {
    if (e.mass <= 0.0) continue;
    const double logK = -cost.c(e.i, e.j) / alpha;
    kl += e.mass * (std::log(e.mass) - logK);
  }
  return alpha * kl;
}

Vector entropic_barycenter(const std::vector<Vector>& histograms,
                           const Vector& lambda, const CostMatrix& cost,
                           double alpha, int maxIter, double tol) {
  if (histograms.empty())
    throw InvalidInputError("barycenter: no input histograms");
  if (static_cast<Index>(histograms.size()) != lambda.size())
    throw DimensionError("barycenter: weight/input count mismatch");
  if ((lambda.array() < 0.0).any() || std::abs(lambda.sum() - 1.0) > 1e-9)
    throw InvalidInputError("barycenter: lambda must lie on the simplex");
  const Index n = histograms.front().size();
  if (cost.rows() != n || cost.cols() != n)
    throw DimensionError("barycenter: cost must be n x n on the support");
  for (const Vector& h : histograms) {
    if (h.size() != n)
      throw DimensionError("barycenter: histograms on different supports");
    detail::require_finite(h, "barycenter histogram");
    if ((h.array() < 0.0).any())
      throw InvalidInputError("barycenter: negative histogram entry");
    if (!(h.sum() > 0.0)) throw ZeroMassError("barycenter: zero-mass input");
  }
  if (!(alpha > 0.0)) throw InvalidInputError("barycenter: alpha <= 0");

  // Inputs with zero weight do not contribute to the weighted objective, so
  // drop them up front; a single remaining input is its own barycenter.
  std::vector<Vector> hNorm;
  std::vector<double> lam;
  for (Index l = 0; l < lambda.size(); ++l) {
    if (lambda[l] == 0.0) continue;
    hNorm.push_back(histograms[static_cast<size_t>(l)] /
                    histograms[static_cast<size_t>(l)].sum());
    lam.push_back(lambda[l]);
  }
  const size_t m = hNorm.size();
  if (m == 1) return hNorm.front();

  const Matrix k = kernel_matrix(cost.c, alpha);
  std::vector<Vector> u(m, Vector::Ones(n)), q(m, Vector::Ones(n));
  Vector bary = Vector::Constant(n, 1.0 / static_cast<double>(n));
  const double tiny = std::numeric_limits<double>::min();
  for (int it = 0; it < maxIter; ++it) {
    Vector logBary = Vector::Zero(n);
    std::vector<Vector> ktu(m);
    for (size_t l = 0; l < m; ++l) {
      const Vector kq = k * q[l];
      if ((kq.array() < tiny).any())
        throw UnderflowError("barycenter: kernel product underflowed");
      u[l] = hNorm[l].array() / kq.array();
      ktu[l] = k.transpose() * u[l];
      logBary.array() += lam[l] * ktu[l].array().log();
    }
    const Vector next = logBary.array().exp();
    for (size_t l = 0; l < m; ++l)
      q[l] = next.array() / ktu[l].array().cwiseMax(tiny);
    const double delta = (next - bary).cwiseAbs().sum();
    bary = next;
    if (delta <= tol && it > 0) break;
  }
  const double total = bary.sum();
  if (!(total > 0.0)) throw ZeroMassError("barycenter: collapsed to zero");
  return bary / total;
}

}  // namespace ot
