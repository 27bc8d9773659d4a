#include "ot/dynamic.hpp"

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ot/error.hpp"

namespace ot {

Index SpaceTimeField::spaceCount() const {
  Index n = 1;
  for (Index m : shape) n *= m;
  return n;
}

double SpaceTimeField::cellVolume() const {
  double v = 1.0;
  for (Index a = 0; a < dim(); ++a) v *= spacing(a);
  return v;
}

namespace {

using Sparse = Eigen::SparseMatrix<double>;

// First derivative along one axis of a flat multi-index lattice stored
// axis-0 fastest: central differences in the interior, one-sided
// two-point stencils at the ends (or wrap-around central differences when
// the axis is periodic).  Annihilates constants exactly either way.
Sparse derivative_matrix(const std::vector<Index>& dims, size_t axis,
                         double h, bool periodic = false) {
  Index n = 1;
  for (Index m : dims) n *= m;
  Index stride = 1;
  for (size_t a = 0; a < axis; ++a) stride *= dims[a];
  const Index m = dims[axis];
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(2 * n));
  for (Index node = 0; node < n; ++node) {
    const Index i = (node / stride) % m;
    if (periodic) {
      const Index prev = node + (i == 0 ? m - 1 : -1) * stride;
      const Index next = node + (i == m - 1 ? -(m - 1) : 1) * stride;
      trips.emplace_back(node, prev, -0.5 / h);
      trips.emplace_back(node, next, 0.5 / h);
    } else if (i == 0) {
      trips.emplace_back(node, node, -1.0 / h);
      trips.emplace_back(node, node + stride, 1.0 / h);
    } else if (i == m - 1) {
      trips.emplace_back(node, node - stride, -1.0 / h);
      trips.emplace_back(node, node, 1.0 / h);
    } else {
      trips.emplace_back(node, node - stride, -0.5 / h);
      trips.emplace_back(node, node + stride, 0.5 / h);
    }
  }
  Sparse d(n, n);
  d.setFromTriplets(trips.begin(), trips.end());
  return d;
}

// r * sum_c D_c^T W D_c with the constant mode grounded at node 0.  The
// grounding is exact: right-hand sides orthogonal to constants yield the
// unique solution with phi[0] = 0.
void factorize_flow_system(
    const std::vector<Sparse>& d, const Vector& w, double r,
    Eigen::SimplicialLDLT<Sparse>& solver) {
  const Index n = w.size();
  Sparse a(n, n);
  for (const Sparse& dc : d) {
    Sparse wdc = w.asDiagonal() * dc;
    a += Sparse(dc.transpose()) * wdc;
  }
  a *= r;
  a.coeffRef(0, 0) += 1.0;
  a.makeCompressed();
  solver.compute(a);
  if (solver.info() != Eigen::Success)
    throw StateError("flow solver: factorization of the potential system "
                     "failed");
}

// Stagnation: the best residual seen so far has not improved tenfold over
// the last 500 iterations (and is still above tolerance).  Tracking minima
// keeps the test robust to the oscillation of the raw residual.
bool stagnated_now(const std::vector<double>& bestHistory, double tol) {
  const size_t window = 500;
  if (bestHistory.size() <= window) return false;
  const double bestNow = bestHistory.back();
  if (bestNow <= tol) return false;
  return bestNow > 0.1 * bestHistory[bestHistory.size() - 1 - window];
}

void check_same_domain(const GridDensity& a, const GridDensity& b,
                       const char* what) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(what) + ": grids differ in shape");
  for (size_t axis = 0; axis < a.extent().size(); ++axis)
    if (std::abs(a.extent()[axis] - b.extent()[axis]) >
        1e-12 * (1.0 + std::abs(a.extent()[axis])))
      throw DimensionError(std::string(what) + ": grids differ in extent");
}

// Magnitude ||b*|| of the boundary projection of an infeasible (a, beta):
// the unique nonnegative root of f(y) = y^3 + 2(1+a) y - 2 beta.  f is
// decreasing then increasing on y >= 0 with f(0) <= 0, so safeguarded
// Newton with a bisection bracket always converges to the single root.
double paraboloid_scale(double a, double beta) {
  const double c1 = 2.0 * (1.0 + a);
  const auto f = [&](double y) { return y * (y * y + c1) - 2.0 * beta; };

  double lo = c1 < 0.0 ? std::sqrt(-c1 / 3.0) : 0.0;  // argmin of f on y>=0
  double hi = std::max(lo, 1.0);
  while (f(hi) <= 0.0) hi *= 2.0;

  double y = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double fy = f(y);
    if (fy > 0.0)
      hi = y;
    else
      lo = y;
    const double dfy = 3.0 * y * y + c1;
    double next = dfy > 0.0 ? y - fy / dfy : lo;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (hi - lo <= 1e-15 * (1.0 + hi)) {
      y = next;
      break;
    }
    y = next;
  }
  return y;
}

}  // namespace

std::pair<double, Vector> project_paraboloid(double a, const Vector& b) {
  if (!std::isfinite(a) || !b.allFinite())
    throw InvalidInputError("project_paraboloid: non-finite input");
  const double slack = a + 0.5 * b.squaredNorm();
  if (slack <= 0.0) return {a, b};

  const double beta = b.norm();
  const double y = paraboloid_scale(a, beta);
  Vector bout = Vector::Zero(b.size());
  if (beta > 0.0) bout = (y / beta) * b;
  return {-0.5 * y * y, bout};
}

DynamicResult solve_dynamic(const GridDensity& rho0, const GridDensity& rho1,
                            const DynamicOptions& opt) {
  check_same_domain(rho0, rho1, "solve_dynamic");
  if (opt.nt < 2) throw InvalidInputError("solve_dynamic: nt must be >= 2");
  if (!(opt.r > 0.0) || !(opt.tol > 0.0) || opt.maxIter < 1)
    throw InvalidInputError("solve_dynamic: bad options");

  // Floor the densities away from vacuum (the kinetic energy divides by
  // rho), then renormalize.
  double volume = 1.0;
  for (double e : rho0.extent()) volume *= e;
  const double uniform = 1.0 / volume;
  const double floor = opt.densityFloor * uniform;
  const GridDensity d0(rho0.shape(), rho0.values().cwiseMax(floor),
                       rho0.extent());
  const GridDensity d1(rho1.shape(), rho1.values().cwiseMax(floor),
                       rho1.extent());

  SpaceTimeField field;
  field.shape = d0.shape();
  field.extent = d0.extent();
  field.nt = opt.nt;
  field.periodic = opt.periodic;
  const Index nSpace = field.spaceCount();
  const Index nt = field.nt;
  const Index n = field.nodeCount();
  const Index dim = field.dim();
  const double vol = field.cellVolume();
  const double dt = field.dt();

  // Lattice dims with time as the last axis; derivative components are
  // ordered [time, spatial axes...].
  std::vector<Index> dims = field.shape;
  dims.push_back(nt + 1);
  std::vector<Sparse> d;
  d.push_back(derivative_matrix(dims, static_cast<size_t>(dim), dt));
  for (Index axis = 0; axis < dim; ++axis)
    d.push_back(derivative_matrix(dims, static_cast<size_t>(axis),
                                  field.spacing(axis), opt.periodic));

  // Quadrature weights: cell volume times trapezoid time weights, which
  // makes the time summation-by-parts identity exact.
  Vector w(n);
  for (Index k = 0; k <= nt; ++k) {
    const double wt = (k == 0 || k == nt) ? 0.5 * dt : dt;
    for (Index s = 0; s < nSpace; ++s) w[field.node(s, k)] = vol * wt;
  }

  // Linear term of the potential objective: the time-boundary data.
  Vector g = Vector::Zero(n);
  for (Index s = 0; s < nSpace; ++s) {
    g[field.node(s, 0)] = vol * d0.values()[s];
    g[field.node(s, nt)] = -vol * d1.values()[s];
  }

  Eigen::SimplicialLDLT<Sparse> solver;
  factorize_flow_system(d, w, opt.r, solver);

  field.phi = Vector::Zero(n);
  field.qa = Vector::Zero(n);
  field.qb = Matrix::Zero(n, dim);
  field.flux = Matrix::Zero(n, dim);
  field.rho.resize(n);
  for (Index k = 0; k <= nt; ++k) {
    const double t = static_cast<double>(k) * dt;
    for (Index s = 0; s < nSpace; ++s)
      field.rho[field.node(s, k)] =
          (1.0 - t) * d0.values()[s] + t * d1.values()[s];
  }

  FlowReport report;
  report.residualHistory.reserve(static_cast<size_t>(opt.maxIter));
  std::vector<double> bestHistory;
  bestHistory.reserve(static_cast<size_t>(opt.maxIter));
  Vector dtPhi(n);
  Matrix dxPhi(n, dim);
  double res = std::numeric_limits<double>::infinity();
  int it = 0;
  while (it < opt.maxIter) {
    ++it;
    // Potential update: r D^T W D phi = D^T W (r q - z) - g.
    Vector rhs = d[0].transpose() *
                 (w.array() * (opt.r * field.qa - field.rho).array()).matrix();
    for (Index c = 0; c < dim; ++c)
      rhs += d[static_cast<size_t>(c) + 1].transpose() *
             (w.array() *
              (opt.r * field.qb.col(c) - field.flux.col(c)).array())
                 .matrix();
    rhs -= g;
    field.phi = solver.solve(rhs);

    dtPhi = d[0] * field.phi;
    for (Index c = 0; c < dim; ++c)
      dxPhi.col(c) = d[static_cast<size_t>(c) + 1] * field.phi;

    // Pointwise projection of grad(phi) + z/r onto the paraboloid.
    for (Index node = 0; node < n; ++node) {
      const double aHat = dtPhi[node] + field.rho[node] / opt.r;
      double bSq = 0.0;
      double bHat[2] = {0.0, 0.0};
      for (Index c = 0; c < dim; ++c) {
        bHat[c] = dxPhi(node, c) + field.flux(node, c) / opt.r;
        bSq += bHat[c] * bHat[c];
      }
      if (aHat + 0.5 * bSq <= 0.0) {
        field.qa[node] = aHat;
        for (Index c = 0; c < dim; ++c) field.qb(node, c) = bHat[c];
      } else {
        const double beta = std::sqrt(bSq);
        const double y = paraboloid_scale(aHat, beta);
        field.qa[node] = -0.5 * y * y;
        const double scale = beta > 0.0 ? y / beta : 0.0;
        for (Index c = 0; c < dim; ++c) field.qb(node, c) = scale * bHat[c];
      }
    }

    // Multiplier update and constraint residual.
    double sq = 0.0;
    for (Index node = 0; node < n; ++node) {
      const double ra = dtPhi[node] - field.qa[node];
      field.rho[node] += opt.r * ra;
      double nodeSq = ra * ra;
      for (Index c = 0; c < dim; ++c) {
        const double rb = dxPhi(node, c) - field.qb(node, c);
        field.flux(node, c) += opt.r * rb;
        nodeSq += rb * rb;
      }
      sq += w[node] * nodeSq;
    }
    res = std::sqrt(sq);
    report.residualHistory.push_back(res);
    bestHistory.push_back(
        bestHistory.empty() ? res : std::min(bestHistory.back(), res));
    if (res <= opt.tol) {
      report.converged = true;
      break;
    }
    if (stagnated_now(bestHistory, opt.tol)) {
      report.stagnated = true;
      break;
    }
  }
  report.iterations = it;
  report.constraintResidual = res;

  // One more potential solve, then return the half-step multiplier
  // z + r(grad(phi) - q).  The potential equation makes that field satisfy
  // the weak continuity identity D^T W z = -g exactly, so the reported
  // density/momentum meet the continuity equation up to the boundary-slice
  // mismatch instead of up to the (much larger) multiplier lag.
  {
    Vector rhs = d[0].transpose() *
                 (w.array() * (opt.r * field.qa - field.rho).array()).matrix();
    for (Index c = 0; c < dim; ++c)
      rhs += d[static_cast<size_t>(c) + 1].transpose() *
             (w.array() *
              (opt.r * field.qb.col(c) - field.flux.col(c)).array())
                 .matrix();
    rhs -= g;
    field.phi = solver.solve(rhs);
    dtPhi = d[0] * field.phi;
    for (Index c = 0; c < dim; ++c)
      dxPhi.col(c) = d[static_cast<size_t>(c) + 1] * field.phi;
    field.rho += opt.r * (dtPhi - field.qa);
    for (Index c = 0; c < dim; ++c)
      field.flux.col(c) += opt.r * (dxPhi.col(c) - field.qb.col(c));
  }

  // Primal value: twice the kinetic-energy integral of (rho, J).
  const double rhoCut = 1e-12 * uniform;
  double kinetic = 0.0;
  for (Index node = 0; node < n; ++node) {
    const double rho = field.rho[node];
    if (rho <= rhoCut) continue;
    kinetic += w[node] * 0.5 * field.flux.row(node).squaredNorm() / rho;
  }
  report.primalValue = 2.0 * kinetic;
  report.dualValue = -2.0 * g.dot(field.phi);
  report.continuityResidual = continuity_residual(field);

  DynamicResult result;
  result.field = field;
  result.w2sq = report.primalValue;
  // Endpoint frames are the (floored) inputs themselves; interior frames
  // come from the multiplier density, clamped and renormalized, with the
  // pre-normalization drift reported.
  for (Index k = 0; k <= nt; ++k) {
    Vector slice(nSpace);
    if (k == 0) {
      slice = d0.values();
    } else if (k == nt) {
      slice = d1.values();
    } else {
      for (Index s = 0; s < nSpace; ++s)
        slice[s] = std::max(field.rho[field.node(s, k)], 0.0);
      const double mass = vol * slice.sum();
      report.maxFrameMassDrift =
          std::max(report.maxFrameMassDrift, std::abs(mass - 1.0));
    }
    result.interpolation.frames.emplace_back(field.shape, slice, field.extent);
    result.interpolation.times.push_back(static_cast<double>(k) * dt);
  }
  result.report = std::move(report);
  return result;
}

double continuity_residual(const SpaceTimeField& field) {
  if (field.nt < 1 || field.shape.empty())
    throw InvalidInputError("continuity_residual: empty field");
  const Index n = field.nodeCount();
  const Index dim = field.dim();
  if (field.rho.size() != n || field.flux.rows() != n ||
      field.flux.cols() != dim)
    throw DimensionError("continuity_residual: field sizes inconsistent");

  const Index nSpace = field.spaceCount();
  const Index nt = field.nt;
  const double vol = field.cellVolume();
  const double dt = field.dt();
  std::vector<Index> dims = field.shape;
  dims.push_back(nt + 1);

  Vector w(n);
  for (Index k = 0; k <= nt; ++k) {
    const double wt = (k == 0 || k == nt) ? 0.5 * dt : dt;
    for (Index s = 0; s < nSpace; ++s) w[field.node(s, k)] = vol * wt;
  }

  const Sparse dTime = derivative_matrix(dims, static_cast<size_t>(dim), dt);
  Vector defect =
      dTime.transpose() * (w.array() * field.rho.array()).matrix();
  for (Index c = 0; c < dim; ++c) {
    const Sparse dx = derivative_matrix(dims, static_cast<size_t>(c),
                                        field.spacing(c), field.periodic);
    defect += dx.transpose() * (w.array() * field.flux.col(c).array()).matrix();
  }
  // Boundary data from the field's own end slices.
  for (Index s = 0; s < nSpace; ++s) {
    defect[field.node(s, 0)] += vol * field.rho[field.node(s, 0)];
    defect[field.node(s, nt)] -= vol * field.rho[field.node(s, nt)];
  }
  return defect.cwiseAbs().sum();
}

BeckmannResult beckmann_w1(const GridDensity& rho0, const GridDensity& rho1,
                           const BeckmannOptions& opt) {
  check_same_domain(rho0, rho1, "beckmann_w1");
  if (!(opt.r > 0.0) || !(opt.tol > 0.0) || opt.maxIter < 1)
    throw InvalidInputError("beckmann_w1: bad options");

  const std::vector<Index>& shape = rho0.shape();
  const Index dim = rho0.dim();
  const Index n = rho0.cellCount();
  const double vol = rho0.cellVolume();

  std::vector<Sparse> d;
  for (Index axis = 0; axis < dim; ++axis)
    d.push_back(derivative_matrix(shape, static_cast<size_t>(axis),
                                  rho0.spacing(axis), opt.periodic));
  const Vector w = Vector::Constant(n, vol);
  const Vector g = -vol * (rho1.values() - rho0.values());

  Eigen::SimplicialLDLT<Sparse> solver;
  factorize_flow_system(d, w, opt.r, solver);

  Vector phi = Vector::Zero(n);
  Matrix q = Matrix::Zero(n, dim);
  Matrix z = Matrix::Zero(n, dim);
  Matrix dxPhi(n, dim);

  FlowReport report;
  report.residualHistory.reserve(static_cast<size_t>(opt.maxIter));
  std::vector<double> bestHistory;
  bestHistory.reserve(static_cast<size_t>(opt.maxIter));
  double res = std::numeric_limits<double>::infinity();
  int it = 0;
  while (it < opt.maxIter) {
    ++it;
    Vector rhs = -g;
    for (Index c = 0; c < dim; ++c)
      rhs += d[static_cast<size_t>(c)].transpose() *
             (w.array() * (opt.r * q.col(c) - z.col(c)).array()).matrix();
    phi = solver.solve(rhs);
    for (Index c = 0; c < dim; ++c)
      dxPhi.col(c) = d[static_cast<size_t>(c)] * phi;

    // Pointwise projection onto the unit ball.
    double sq = 0.0;
    for (Index node = 0; node < n; ++node) {
      double v[2] = {0.0, 0.0};
      double vSq = 0.0;
      for (Index c = 0; c < dim; ++c) {
        v[c] = dxPhi(node, c) + z(node, c) / opt.r;
        vSq += v[c] * v[c];
      }
      const double scale = vSq > 1.0 ? 1.0 / std::sqrt(vSq) : 1.0;
      for (Index c = 0; c < dim; ++c) {
        q(node, c) = scale * v[c];
        const double rb = dxPhi(node, c) - q(node, c);
        z(node, c) += opt.r * rb;
        sq += w[node] * rb * rb;
      }
    }
    res = std::sqrt(sq);
    report.residualHistory.push_back(res);
    bestHistory.push_back(
        bestHistory.empty() ? res : std::min(bestHistory.back(), res));
    if (res <= opt.tol) {
      report.converged = true;
      break;
    }
    if (stagnated_now(bestHistory, opt.tol)) {
      report.stagnated = true;
      break;
    }
  }
  report.iterations = it;
  report.constraintResidual = res;

  // Half-step multiplier with an extra potential solve: satisfies the
  // weak mass-balance equation exactly (see solve_dynamic).
  {
    Vector rhs = -g;
    for (Index c = 0; c < dim; ++c)
      rhs += d[static_cast<size_t>(c)].transpose() *
             (w.array() * (opt.r * q.col(c) - z.col(c)).array()).matrix();
    phi = solver.solve(rhs);
    for (Index c = 0; c < dim; ++c) {
      dxPhi.col(c) = d[static_cast<size_t>(c)] * phi;
      z.col(c) += opt.r * (dxPhi.col(c) - q.col(c));
    }
  }

  double value = 0.0;
  for (Index node = 0; node < n; ++node) value += vol * z.row(node).norm();
  report.primalValue = value;
  report.dualValue = -g.dot(phi);

  // Mass-balance defect of the flow against the prescribed difference.
  Vector defect = g;
  for (Index c = 0; c < dim; ++c)
    defect += d[static_cast<size_t>(c)].transpose() *
              (w.array() * z.col(c).array()).matrix();
  report.continuityResidual = defect.cwiseAbs().sum();

  BeckmannResult result;
  result.w1 = value;
  result.phi = phi;
  result.flux = -z;
  result.report = std::move(report);
  return result;
}

}  // namespace ot
