#include "ot/heat.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <string>

#include "ot/error.hpp"

namespace ot {

namespace {

// Symmetric kernel matrix for one axis: a normalized sampled Gaussian
// window folded back into [0, m) by half-sample reflection.  Columns sum
// to one exactly, so mass is conserved; symmetry makes the operator
// self-adjoint and constant-preserving.
Matrix axis_kernel(Index m, double h, double sigma) {
  Index radius = static_cast<Index>(std::ceil(6.0 * sigma / h));
  radius = std::max<Index>(Index{1}, std::min(radius, 64 * m));
  const Index width = 2 * radius + 1;
  Vector window(width);
  for (Index k = -radius; k <= radius; ++k) {
    const double z = static_cast<double>(k) * h / sigma;
    window[k + radius] = std::exp(-0.5 * z * z);
  }
  window /= window.sum();

  Matrix kernel = Matrix::Zero(m, m);
  for (Index j = 0; j < m; ++j) {
    for (Index k = -radius; k <= radius; ++k) {
      Index t = j + k;
      while (t < 0 || t >= m) {
        if (t < 0)
          t = -1 - t;
        else
          t = 2 * m - 1 - t;
      }
      kernel(t, j) += window[k + radius];
    }
  }
  kernel = 0.5 * (kernel + kernel.transpose()).eval();
  return kernel;
}

// X applied along axis 0 and Y along axis 1 of a flat axis-0-fastest
// vector: vec(X * U * Y^T) with U the m0 x m1 unflattening of v.
Vector apply_separable(const Matrix& x, const Matrix& y, const Vector& v) {
  Eigen::Map<const Matrix> u(v.data(), x.cols(), y.cols());
  Matrix out = x * u * y.transpose();
  return Eigen::Map<const Vector>(out.data(), out.size());
}

// Entrywise k*log(k) with 0*log(0) = 0.
Matrix entropy_weighted(const Matrix& k) {
  Matrix m = k;
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      m(i, j) = k(i, j) > 0.0 ? k(i, j) * std::log(k(i, j)) : 0.0;
  return m;
}

}  // namespace

HeatOperator::HeatOperator(const GridDensity& domain, double time)
    : mode_(Mode::grid), time_(time) {
  if (!(time > 0.0) || !std::isfinite(time))
    throw InvalidInputError("HeatOperator: time must be positive and finite");
  buildGrid(domain);
}

HeatOperator::HeatOperator(const MeshDensity& mesh, double time, int substeps)
    : mode_(Mode::mesh), time_(time), substeps_(substeps) {
  if (!(time > 0.0) || !std::isfinite(time))
    throw InvalidInputError("HeatOperator: time must be positive and finite");
  if (substeps < 1)
    throw InvalidInputError("HeatOperator: substeps must be >= 1");
  buildMesh(mesh);
}

void HeatOperator::buildGrid(const GridDensity& domain) {
  shape_ = domain.shape();
  weights_ = Vector::Constant(domain.cellCount(), domain.cellVolume());
  const double sigma = std::sqrt(time_);
  for (Index axis = 0; axis < domain.dim(); ++axis)
    axisKernel_.push_back(axis_kernel(shape_[static_cast<size_t>(axis)],
                                      domain.spacing(axis), sigma));
}

void HeatOperator::buildMesh(const MeshDensity& mesh) {
  vertexArea_ = mesh.vertexArea();
  weights_ = vertexArea_;
  const Index n = mesh.vertexCount();

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<size_t>(mesh.triangleCount()) * 12);
  for (Index f = 0; f < mesh.triangleCount(); ++f) {
    const Index idx[3] = {mesh.triangles()(f, 0), mesh.triangles()(f, 1),
                          mesh.triangles()(f, 2)};
    for (int corner = 0; corner < 3; ++corner) {
      const Index k = idx[corner];
      const Index a = idx[(corner + 1) % 3];
      const Index b = idx[(corner + 2) % 3];
      const Eigen::Vector3d e1 =
          (mesh.vertices().row(a) - mesh.vertices().row(k)).transpose();
      const Eigen::Vector3d e2 =
          (mesh.vertices().row(b) - mesh.vertices().row(k)).transpose();
      const double area2 = e1.cross(e2).norm();
      if (!(area2 > 0.0))
        throw GeometryError("HeatOperator: degenerate triangle");
      const double halfCot = 0.5 * e1.dot(e2) / area2;
      trips.emplace_back(a, b, -halfCot);
      trips.emplace_back(b, a, -halfCot);
      trips.emplace_back(a, a, halfCot);
      trips.emplace_back(b, b, halfCot);
    }
  }
  Eigen::SparseMatrix<double> system(n, n);
  system.setFromTriplets(trips.begin(), trips.end());
  // Semigroup time is time/2 (the kernel exp(-d^2/(2*time)) is the heat
  // kernel at that instant), split across the substeps.
  const double tau = 0.5 * time_ / static_cast<double>(substeps_);
  system *= tau;
  for (Index i = 0; i < n; ++i) system.coeffRef(i, i) += vertexArea_[i];
  system.makeCompressed();
  solver_ =
      std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
  solver_->compute(system);
  if (solver_->info() != Eigen::Success)
    throw GeometryError("HeatOperator: diffusion factorization failed");
}

Vector HeatOperator::apply(const Vector& f) const {
  if (f.size() != size())
    throw DimensionError("HeatOperator::apply: size mismatch");
  detail::require_finite(f, "HeatOperator::apply input");
  if (mode_ == Mode::grid) {
    if (axisKernel_.size() == 1) return axisKernel_[0] * f;
    return apply_separable(axisKernel_[0], axisKernel_[1], f);
  }
  Vector u = f;
  for (int step = 0; step < substeps_; ++step) {
    // Materialize the right-hand side: the sparse solver applies a fill-in
    // permutation to it, so it must not alias the destination.
    const Vector rhs = vertexArea_.asDiagonal() * u;
    u = solver_->solve(rhs);
  }
  return u;
}

const Matrix& HeatOperator::meshKernel() const {
  std::call_once(meshKernelOnce_, [this] {
    const Index n = vertexArea_.size();
    Matrix h = Matrix::Identity(n, n);
    for (int step = 0; step < substeps_; ++step) {
      const Matrix rhs = vertexArea_.asDiagonal() * h;
      h = solver_->solve(rhs);
    }
    // Kernel density values: h_ij = k_ij * a_j.
    h = h * vertexArea_.cwiseInverse().asDiagonal();
    meshKernel_ = 0.5 * (h + h.transpose());
  });
  return meshKernel_;
}

double HeatOperator::transportCost(const Vector& p, const Vector& q) const {
  if (p.size() != size() || q.size() != size())
    throw DimensionError("HeatOperator::transportCost: size mismatch");
  const double a = alpha();

  if (mode_ == Mode::grid) {
    const double vol = weights_[0];
    if (axisKernel_.size() == 1) {
      const Matrix& k = axisKernel_[0];
      const Matrix m = entropy_weighted(k);
      const Vector logDiag = k.diagonal().array().log();
      const double sLog = p.dot(m * q);
      const Vector rowMass = vol * p.array() * (k * q).array();
      const Vector colMass = vol * q.array() * (k * p).array();
      return -a * vol * sLog +
             0.5 * a * (rowMass.dot(logDiag) + colMass.dot(logDiag));
    }
    const Matrix& k0 = axisKernel_[0];
    const Matrix& k1 = axisKernel_[1];
    const Matrix m0 = entropy_weighted(k0);
    const Matrix m1 = entropy_weighted(k1);
    const Index n0 = k0.rows();
    const Index n1 = k1.rows();
    Vector logDiag(n0 * n1);
    for (Index i1 = 0; i1 < n1; ++i1)
      for (Index i0 = 0; i0 < n0; ++i0)
        logDiag[i0 + n0 * i1] =
            std::log(k0(i0, i0)) + std::log(k1(i1, i1));
    const double sLog = p.dot(apply_separable(m0, k1, q)) +
                        p.dot(apply_separable(k0, m1, q));
    const Vector rowMass =
        vol * p.array() * apply_separable(k0, k1, q).array();
    const Vector colMass =
        vol * q.array() * apply_separable(k0, k1, p).array();
    return -a * vol * sLog +
           0.5 * a * (rowMass.dot(logDiag) + colMass.dot(logDiag));
  }

  const Matrix& k = meshKernel();
  const Index n = size();
  const double tiny = std::numeric_limits<double>::min();
  Vector logDiag(n);
  for (Index i = 0; i < n; ++i) logDiag[i] = std::log(std::max(k(i, i), tiny));
  double cost = 0.0;
  for (Index j = 0; j < n; ++j) {
    const double wq = vertexArea_[j] * q[j];
    if (wq == 0.0) continue;
    for (Index i = 0; i < n; ++i) {
      const double kij = k(i, j);
      if (kij <= 0.0) continue;
      const double mass = vertexArea_[i] * p[i] * kij * wq;
      if (mass <= 0.0) continue;
      cost += mass * (-a) * (std::log(kij) - 0.5 * (logDiag[i] + logDiag[j]));
    }
  }
  return cost;
}

namespace {

Vector normalized_site_density(const HeatOperator& op, const Vector& mu,
                               const char* what) {
  if (mu.size() != op.size())
    throw DimensionError(std::string(what) + ": density size mismatch");
  detail::require_finite(mu, what);
  if ((mu.array() < 0.0).any())
    throw InvalidInputError(std::string(what) + ": negative density value");
  const double total = op.siteWeights().dot(mu);
  if (!(total > 0.0))
    throw ZeroMassError(std::string(what) + ": zero total mass");
  return mu / total;
}

// mu / diffused, zero where mu is zero; throws when diffused mass has
// vanished (or gone nonpositive) under a populated site.
Vector masked_ratio(const Vector& mu, const Vector& diffused,
                    const char* what) {
  const double tiny = std::numeric_limits<double>::min();
  Vector out(mu.size());
  for (Index i = 0; i < mu.size(); ++i) {
    if (mu[i] == 0.0) {
      out[i] = 0.0;
    } else if (diffused[i] < tiny) {
      throw UnderflowError(
          std::string(what) +
          ": diffused mass underflowed beneath a populated site; increase "
          "the operator time (larger alpha)");
    } else {
      out[i] = mu[i] / diffused[i];
    }
  }
  return out;
}

}  // namespace

ConvolutionalResult convolutional_sinkhorn(const HeatOperator& op,
                                           const Vector& mu0,
                                           const Vector& mu1,
                                           const ConvolutionalOptions& opt) {
  if (!(opt.tol > 0.0) || opt.maxIter < 1)
    throw InvalidInputError("convolutional_sinkhorn: bad options");
  const Vector v = normalized_site_density(op, mu0, "convolutional_sinkhorn");
  const Vector w = normalized_site_density(op, mu1, "convolutional_sinkhorn");
  const Vector& sw = op.siteWeights();

  ConvolutionalResult res;
  res.alpha = op.alpha();
  Vector p = Vector::Zero(op.size());
  Vector q = Vector::Ones(op.size());
  Vector hq = op.apply(q);
  Vector hp(op.size());
  double err = std::numeric_limits<double>::infinity();
  int it = 0;
  while (it < opt.maxIter) {
    ++it;
    p = masked_ratio(v, hq, "convolutional_sinkhorn");
    hp = op.apply(p);
    q = masked_ratio(w, hp, "convolutional_sinkhorn");
    hq = op.apply(q);
    const double rowErr =
        (sw.array() * (p.array() * hq.array() - v.array()).abs()).sum();
    const double colErr =
        (sw.array() * (q.array() * hp.array() - w.array()).abs()).sum();
    err = std::max(rowErr, colErr);
    if (err <= opt.tol) {
      res.converged = true;
      break;
    }
  }
  res.p = p;
  res.q = q;
  res.iterations = it;
  res.marginalError = err;
  res.transportCost = op.transportCost(p, q);
  double reg = 0.0;
  for (Index i = 0; i < op.size(); ++i) {
    if (v[i] > 0.0) reg += sw[i] * v[i] * std::log(p[i]);
    if (w[i] > 0.0) reg += sw[i] * w[i] * std::log(q[i]);
  }
  res.regularizedObjective = res.alpha * reg;
  return res;
}

ConvolutionalResult convolutional_sinkhorn(const HeatOperator& op,
                                           const GridDensity& mu0,
                                           const GridDensity& mu1,
                                           const ConvolutionalOptions& opt) {
  if (op.mode() != HeatOperator::Mode::grid)
    throw InvalidInputError(
        "convolutional_sinkhorn: grid densities need a grid operator");
  if (mu0.shape() != mu1.shape())
    throw DimensionError("convolutional_sinkhorn: grids differ in shape");
  return convolutional_sinkhorn(op, mu0.values(), mu1.values(), opt);
}

Vector convolutional_barycenter(const HeatOperator& op,
                                const std::vector<Vector>& densities,
                                const Vector& lambda, int maxIter,
                                double tol) {
  if (densities.empty())
    throw InvalidInputError("convolutional_barycenter: no inputs");
  if (static_cast<Index>(densities.size()) != lambda.size())
    throw DimensionError(
        "convolutional_barycenter: weight/input count mismatch");
  if ((lambda.array() < 0.0).any() || std::abs(lambda.sum() - 1.0) > 1e-9)
    throw InvalidInputError(
        "convolutional_barycenter: lambda must lie on the simplex");
  if (maxIter < 1 || !(tol > 0.0))
    throw InvalidInputError("convolutional_barycenter: bad options");

  std::vector<Vector> h;
  std::vector<double> lam;
  for (Index l = 0; l < lambda.size(); ++l) {
    if (lambda[l] == 0.0) continue;
    h.push_back(normalized_site_density(op, densities[static_cast<size_t>(l)],
                                        "convolutional_barycenter"));
    lam.push_back(lambda[l]);
  }
  if (h.size() == 1) return h.front();

  const size_t m = h.size();
  const Index n = op.size();
  const Vector& sw = op.siteWeights();
  const double tiny = std::numeric_limits<double>::min();
  std::vector<Vector> q(m, Vector::Ones(n));
  Vector bary = Vector::Constant(n, 1.0 / sw.sum());
  for (int it = 0; it < maxIter; ++it) {
    Vector logBary = Vector::Zero(n);
    std::vector<Vector> hu(m);
    for (size_t l = 0; l < m; ++l) {
      const Vector hq = op.apply(q[l]);
      const Vector u = masked_ratio(h[l], hq, "convolutional_barycenter");
      hu[l] = op.apply(u).cwiseMax(0.0);
      logBary.array() += lam[l] * hu[l].array().log();
    }
    const Vector next = logBary.array().exp();
    for (size_t l = 0; l < m; ++l) {
      Vector& ql = q[l];
      ql.resize(n);
      for (Index i = 0; i < n; ++i)
        ql[i] = hu[l][i] > tiny ? next[i] / hu[l][i] : 0.0;
    }
    const double delta = (sw.array() * (next - bary).array().abs()).sum();
    bary = next;
    if (delta <= tol && it > 0) break;
  }
  const double total = sw.dot(bary);
  if (!(total > 0.0))
    throw ZeroMassError("convolutional_barycenter: collapsed to zero");
  return bary / total;
}

}  // namespace ot
