#pragma once

#include <Eigen/Sparse>
#include <memory>
#include <mutex>
#include <vector>

#include "ot/measures.hpp"

namespace ot {

/// Discrete heat/Gaussian smoothing operator on a grid or a triangle mesh.
///
/// The parameter `time` is the squared kernel bandwidth: one application
/// approximates convolution with exp(-|x-y|^2 / (2*time)).  With
/// time = alpha/2 the operator matches the entropic kernel exp(-c/alpha)
/// for the squared-distance cost, so `alpha() == 2*time()`.
///
/// Grid mode builds one dense kernel matrix per axis by folding a
/// normalized sampled Gaussian window back into the domain (half-sample
/// reflection).  Each axis matrix is symmetric with unit column sums, so
/// the operator conserves mass, preserves constants, maps positive vectors
/// to positive vectors, and is self-adjoint.
///
/// Mesh mode runs `substeps` implicit-Euler steps of lumped-mass cotangent
/// diffusion: (A + (time/2/substeps) * L) u_next = A u.  The half factor
/// calibrates the integrator to the same exp(-d^2/(2*time)) bandwidth as
/// the grid construction.  The factorization is computed once; apply() is
/// reentrant afterwards.
class HeatOperator {
 public:
  enum class Mode { grid, mesh };

  /// Smoothing operator on the cells of `domain` (values are ignored).
  HeatOperator(const GridDensity& domain, double time);

  /// Smoothing operator on the vertices of `mesh`.
  HeatOperator(const MeshDensity& mesh, double time, int substeps = 10);

  Mode mode() const { return mode_; }
  /// Squared bandwidth sigma^2 of the approximated Gaussian kernel.
  double time() const { return time_; }
  /// Entropic regularizer this operator stands in for: alpha = 2*time.
  double alpha() const { return 2.0 * time_; }
  /// Number of sites (grid cells or mesh vertices).
  Index size() const { return weights_.size(); }
  /// Quadrature weight per site: cell volume on grids, lumped vertex area
  /// on meshes.  Sums to the domain volume/area.
  const Vector& siteWeights() const { return weights_; }

  /// One kernel application Hf, where (Hf)_i ~ sum_j k(x_i,x_j) w_j f_j.
  /// f must have size() entries.
  Vector apply(const Vector& f) const;

  /// <T, C_hat> for the scaled plan T_ij = w_i p_i k_ij w_j q_j with the
  /// self-normalized cost C_hat_ij = -alpha*log(k_ij / sqrt(k_ii k_jj)),
  /// which recovers |x_i - x_j|^2 exactly for the flat Gaussian kernel.
  /// Entries with k_ij = 0 carry no plan mass and contribute nothing.
  double transportCost(const Vector& p, const Vector& q) const;

 private:
  void buildGrid(const GridDensity& domain);
  void buildMesh(const MeshDensity& mesh);
  const Matrix& meshKernel() const;  // materialized on first use

  Mode mode_;
  double time_ = 0.0;
  Vector weights_;

  // Grid mode.
  std::vector<Index> shape_;
  std::vector<Matrix> axisKernel_;

  // Mesh mode.
  int substeps_ = 0;
  Vector vertexArea_;
  std::unique_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> solver_;
  mutable Matrix meshKernel_;
  mutable std::once_flag meshKernelOnce_;
};

/// Result of a scaling iteration run against a HeatOperator.  `p` and `q`
/// are the converged scaling functions on the operator's sites; the plan
/// T_ij = w_i p_i k_ij w_j q_j is never materialized.
struct ConvolutionalResult {
  Vector p;
  Vector q;
  double alpha = 0.0;
  int iterations = 0;
  double marginalError = 0.0;
  bool converged = false;
  /// <T, C_hat>: squared-distance transport cost estimate (the W2^2 proxy).
  double transportCost = 0.0;
  /// alpha * (<mass0, log p> + <mass1, log q>): the regularized objective
  /// evaluated from the scalings, reported for diagnostics.
  double regularizedObjective = 0.0;
};

struct ConvolutionalOptions {
  double tol = 1e-9;   // L1 marginal violation, mass-weighted
  int maxIter = 10000;
};

/// Entropic scaling iteration with kernel products replaced by op.apply().
/// mu0, mu1 are nonnegative densities on the operator's sites (normalized
/// internally against the site weights).  Throws UnderflowError when the
/// diffused mass under a populated site vanishes (time too small for the
/// separation of the supports), InvalidInputError/DimensionError on bad
/// input.
ConvolutionalResult convolutional_sinkhorn(
    const HeatOperator& op, const Vector& mu0, const Vector& mu1,
    const ConvolutionalOptions& opt = ConvolutionalOptions());

/// Convenience overload for two densities on the operator's own grid.
ConvolutionalResult convolutional_sinkhorn(
    const HeatOperator& op, const GridDensity& mu0, const GridDensity& mu1,
    const ConvolutionalOptions& opt = ConvolutionalOptions());

/// Weighted entropic barycenter of densities on the operator's sites,
/// computed by iterated scaling projections with kernel products replaced
/// by op.apply().  lambda must lie on the simplex; zero-weight inputs are
/// dropped.  Returns a density normalized against the site weights.
Vector convolutional_barycenter(const HeatOperator& op,
                                const std::vector<Vector>& densities,
                                const Vector& lambda, int maxIter = 2000,
                                double tol = 1e-10);

}  // namespace ot
